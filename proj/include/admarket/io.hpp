#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "admarket/instances.hpp"
#include "admarket/market.hpp"
#include "admarket/oracle.hpp"
#include "admarket/rational.hpp"
#include "admarket/reduce.hpp"
#include "admarket/solver.hpp"

namespace admarket::io {

using json = nlohmann::json;
using nlohmann::ordered_json;

inline ordered_json instance_to_json(const MarketInstance& inst) {
  ordered_json j;
  j["n"] = inst.agents();
  j["m"] = inst.goods();
  j["u"] = inst.utility();
  j["w"] = inst.endowment();
  return j;
}

inline MarketInstance instance_from_json(const json& j) {
  const auto n = j.at("n").get<std::size_t>();
  const auto m = j.at("m").get<std::size_t>();
  return MarketInstance(n, m, j.at("u").get<IntMatrix>(), j.at("w").get<IntMatrix>());
}

inline Rational rational_from_json(const json& j) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<long>());
  throw std::invalid_argument("rational must be a \"num/den\" string or an integer");
}

inline ordered_json rationals_to_json(const std::vector<Rational>& v) {
  ordered_json out = ordered_json::array();
  for (const auto& x : v) out.push_back(to_fraction_string(x));
  return out;
}

inline std::vector<Rational> rationals_from_json(const json& j) {
  std::vector<Rational> out;
  for (const auto& x : j) out.push_back(rational_from_json(x));
  return out;
}

inline ordered_json decimals_to_json(const std::vector<Rational>& v) {
  ordered_json out = ordered_json::array();
  for (const auto& x : v) out.push_back(to_double(x));
  return out;
}

/// Accepts a bare array or an object with a "prices" member.
inline PriceVector prices_from_json(const json& j) {
  return rationals_from_json(j.is_object() ? j.at("prices") : j);
}

inline ordered_json flow_to_json(const FlowMatrix& f) {
  ordered_json out = ordered_json::array();
  for (const auto& row : f) out.push_back(rationals_to_json(row));
  return out;
}

/// Accepts a bare matrix or an object with a "flow" member.
inline FlowMatrix flow_from_json(const json& j) {
  FlowMatrix out;
  for (const auto& row : j.is_object() ? j.at("flow") : j) out.push_back(rationals_from_json(row));
  return out;
}

inline ordered_json indices_to_json(const IndexSet& s) {
  ordered_json out = ordered_json::array();
  for (auto x : s) out.push_back(x);
  return out;
}

/// One JSON-lines trace object.
inline ordered_json record_to_json(const IterationRecord& r) {
  ordered_json j;
  j["iter"] = r.iter;
  j["x_name"] = candidate_name(r.x_name);
  j["x"] = to_fraction_string(r.x);
  j["light"] = r.light;
  j["S_size"] = r.S_size;
  j["gamma_size"] = r.gamma_size;
  j["l1"] = to_fraction_string(r.l1);
  j["l2sq"] = to_fraction_string(r.l2sq);
  j["types"] = {{"t1", r.types.t1}, {"t2", r.types.t2}, {"t3", r.types.t3}, {"t4a", r.types.t4a}, {"t4b", r.types.t4b}};
  j["network_changed"] = r.network_changed;
  j["max_price_bits"] = r.max_price_bits;
  if (!r.S.empty() || !r.gamma.empty()) {
    j["S"] = indices_to_json(r.S);
    j["gamma"] = indices_to_json(r.gamma);
  }
  if (!r.prices.empty()) j["prices"] = rationals_to_json(r.prices);
  if (!r.surplus.empty()) j["surplus"] = rationals_to_json(r.surplus);
  return j;
}

inline ordered_json blocks_to_json(const BlockInstance& b) {
  ordered_json out = ordered_json::array();
  for (const auto& s : b.blocks) {
    ordered_json j;
    j["i"] = s.i;
    j["j"] = s.j;
    j["pi_rank"] = s.pi_rank;
    j["agents"] = indices_to_json(s.agents());
    j["high_demand"] = indices_to_json(s.high_demand());
    out.push_back(std::move(j));
  }
  ordered_json doc;
  doc["blocks"] = std::move(out);
  doc["terminal"] = {{"begin", b.terminal_begin}, {"size", b.terminal_size}};
  return doc;
}

inline ordered_json special_to_json(const SpecialMarket& s) {
  ordered_json doc;
  doc["instance"] = instance_to_json(s.instance);
  ordered_json map = ordered_json::array();
  for (const auto& [i, j] : s.pairs) map.push_back({i, j});
  doc["index_map"] = std::move(map);
  return doc;
}

}  // namespace admarket::io
