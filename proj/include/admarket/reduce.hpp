#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "admarket/market.hpp"
#include "admarket/oracle.hpp"
#include "admarket/rational.hpp"

namespace admarket {

/// One agent b_ij and one good g_ij per positive w_ij, in row-major order.
/// pairs[f] is the (i, j) pair behind flat index f.
struct SpecialMarket {
  MarketInstance instance;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

class LiftError : public std::runtime_error {
 public:
  enum class Kind { InconsistentLift, CertificationFailed };
  LiftError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Every agent owns exactly one unit of its own good, and b_ij values g_lk
/// at w_lk * u_ik (a unit of g_lk is w_lk units of g_k).
inline SpecialMarket to_special(const MarketInstance& inst) {
  SpecialMarket out;
  for (std::size_t i = 0; i < inst.agents(); ++i)
    for (std::size_t j = 0; j < inst.goods(); ++j)
      if (inst.w(i, j) > 0) out.pairs.emplace_back(i, j);
  const auto size = out.pairs.size();
  IntMatrix u(size, std::vector<std::int64_t>(size, 0));
  IntMatrix w(size, std::vector<std::int64_t>(size, 0));
  for (std::size_t a = 0; a < size; ++a) {
    const auto i = out.pairs[a].first;
    w[a][a] = 1;
    for (std::size_t g = 0; g < size; ++g) {
      const auto [l, k] = out.pairs[g];
      u[a][g] = inst.w(l, k) * inst.u(i, k);
    }
  }
  out.instance = MarketInstance(size, size, std::move(u), std::move(w));
  return out;
}

struct LiftedSolution {
  PriceVector prices;
  FlowMatrix flow;
};

/// Maps an equilibrium of the special market back: p_k = p_lk / w_lk (which
/// must not depend on l) and f_ik sums all money agent i's copies send to
/// copies of good k. The result is certified before it is returned.
inline LiftedSolution lift_solution(const MarketInstance& inst, const SpecialMarket& special,
                                    const PriceVector& special_prices, const FlowMatrix& special_flow) {
  const auto n = inst.agents(), m = inst.goods();
  const auto size = special.pairs.size();
  if (special_prices.size() != size || special_flow.size() != size)
    throw std::invalid_argument("special solution has wrong size");

  LiftedSolution out;
  std::vector<char> seen(m, 0);
  out.prices.assign(m, Rational(0));
  for (std::size_t g = 0; g < size; ++g) {
    const auto [l, k] = special.pairs[g];
    const Rational price = special_prices[g] / inst.w(l, k);
    if (!seen[k]) {
      out.prices[k] = price;
      seen[k] = 1;
    } else if (out.prices[k] != price) {
      throw LiftError(LiftError::Kind::InconsistentLift,
                      "copies of good g_" + std::to_string(k + 1) + " imply different prices");
    }
  }
  for (std::size_t k = 0; k < m; ++k)
    if (!seen[k]) throw LiftError(LiftError::Kind::InconsistentLift, "good has no owner");

  out.flow.assign(n, std::vector<Rational>(m, Rational(0)));
  for (std::size_t a = 0; a < size; ++a) {
    if (special_flow[a].size() != size) throw std::invalid_argument("special flow has wrong shape");
    for (std::size_t g = 0; g < size; ++g) out.flow[special.pairs[a].first][special.pairs[g].second] += special_flow[a][g];
  }

  const auto check = check_equilibrium(inst, out.prices, &out.flow);
  if (!check.ok()) throw LiftError(LiftError::Kind::CertificationFailed, check.violation->message());
  return out;
}

}  // namespace admarket
