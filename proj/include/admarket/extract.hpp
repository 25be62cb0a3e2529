#pragma once

#include <cstddef>
#include <algorithm>
#include <deque>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "admarket/linalg.hpp"
#include "admarket/market.hpp"
#include "admarket/oracle.hpp"
#include "admarket/rational.hpp"

namespace admarket {

class ExtractError : public std::runtime_error {
 public:
  enum class Kind { RankDeficient, CertificationFailed };
  ExtractError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct CanonicalSystem {
  enum class RowKind { Proportional, ComponentBalance, UnitPrice };
  RationalMatrix matrix;
  std::vector<Rational> rhs;
  std::vector<RowKind> kinds;
  std::size_t components = 0;
  std::size_t unit_good = 0;

  std::size_t count(RowKind k) const {
    return static_cast<std::size_t>(std::count(kinds.begin(), kinds.end(), k));
  }
};

namespace detail {

// Connected components of the demand graph, discovered by BFS from the
// lowest-index unvisited agent; goods without any demand edge come last,
// each on its own. Returns component ids plus forest neighbors per agent
// in visit order (parent good first).
struct DemandForest {
  std::vector<std::size_t> agent_component, good_component;
  std::vector<std::vector<std::size_t>> neighbors;
  std::size_t components = 0;
};

inline DemandForest demand_forest(const EqualityNetwork& net) {
  constexpr auto none = static_cast<std::size_t>(-1);
  DemandForest out;
  out.agent_component.assign(net.n, none);
  out.good_component.assign(net.m, none);
  out.neighbors.assign(net.n, {});

  std::vector<std::vector<std::size_t>> admirers(net.m);
  for (std::size_t i = 0; i < net.n; ++i)
    for (auto j : net.demand[i]) admirers[j].push_back(i);

  for (std::size_t root = 0; root < net.n; ++root) {
    if (out.agent_component[root] != none) continue;
    const auto c = out.components++;
    // queue entries: (is_good, index)
    std::deque<std::pair<bool, std::size_t>> queue{{false, root}};
    out.agent_component[root] = c;
    while (!queue.empty()) {
      const auto [is_good, v] = queue.front();
      queue.pop_front();
      if (!is_good) {
        for (auto j : net.demand[v])
          if (out.good_component[j] == none) {
            out.good_component[j] = c;
            out.neighbors[v].push_back(j);
            queue.emplace_back(true, j);
          }
      } else {
        for (auto i : admirers[v])
          if (out.agent_component[i] == none) {
            out.agent_component[i] = c;
            out.neighbors[i].push_back(v);
            queue.emplace_back(false, i);
          }
      }
    }
  }
  for (std::size_t j = 0; j < net.m; ++j)
    if (out.good_component[j] == none) out.good_component[j] = out.components++;
  return out;
}

}  // namespace detail

/// Proportionality rows along a BFS spanning forest of the demand graph,
/// budget balance for every component but the last, and one row fixing the
/// lexicographically first cheapest good to 1.
inline CanonicalSystem build_canonical_system(const MarketInstance& inst, const EqualityNetwork& net,
                                              const PriceVector& p) {
  using Kind = CanonicalSystem::RowKind;
  const auto n = inst.agents(), m = inst.goods();
  if (p.size() != m || net.n != n || net.m != m) throw std::invalid_argument("size mismatch");

  const auto forest = detail::demand_forest(net);
  CanonicalSystem sys;
  sys.components = forest.components;
  auto zero_row = [m] { return std::vector<Rational>(m, Rational(0)); };

  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = forest.neighbors[i];
    if (nb.empty()) continue;
    const auto j1 = nb.front();
    for (std::size_t l = 1; l < nb.size(); ++l) {
      auto row = zero_row();
      row[nb[l]] += inst.u(i, j1);
      row[j1] -= inst.u(i, nb[l]);
      sys.matrix.push_back(std::move(row));
      sys.rhs.emplace_back(0);
      sys.kinds.push_back(Kind::Proportional);
    }
  }

  for (std::size_t c = 0; c + 1 < forest.components; ++c) {
    auto row = zero_row();
    for (std::size_t i = 0; i < n; ++i)
      if (forest.agent_component[i] == c)
        for (std::size_t k = 0; k < m; ++k) row[k] += inst.w(i, k);
    for (std::size_t k = 0; k < m; ++k)
      if (forest.good_component[k] == c)
        for (std::size_t i = 0; i < n; ++i) row[k] -= inst.w(i, k);
    sys.matrix.push_back(std::move(row));
    sys.rhs.emplace_back(0);
    sys.kinds.push_back(Kind::ComponentBalance);
  }

  std::size_t cheapest = 0;
  for (std::size_t j = 1; j < m; ++j)
    if (p[j] < p[cheapest]) cheapest = j;
  sys.unit_good = cheapest;
  auto row = zero_row();
  row[cheapest] = 1;
  sys.matrix.push_back(std::move(row));
  sys.rhs.emplace_back(1);
  sys.kinds.push_back(Kind::UnitPrice);

  if (sys.matrix.size() != m)
    throw ExtractError(ExtractError::Kind::RankDeficient,
                       "canonical system has " + std::to_string(sys.matrix.size()) + " rows for " +
                           std::to_string(m) + " unknowns");
  return sys;
}

/// Solves the canonical system for the terminal network and certifies the
/// result with an exact max-flow equilibrium check.
inline PriceVector extract_equilibrium(const MarketInstance& inst, const PriceVector& p, const EqualityNetwork& net) {
  const auto sys = build_canonical_system(inst, net, p);
  auto solution = solve_linear_system(sys.matrix, sys.rhs);
  if (!solution) throw ExtractError(ExtractError::Kind::RankDeficient, "canonical system is singular");
  for (const auto& x : *solution)
    if (sgn(x) <= 0)
      throw ExtractError(ExtractError::Kind::CertificationFailed, "extracted price vector is not positive");
  const auto check = check_equilibrium(inst, *solution);
  if (!check.ok())
    throw ExtractError(ExtractError::Kind::CertificationFailed,
                       "extracted prices are not an equilibrium: " + check.violation->message());
  return std::move(*solution);
}

/// Component-wise rescaling of an equilibrium until the extended network
/// (demand edges plus ownership edges) is connected. Each step scales one
/// component away from the cheapest good's component until a new demand
/// edge leaves it. Result has minimum price 1.
inline PriceVector canonical_prices(const MarketInstance& inst, const PriceVector& equilibrium) {
  const auto n = inst.agents(), m = inst.goods();
  PriceVector p = normalize_min_one(equilibrium);

  while (true) {
    const auto net = build_equality_network(inst, p);
    // union-find over agents [0,n) and goods [n,n+m)
    std::vector<std::size_t> parent(n + m);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    auto unite = [&](std::size_t a, std::size_t b) { parent[find(a)] = find(b); };
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (net.has_edge(i, j) || inst.w(i, j) > 0) unite(i, n + j);

    std::size_t cheapest = 0;
    for (std::size_t j = 1; j < m; ++j)
      if (p[j] < p[cheapest]) cheapest = j;
    const auto home = find(n + cheapest);

    std::vector<std::size_t> roots;
    for (std::size_t v = 0; v < n + m; ++v)
      if (find(v) == v && v != home) roots.push_back(v);
    if (roots.empty()) return p;

    bool moved = false;
    for (auto root : roots) {
      std::optional<Rational> factor;
      for (std::size_t i = 0; i < n; ++i) {
        if (find(i) != root) continue;
        const auto j = net.demand[i].front();
        for (std::size_t k = 0; k < m; ++k) {
          if (find(n + k) == root || inst.u(i, k) == 0) continue;
          Rational x = Rational(inst.u(i, j)) * p[k] / (Rational(inst.u(i, k)) * p[j]);
          if (!factor || x < *factor) factor = x;
        }
      }
      if (!factor) continue;
      for (std::size_t k = 0; k < m; ++k)
        if (find(n + k) == root) p[k] *= *factor;
      moved = true;
      break;
    }
    if (!moved) throw std::runtime_error("canonical_prices: market is reducible");
  }
}

}  // namespace admarket
