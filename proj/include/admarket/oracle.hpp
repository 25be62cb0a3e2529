#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "admarket/flow.hpp"
#include "admarket/market.hpp"
#include "admarket/rational.hpp"
#include "admarket/simplex.hpp"

namespace admarket {

using FlowMatrix = std::vector<std::vector<Rational>>;

struct EquilibriumViolation {
  enum class Condition {
    NonPositivePrice,
    NegativeFlow,
    GoodNotCleared,    // (a)
    BudgetNotSpent,    // (b)
    NotBangForBuck,    // (c)
  };
  Condition condition;
  std::size_t index;    // good for (a) and prices, agent otherwise
  std::size_t other = 0;  // good index for (c) and negative flow
  Rational deficit;     // required minus actual, where meaningful

  std::string message() const {
    const auto b = "b_" + std::to_string(index + 1);
    const auto g = "g_" + std::to_string(index + 1);
    switch (condition) {
      case Condition::NonPositivePrice: return "price of " + g + " is not positive";
      case Condition::NegativeFlow: return "negative flow from " + b + " to g_" + std::to_string(other + 1);
      case Condition::GoodNotCleared: return "good " + g + " not cleared, deficit " + to_fraction_string(deficit);
      case Condition::BudgetNotSpent: return "agent " + b + " budget not spent, deficit " + to_fraction_string(deficit);
      case Condition::NotBangForBuck:
        return "agent " + b + " spends on g_" + std::to_string(other + 1) + " which is not maximum bang-for-buck";
    }
    return "violation";
  }
};

inline const char* condition_name(EquilibriumViolation::Condition c) {
  using C = EquilibriumViolation::Condition;
  switch (c) {
    case C::NonPositivePrice: return "price";
    case C::NegativeFlow: return "flow";
    case C::GoodNotCleared: return "a";
    case C::BudgetNotSpent: return "b";
    case C::NotBangForBuck: return "c";
  }
  return "?";
}

struct EquilibriumCheck {
  std::optional<EquilibriumViolation> violation;
  FlowMatrix flow;  // the certified flow (given or found)
  bool ok() const { return !violation; }
};

inline FlowMatrix to_matrix(const EqualityFlow& f) { return f.edge; }

/// Checks market clearing (a), budget exhaustion (b) and bang-for-buck
/// spending (c) exactly. Without a flow, one max flow on N_p decides
/// whether some equilibrium flow exists at p.
inline EquilibriumCheck check_equilibrium(const MarketInstance& inst, const PriceVector& p,
                                          const FlowMatrix* flow = nullptr) {
  using C = EquilibriumViolation::Condition;
  const auto n = inst.agents(), m = inst.goods();
  EquilibriumCheck out;
  if (p.size() != m) throw std::invalid_argument("price vector has wrong length");
  for (std::size_t j = 0; j < m; ++j)
    if (sgn(p[j]) <= 0) {
      out.violation = EquilibriumViolation{C::NonPositivePrice, j, 0, Rational(0)};
      return out;
    }

  if (!flow) {
    const auto net = build_equality_network(inst, p);
    const auto f = max_flow(net);
    out.flow = f.edge;
    for (std::size_t j = 0; j < m; ++j)
      if (f.sink[j] != net.values[j]) {
        out.violation = EquilibriumViolation{C::GoodNotCleared, j, 0, net.values[j] - f.sink[j]};
        return out;
      }
    return out;
  }

  const FlowMatrix& f = *flow;
  if (f.size() != n) throw std::invalid_argument("flow has wrong shape");
  for (std::size_t i = 0; i < n; ++i) {
    if (f[i].size() != m) throw std::invalid_argument("flow has wrong shape");
    for (std::size_t j = 0; j < m; ++j)
      if (sgn(f[i][j]) < 0) {
        out.violation = EquilibriumViolation{C::NegativeFlow, i, j, -f[i][j]};
        return out;
      }
  }
  out.flow = f;
  for (std::size_t j = 0; j < m; ++j) {
    Rational in = 0;
    for (std::size_t i = 0; i < n; ++i) in += f[i][j];
    const Rational need = inst.value(j, p);
    if (in != need) {
      out.violation = EquilibriumViolation{C::GoodNotCleared, j, 0, need - in};
      return out;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    Rational spent = 0;
    for (std::size_t j = 0; j < m; ++j) spent += f[i][j];
    const Rational income = inst.budget(i, p);
    if (spent != income) {
      out.violation = EquilibriumViolation{C::BudgetNotSpent, i, 0, income - spent};
      return out;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (sgn(f[i][j]) == 0) continue;
      for (std::size_t k = 0; k < m; ++k)
        if (compare_bang_per_buck(inst.u(i, k), p[k], inst.u(i, j), p[j]) > 0) {
          out.violation = EquilibriumViolation{C::NotBangForBuck, i, j, Rational(0)};
          return out;
        }
    }
  }
  return out;
}

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleEquilibrium {
  PriceVector prices;
  FlowMatrix flow;
};

/// Brute-force equilibrium: enumerates demand supports (each agent keeps a
/// nonempty subset of the goods it likes) in lexicographic order and solves,
/// per support, an exact LP over (p, f, t): the support goods have equal
/// bang-for-buck, no other good beats them, markets clear, p_0 = 1, and t
/// (a lower bound on every price) is maximized. The first support with
/// t > 0 yields the answer. Intended for tiny markets only.
inline OracleEquilibrium oracle_equilibrium(const MarketInstance& inst) {
  using Sense = LinearProgram::Sense;
  const auto n = inst.agents(), m = inst.goods();

  std::vector<std::vector<std::size_t>> liked(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (inst.u(i, j) > 0) liked[i].push_back(j);

  // masks[i] enumerates nonempty subsets of liked[i] in increasing order.
  std::vector<std::uint64_t> mask(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    if (liked[i].empty() || liked[i].size() > 20) throw OracleError("oracle: unsupported instance");

  while (true) {
    std::vector<std::vector<std::size_t>> support(n);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t b = 0; b < liked[i].size(); ++b)
        if (mask[i] >> b & 1U) {
          support[i].push_back(liked[i][b]);
          edges.emplace_back(i, liked[i][b]);
        }

    const std::size_t vars = m + edges.size() + 1;  // p | f | t
    const std::size_t tvar = vars - 1;
    LinearProgram lp(vars);
    auto row = [&] { return std::vector<Rational>(vars, Rational(0)); };

    {
      auto r = row();
      r[0] = 1;
      lp.add(std::move(r), Sense::Eq, 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto j1 = support[i].front();
      for (std::size_t k = 0; k < m; ++k) {
        if (k == j1) continue;
        // u_{i j1} p_k - u_{ik} p_{j1}  (= 0 inside the support, >= 0 outside)
        auto r = row();
        r[k] += inst.u(i, j1);
        r[j1] -= inst.u(i, k);
        const bool inside = std::find(support[i].begin(), support[i].end(), k) != support[i].end();
        lp.add(std::move(r), inside ? Sense::Eq : Sense::Ge, 0);
      }
    }
    for (std::size_t j = 0; j < m; ++j) {  // (a)
      auto r = row();
      for (std::size_t e = 0; e < edges.size(); ++e)
        if (edges[e].second == j) r[m + e] = 1;
      std::int64_t units = 0;
      for (std::size_t i = 0; i < n; ++i) units += inst.w(i, j);
      r[j] -= units;
      lp.add(std::move(r), Sense::Eq, 0);
    }
    for (std::size_t i = 0; i < n; ++i) {  // (b)
      auto r = row();
      for (std::size_t e = 0; e < edges.size(); ++e)
        if (edges[e].first == i) r[m + e] = 1;
      for (std::size_t j = 0; j < m; ++j) r[j] -= inst.w(i, j);
      lp.add(std::move(r), Sense::Eq, 0);
    }
    for (std::size_t j = 0; j < m; ++j) {
      auto r = row();
      r[j] = 1;
      r[tvar] = -1;
      lp.add(std::move(r), Sense::Ge, 0);
    }
    {
      auto r = row();
      r[tvar] = 1;
      lp.add(std::move(r), Sense::Le, 1);
    }
    lp.objective[tvar] = 1;

    const auto sol = solve_lp(lp);
    if (sol.status == LpSolution::Status::Optimal && sgn(sol.value) > 0) {
      OracleEquilibrium out;
      out.prices.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(m));
      out.flow.assign(n, std::vector<Rational>(m, Rational(0)));
      for (std::size_t e = 0; e < edges.size(); ++e) out.flow[edges[e].first][edges[e].second] = sol.x[m + e];
      return out;
    }

    // next support: agent 0 is the most significant digit
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (mask[pos] + 1 < (std::uint64_t{1} << liked[pos].size())) {
        ++mask[pos];
        for (std::size_t q = pos + 1; q < n; ++q) mask[q] = 1;
        break;
      }
      if (pos == 0) throw OracleError("oracle: no equilibrium found");
    }
  }
}

/// Rescales so the smallest price is 1.
inline PriceVector normalize_min_one(const PriceVector& p) {
  Rational lo = p.front();
  for (const auto& x : p)
    if (x < lo) lo = x;
  PriceVector out(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) out[j] = p[j] / lo;
  return out;
}

inline bool equal_up_to_scaling(const PriceVector& a, const PriceVector& b) {
  return a.size() == b.size() && normalize_min_one(a) == normalize_min_one(b);
}

}  // namespace admarket
