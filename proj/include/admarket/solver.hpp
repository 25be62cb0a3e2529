#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "admarket/extract.hpp"
#include "admarket/flow.hpp"
#include "admarket/market.hpp"
#include "admarket/rational.hpp"

namespace admarket {

/// GENERAL: price-classified light/heavy step cap. DGM: step cap chosen by
/// the presence of type-3 agents. DM: gap-ratio S rule, always the small cap.
enum class Policy { General, DGM, DM };

inline const char* policy_name(Policy p) {
  switch (p) {
    case Policy::General: return "general";
    case Policy::DGM: return "dgm";
    case Policy::DM: return "dm";
  }
  return "?";
}

inline Policy parse_policy(const std::string& s) {
  if (s == "general") return Policy::General;
  if (s == "dgm") return Policy::DGM;
  if (s == "dm") return Policy::DM;
  throw std::invalid_argument("unknown policy: " + s);
}

enum class AgentType { T1, T2, T3, T4a, T4b };
enum class CandidateName { Eq, X23, X24, X13, X2, Max };

inline const char* candidate_name(CandidateName c) {
  switch (c) {
    case CandidateName::Eq: return "x_eq";
    case CandidateName::X23: return "x_23";
    case CandidateName::X24: return "x_24";
    case CandidateName::X13: return "x_13";
    case CandidateName::X2: return "x_2";
    case CandidateName::Max: return "x_max";
  }
  return "?";
}

class SolverError : public std::runtime_error {
 public:
  enum class Kind { NoSurplus, InvalidFactor, InvalidInstance };
  SolverError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Candidate step factors; nullopt stands for +infinity.
struct Candidates {
  std::optional<Rational> eq, x23, x24, x13, x2;
  Rational max;

  /// Smallest candidate; ties go to the earlier name in eq, 23, 24, 13, 2, max.
  std::pair<CandidateName, Rational> choose() const {
    CandidateName name = CandidateName::Max;
    Rational best = max;
    const std::array<std::pair<CandidateName, const std::optional<Rational>*>, 5> finite{{
        {CandidateName::Eq, &eq},
        {CandidateName::X23, &x23},
        {CandidateName::X24, &x24},
        {CandidateName::X13, &x13},
        {CandidateName::X2, &x2},
    }};
    for (auto it = finite.rbegin(); it != finite.rend(); ++it)
      if (*it->second && **it->second <= best) {
        best = **it->second;
        name = it->first;
      }
    return {name, best};
  }
};

struct TypeCounts {
  std::size_t t1 = 0, t2 = 0, t3 = 0, t4a = 0, t4b = 0;
  bool operator==(const TypeCounts&) const = default;
};

struct IterationPlan {
  IndexSet S;
  IndexSet gamma;
  std::vector<AgentType> types;
  /// Surplus growth per unit of (x - 1): Δ_i for agents in S,
  /// Σ_{Γ(S)} w_ij p_j for type-3 agents, zero otherwise.
  std::vector<Rational> slopes;
  Candidates candidates;
  CandidateName chosen = CandidateName::Max;
  Rational x;
  std::size_t k = 0;  // agents of S partially owning a good of Γ(S)
  bool heavy = false;

  TypeCounts counts() const {
    TypeCounts c;
    for (auto t : types) switch (t) {
        case AgentType::T1: ++c.t1; break;
        case AgentType::T2: ++c.t2; break;
        case AgentType::T3: ++c.t3; break;
        case AgentType::T4a: ++c.t4a; break;
        case AgentType::T4b: ++c.t4b; break;
      }
    return c;
  }
};

struct SolverConfig {
  Policy policy = Policy::General;
  Rational R = 60;
  std::optional<Rational> epsilon;  // unset: the worst-case threshold below
  std::optional<std::size_t> max_iterations;
  /// 0 none, 1 per-iteration summary, 2 adds S and Γ(S), 3 adds prices and surpluses.
  int trace_level = 1;
  /// Start vector for warm-started experiments; unset means all ones.
  std::optional<PriceVector> initial_prices;
};

/// 1 / (8 (n+m)^{4(n+m)} (UW)^{3(n+m)})
inline Rational default_epsilon(const MarketInstance& inst) {
  const auto nm = static_cast<unsigned long>(inst.agents() + inst.goods());
  const long uw = static_cast<long>(inst.max_utility() * inst.max_endowment());
  Integer den = 8 * integer_pow(static_cast<long>(nm), 4 * nm) * integer_pow(uw, 3 * nm);
  return Rational(Integer(1), den);
}

namespace detail {

inline std::vector<std::size_t> surplus_order(const std::vector<Rational>& r) {
  std::vector<std::size_t> order(r.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
  return order;
}

inline IndexSet sorted_prefix(const std::vector<std::size_t>& order, std::size_t len) {
  IndexSet s(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(len));
  std::sort(s.begin(), s.end());
  return s;
}

inline void require_surplus(const std::vector<Rational>& r) {
  if (std::none_of(r.begin(), r.end(), [](const Rational& x) { return sgn(x) > 0; }))
    throw SolverError(SolverError::Kind::NoSurplus, "no agent has positive surplus");
}

}  // namespace detail

/// High-surplus set of the GENERAL and DGM policies. S is the shortest
/// surplus-ordered prefix ending at a strict drop such that every agent in
/// the band [r_ℓ/(1+1/n), r_ℓ) has no outflow and owns nothing in Γ(S).
inline std::pair<IndexSet, IndexSet> select_high_surplus_set(const MarketInstance& inst, const EqualityNetwork& net,
                                                             const EqualityFlow& f, const std::vector<Rational>& r) {
  const auto n = net.n;
  detail::require_surplus(r);
  const auto order = detail::surplus_order(r);
  const Rational np1 = static_cast<unsigned long>(n + 1);
  const Rational nn = static_cast<unsigned long>(n);

  for (std::size_t len = 1; len < n; ++len) {
    const Rational& rl = r[order[len - 1]];
    if (!(rl > r[order[len]])) continue;
    IndexSet S = detail::sorted_prefix(order, len);
    IndexSet gamma = neighborhood(net, S);
    bool ok = true;
    for (std::size_t pos = len; pos < n && ok; ++pos) {
      const auto k = order[pos];
      if (np1 * r[k] < nn * rl) break;  // below the band; order is decreasing
      if (!(r[k] < rl)) continue;
      if (sgn(f.source[k]) != 0) ok = false;
      for (auto j : gamma)
        if (inst.w(k, j) > 0) ok = false;
    }
    if (ok) return {std::move(S), std::move(gamma)};
  }
  IndexSet S = all_indices(n);
  IndexSet gamma = neighborhood(net, S);
  return {std::move(S), std::move(gamma)};
}

/// DM rule: S ends before the first consecutive pair whose surplus ratio
/// exceeds 1 + 1/n.
inline std::pair<IndexSet, IndexSet> select_high_surplus_set_dm(const EqualityNetwork& net,
                                                                const std::vector<Rational>& r) {
  const auto n = net.n;
  detail::require_surplus(r);
  const auto order = detail::surplus_order(r);
  const Rational np1 = static_cast<unsigned long>(n + 1);
  const Rational nn = static_cast<unsigned long>(n);
  std::size_t len = n;
  for (std::size_t l = 1; l < n; ++l)
    if (nn * r[order[l - 1]] > np1 * r[order[l]]) {
      len = l;
      break;
    }
  IndexSet S = detail::sorted_prefix(order, len);
  IndexSet gamma = neighborhood(net, S);
  return {std::move(S), std::move(gamma)};
}

inline std::pair<IndexSet, IndexSet> select_high_surplus_set(const MarketInstance& inst, const EqualityNetwork& net,
                                                             const EqualityFlow& f) {
  return select_high_surplus_set(inst, net, f, f.agent_surplus(net));
}

inline std::pair<IndexSet, IndexSet> select_high_surplus_set_dm(const EqualityNetwork& net, const EqualityFlow& f) {
  return select_high_surplus_set_dm(net, f.agent_surplus(net));
}

inline std::pair<IndexSet, IndexSet> select_for_policy(Policy policy, const MarketInstance& inst,
                                                       const EqualityNetwork& net, const EqualityFlow& f,
                                                       const std::vector<Rational>& r) {
  return policy == Policy::DM ? select_high_surplus_set_dm(net, r) : select_high_surplus_set(inst, net, f, r);
}

inline std::pair<IndexSet, IndexSet> select_for_policy(Policy policy, const MarketInstance& inst,
                                                       const EqualityNetwork& net, const EqualityFlow& f) {
  return select_for_policy(policy, inst, net, f, f.agent_surplus(net));
}

/// Fills plan.types and plan.slopes.
inline void classify_agents(const MarketInstance& inst, const EqualityNetwork& net, const EqualityFlow& f,
                            const PriceVector& p, IterationPlan& plan, const std::vector<Rational>& r) {
  const auto n = net.n;
  plan.types.assign(n, AgentType::T4b);
  plan.slopes.assign(n, Rational(0));
  plan.k = 0;

  Rational r_min;
  bool first = true;
  for (auto i : plan.S)
    if (first || r[i] < r_min) {
      r_min = r[i];
      first = false;
    }
  const Rational np1 = static_cast<unsigned long>(n + 1);
  const Rational nn = static_cast<unsigned long>(n);

  for (std::size_t i = 0; i < n; ++i) {
    Rational owned_value = 0, spent = 0;
    bool owns = false;
    for (auto j : plan.gamma) {
      if (inst.w(i, j) > 0) {
        owns = true;
        owned_value += inst.w(i, j) * p[j];
      }
      spent += f.edge[i][j];
    }
    if (contains(plan.S, i)) {
      plan.types[i] = owned_value > spent ? AgentType::T1 : AgentType::T2;
      plan.slopes[i] = owned_value - spent;
      if (owns) ++plan.k;
    } else if (owns) {
      plan.types[i] = AgentType::T3;
      plan.slopes[i] = owned_value;
    } else {
      // r >= r_min / (1 + 1/n)  <=>  (n+1) r >= n r_min
      plan.types[i] = np1 * r[i] >= nn * r_min ? AgentType::T4a : AgentType::T4b;
    }
  }
}

inline void classify_agents(const MarketInstance& inst, const EqualityNetwork& net, const EqualityFlow& f,
                            const PriceVector& p, IterationPlan& plan) {
  classify_agents(inst, net, f, p, plan, f.agent_surplus(net));
}

/// Fills plan.candidates, plan.heavy, plan.chosen and plan.x.
inline void compute_candidates(const MarketInstance& inst, const EqualityNetwork& net, const PriceVector& p,
                               const SolverConfig& config, IterationPlan& plan, const std::vector<Rational>& r) {
  const auto n = net.n, m = net.m;
  Candidates c;

  auto take_min = [](std::optional<Rational>& slot, const Rational& v) {
    if (!slot || v < *slot) slot = v;
  };

  // x_eq: first new demand edge from S to a good outside Γ(S).
  // All demand edges of an agent tie, so the first one stands for them.
  for (auto i : plan.S) {
    const auto j = net.demand[i].front();
    for (std::size_t k = 0; k < m; ++k) {
      if (contains(plan.gamma, k) || inst.u(i, k) <= 0) continue;
      Rational ratio = (inst.u(i, j) * p[k]) / (p[j] * inst.u(i, k));
      take_min(c.eq, ratio);
    }
  }

  // Pairwise crossings: r_a + t s_a = r_b + t s_b with t = x - 1 > 0.
  auto crossing = [&](std::optional<Rational>& slot, AgentType ta, AgentType tb) {
    for (std::size_t a = 0; a < n; ++a) {
      if (plan.types[a] != ta) continue;
      for (std::size_t b = 0; b < n; ++b) {
        if (plan.types[b] != tb) continue;
        const Rational gap = r[a] - r[b];
        const Rational closing = plan.slopes[b] - plan.slopes[a];
        if (sgn(gap) > 0 && sgn(closing) > 0) take_min(slot, 1 + gap / closing);
      }
    }
  };
  crossing(c.x23, AgentType::T2, AgentType::T3);
  crossing(c.x24, AgentType::T2, AgentType::T4b);
  crossing(c.x13, AgentType::T1, AgentType::T3);
  for (std::size_t a = 0; a < n; ++a)
    if (plan.types[a] == AgentType::T2 && sgn(plan.slopes[a]) < 0 && sgn(r[a]) > 0)
      take_min(c.x2, 1 - r[a] / plan.slopes[a]);

  // Light iff some good of Γ(S) is priced below R n^4 m W.
  const Rational nr = static_cast<unsigned long>(n);
  const Rational threshold = config.R * nr * nr * nr * nr * static_cast<unsigned long>(m) *
                             static_cast<unsigned long>(inst.max_endowment());
  plan.heavy = !plan.gamma.empty();
  for (auto j : plan.gamma)
    if (p[j] < threshold) plan.heavy = false;

  const Rational light_cap = 1 + 1 / (config.R * nr * nr * nr);
  auto heavy_cap = [&](std::size_t k) {
    return Rational(1 + 1 / (config.R * static_cast<unsigned long>(std::max<std::size_t>(k, 1)) * nr * nr));
  };
  switch (config.policy) {
    case Policy::General: c.max = plan.heavy ? heavy_cap(plan.k) : light_cap; break;
    case Policy::DGM: {
      const auto counts = plan.counts();
      c.max = counts.t3 > 0 ? light_cap : heavy_cap(counts.t1);
      break;
    }
    case Policy::DM: c.max = light_cap; break;
  }

  plan.candidates = c;
  std::tie(plan.chosen, plan.x) = c.choose();
}

inline void compute_candidates(const MarketInstance& inst, const EqualityNetwork& net, const EqualityFlow& f,
                               const PriceVector& p, const SolverConfig& config, IterationPlan& plan) {
  compute_candidates(inst, net, p, config, plan, f.agent_surplus(net));
}

inline IterationPlan make_plan(const MarketInstance& inst, const EqualityNetwork& net, const EqualityFlow& f,
                               const PriceVector& p, const SolverConfig& config) {
  IterationPlan plan;
  const auto r = f.agent_surplus(net);
  std::tie(plan.S, plan.gamma) = select_for_policy(config.policy, inst, net, f, r);
  classify_agents(inst, net, f, p, plan, r);
  compute_candidates(inst, net, p, config, plan, r);
  return plan;
}

/// Multiplies the prices of Γ(S), the flow into Γ(S) and the source flow of
/// S by x. Rejects x <= 1 and x > x_max.
inline std::pair<PriceVector, EqualityFlow> apply_update(const PriceVector& p, const EqualityFlow& f,
                                                         const IndexSet& S, const IndexSet& gamma,
                                                         const Rational& x, const Rational& x_max) {
  if (x <= 1 || x > x_max)
    throw SolverError(SolverError::Kind::InvalidFactor, "step factor must satisfy 1 < x <= x_max");
  PriceVector p2 = p;
  EqualityFlow f2 = f;
  for (auto j : gamma) {
    p2[j] *= x;
    f2.sink[j] *= x;
    for (std::size_t i = 0; i < f2.agents(); ++i)
      if (sgn(f2.edge[i][j]) != 0) f2.edge[i][j] *= x;
  }
  for (auto i : S) f2.source[i] *= x;
  return {std::move(p2), std::move(f2)};
}

struct IterationRecord {
  std::size_t iter = 0;
  CandidateName x_name = CandidateName::Max;
  Rational x;
  bool light = true;
  std::size_t S_size = 0;
  std::size_t gamma_size = 0;
  Rational l1;
  Rational l2sq;
  Rational l2sq_after_update;  // ‖r_f'‖² before rebalancing
  TypeCounts types;
  bool network_changed = false;  // N_p differs from the previous iteration's
  std::size_t max_price_bits = 0;
  IndexSet S, gamma;                    // trace level >= 2
  std::vector<Rational> prices, surplus;  // trace level >= 3
};

enum class SolveStatus { Equilibrium, IterationCap };

struct SolveTrace {
  std::vector<IterationRecord> iterations;
  std::size_t iteration_count = 0;
  std::size_t network_changes = 0;
  std::size_t light_iterations = 0;   // x_max iterations classified light
  std::size_t heavy_iterations = 0;   // x_max iterations classified heavy
  Rational final_l2sq;
  SolveStatus status = SolveStatus::Equilibrium;
};

/// Read-only view of one iteration, handed to SolveObserver before the
/// state advances.
struct IterationView {
  std::size_t iter;
  const PriceVector& prices;
  const EqualityNetwork& network;
  const EqualityFlow& flow;  // balanced flow in N_p
  const IterationPlan& plan;
  const PriceVector& next_prices;
  const EqualityFlow& updated_flow;  // f' in N_{p'}
  const IterationRecord* record;     // null at trace level 0
};

using SolveObserver = std::function<void(const IterationView&)>;

struct SolveResult {
  PriceVector prices;
  EqualityFlow flow;
  SolveTrace trace;
  SolveStatus status = SolveStatus::Equilibrium;
  EqualityNetwork network;  // network at the returned prices
};

/// Iterative price-update loop. Runs while ‖r_f‖² > ε², then rounds the
/// terminal prices to an exact equilibrium via the canonical system.
/// Extraction failures propagate as ExtractError.
inline SolveResult solve(const MarketInstance& inst, const SolverConfig& config = {},
                         const SolveObserver& observer = {}) {
  if (auto err = validate_instance(inst)) throw SolverError(SolverError::Kind::InvalidInstance, err->message());
  if (!check_irreducible(inst)) throw SolverError(SolverError::Kind::InvalidInstance, "instance is not irreducible");
  if (config.R < 60) throw std::invalid_argument("R must be at least 60");
  const Rational eps = config.epsilon ? *config.epsilon : default_epsilon(inst);
  if (sgn(eps) <= 0) throw std::invalid_argument("epsilon must be positive");
  const Rational eps_sq = eps * eps;

  const auto n = inst.agents(), m = inst.goods();
  PriceVector p = config.initial_prices ? *config.initial_prices : PriceVector(m, Rational(1));
  if (p.size() != m) throw std::invalid_argument("initial price vector has wrong length");

  SolveResult result;
  SolveTrace& trace = result.trace;
  std::optional<EqualityNetwork> previous;
  std::vector<char> sold(m, 0);  // goods the updated flow left fully sold

  for (std::size_t iter = 0;; ++iter) {
    EqualityNetwork net = build_equality_network(inst, p);
    const bool changed = previous && !previous->same_edges(net);
    if (changed) ++trace.network_changes;
    EqualityFlow f = balanced_flow(net, &sold);
    const auto r = f.agent_surplus(net);
    const Rational l2sq = sum_of_squares(r);

    const bool done = l2sq <= eps_sq;
    const bool capped = !done && config.max_iterations && iter >= *config.max_iterations;
    if (done || capped) {
      trace.iteration_count = iter;
      trace.final_l2sq = l2sq;
      if (capped) {
        trace.status = result.status = SolveStatus::IterationCap;
        result.prices = std::move(p);
        result.flow = std::move(f);
        result.network = std::move(net);
        return result;
      }
      result.prices = extract_equilibrium(inst, p, net);
      result.network = build_equality_network(inst, result.prices);
      result.flow = max_flow(result.network);
      trace.status = result.status = SolveStatus::Equilibrium;
      return result;
    }

    IterationPlan plan = make_plan(inst, net, f, p, config);
    auto [p2, f2] = apply_update(p, f, plan.S, plan.gamma, plan.x, plan.candidates.max);

    if (plan.chosen == CandidateName::Max) (plan.heavy ? trace.heavy_iterations : trace.light_iterations)++;
    if (config.trace_level >= 1) {
      IterationRecord rec;
      rec.iter = iter;
      rec.x_name = plan.chosen;
      rec.x = plan.x;
      rec.light = !plan.heavy;
      rec.S_size = plan.S.size();
      rec.gamma_size = plan.gamma.size();
      rec.l1 = sum(r);
      rec.l2sq = l2sq;
      Rational after = 0;
      for (std::size_t i = 0; i < n; ++i) {
        Rational ri = inst.budget(i, p2) - f2.source[i];
        after += ri * ri;
      }
      rec.l2sq_after_update = after;
      rec.types = plan.counts();
      rec.network_changed = changed;
      for (const auto& pj : p2) rec.max_price_bits = std::max(rec.max_price_bits, bit_size(pj));
      if (config.trace_level >= 2) {
        rec.S = plan.S;
        rec.gamma = plan.gamma;
      }
      if (config.trace_level >= 3) {
        rec.prices = p;
        rec.surplus = r;
      }
      trace.iterations.push_back(std::move(rec));
    }
    if (observer)
      observer(IterationView{iter, p, net, f, plan, p2, f2,
                             config.trace_level >= 1 ? &trace.iterations.back() : nullptr});

    for (std::size_t j = 0; j < m; ++j) sold[j] = f2.sink[j] == inst.value(j, p2);
    p = std::move(p2);
    previous = std::move(net);
  }
}

}  // namespace admarket
