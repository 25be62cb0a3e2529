// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "admarket/extract.hpp"
#include "admarket/flow.hpp"
#include "admarket/instances.hpp"
#include "admarket/market.hpp"
#include "admarket/oracle.hpp"
#include "admarket/reduce.hpp"
#include "admarket/solver.hpp"

using namespace admarket;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (notes.size() < 8) notes.push_back(what);
    }
  }
};

Rational desk_epsilon() { return parse_rational("1/1000000000000"); }

/// Checks the run-long invariants on every iteration of every solve it is
/// attached to. Violations accumulate until report time.
class InvariantMonitor {
 public:
  struct Run {
    InvariantMonitor* owner;
    const MarketInstance* inst;
    Rational l1_cap, price_cap;
    std::optional<Rational> last_l1, pending_l2sq;
    std::vector<char> sold;

    void operator()(const IterationView& v) {
      auto& vr = owner->verdict_;
      const auto r = v.flow.agent_surplus(v.network);
      const Rational l1 = sum(r);
      const Rational l2sq = sum_of_squares(r);
      const std::string at = " at iteration " + std::to_string(v.iter);
      vr.require(l1 <= l1_cap, "L1 surplus above nmW" + at);
      if (last_l1) vr.require(l1 <= *last_l1, "L1 surplus increased" + at);
      last_l1 = l1;
      vr.require(std::any_of(v.prices.begin(), v.prices.end(), [](const Rational& x) { return x == 1; }),
                 "no unit price" + at);
      for (const auto& x : v.prices) vr.require(x <= price_cap, "price above cap" + at);
      if (pending_l2sq) vr.require(l2sq <= *pending_l2sq, "rebalancing increased the L2 norm" + at);
      pending_l2sq.reset();
      if (v.record) pending_l2sq = v.record->l2sq_after_update;
      const auto g = v.flow.good_surplus(v.network);
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (sold[j]) vr.require(sgn(g[j]) == 0, "a sold good regained surplus" + at);
        if (sgn(g[j]) == 0) sold[j] = 1;
      }
      ++owner->iterations_;
    }

    void finish(const SolveResult& res) {
      if (pending_l2sq && res.status == SolveStatus::Equilibrium)
        owner->verdict_.require(res.trace.final_l2sq <= *pending_l2sq, "rebalancing increased the L2 norm at exit");
    }
  };

  Run start(const MarketInstance& inst) {
    ++solves_;
    const auto n = static_cast<long>(inst.agents()), m = static_cast<long>(inst.goods());
    const auto W = static_cast<long>(inst.max_endowment());
    const auto U = std::max<long>(2, static_cast<long>(inst.max_utility()));
    Run run{this, &inst, Rational(n * m * W),
            Rational(integer_pow(U, static_cast<unsigned long>(m - 1)) *
                     integer_pow(W, static_cast<unsigned long>(2 * m - 2))),
            {}, {}, std::vector<char>(inst.goods(), 0)};
    return run;
  }

  const Verdict& verdict() const { return verdict_; }
  std::size_t solves() const { return solves_; }
  std::size_t iterations() const { return iterations_; }

 private:
  Verdict verdict_;
  std::size_t solves_ = 0, iterations_ = 0;
};

InvariantMonitor monitor;

/// Solve with the invariant monitor plus an optional extra observer.
SolveResult traced_solve(const MarketInstance& inst, const SolverConfig& cfg, const SolveObserver& extra = {}) {
  auto run = monitor.start(inst);
  auto res = solve(inst, cfg, [&](const IterationView& v) {
    run(v);
    if (extra) extra(v);
  });
  run.finish(res);
  return res;
}

/// Coarse epsilon first, tightened only while extraction fails to certify.
/// Near some limit points each step doubles the price bit size, so a tiny
/// epsilon can be out of reach while a coarse one already fixes the
/// equilibrium network. The prices returned are exact either way.
SolveResult refining_solve(const MarketInstance& inst, Policy policy) {
  SolverConfig cfg;
  cfg.policy = policy;
  for (unsigned long digits = 3;; digits += 3) {
    cfg.epsilon = Rational(Integer(1), integer_pow(10, digits));
    try {
      return traced_solve(inst, cfg);
    } catch (const ExtractError&) {
      if (digits >= 12) throw;
    }
  }
}

SolverConfig config(Policy policy, std::optional<Rational> eps = desk_epsilon()) {
  SolverConfig c;
  c.policy = policy;
  c.epsilon = std::move(eps);
  return c;
}

std::string show(const PriceVector& p) {
  std::string s = "(";
  for (std::size_t j = 0; j < p.size(); ++j) s += (j ? "," : "") + to_fraction_string(p[j]);
  return s + ")";
}

/// What the policy-separation check needs from a chain solve.
struct ChainRun {
  std::size_t n = 0;
  std::int64_t U = 0;
  Policy policy = Policy::General;
  SolveResult result;
  std::vector<std::size_t> S_sizes;  // per iteration
  std::vector<char> changed;         // network differs from the previous iteration
  std::size_t type3 = 0;
  double seconds = 0;
};

ChainRun run_chain(std::size_t n, std::int64_t U, Policy policy) {
  ChainRun out;
  out.n = n;
  out.U = U;
  out.policy = policy;
  const auto inst = gen_hard_chain(n, U);
  const auto t0 = Clock::now();
  out.result = traced_solve(inst, config(policy), [&](const IterationView& v) {
    out.S_sizes.push_back(v.plan.S.size());
    out.changed.push_back(v.record && v.record->network_changed);
    out.type3 += v.plan.counts().t3;
  });
  out.seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------

Verdict criterion_chain(const std::vector<ChainRun>& runs) {
  Verdict v;
  for (const auto& run : runs) {
    const std::string tag = "I_" + std::to_string(run.n) + " U=" + std::to_string(run.U);
    const auto inst = gen_hard_chain(run.n, run.U);
    v.require(run.result.status == SolveStatus::Equilibrium, tag + " did not terminate");
    v.require(check_equilibrium(inst, run.result.prices).ok(), tag + " prices not certified");
    const auto& p = run.result.prices;
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    const Rational expected(integer_pow(run.U, run.n / 2 - 1));
    v.require(*hi / *lo == expected, tag + " ratio " + to_fraction_string(*hi / *lo));
    v.notes.push_back(tag + " " + show(p) + " in " + std::to_string(run.result.trace.iteration_count) +
                      " iterations, " + std::to_string(static_cast<long>(run.seconds)) + "s");
  }
  return v;
}

Verdict criterion_oracle() {
  Verdict v;
  std::mt19937_64 rng(20240611);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = 1 + rng() % 3, m = 1 + rng() % 3;
    const auto U = static_cast<std::int64_t>(1 + rng() % 3), W = static_cast<std::int64_t>(1 + rng() % 3);
    const auto inst = gen_random(n, m, U, W, 0.6, rng());
    const std::string tag = "trial " + std::to_string(trial);
    try {
      const auto res = refining_solve(inst, Policy::General);
      const auto oracle = oracle_equilibrium(inst);
      v.require(equal_up_to_scaling(res.prices, oracle.prices),
                tag + ": solver " + show(normalize_min_one(res.prices)) + " oracle " +
                    show(normalize_min_one(oracle.prices)));
      ++checked;
    } catch (const std::exception& e) {
      v.require(false, tag + ": " + e.what());
    }
  }
  v.require(checked >= 50, "fewer than 50 instances compared");
  v.notes.push_back(std::to_string(checked) + " instances compared");
  return v;
}

EqualityNetwork random_network(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  auto val = [&] { return make_rational(static_cast<long>(1 + rng() % 6), static_cast<long>(1 + rng() % 4)); };
  EqualityNetwork net;
  net.n = n;
  net.m = m;
  net.budgets.resize(n);
  net.values.resize(m);
  for (auto& x : net.budgets) x = val();
  for (auto& x : net.values) x = val();
  net.demand.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j)
      if (rng() % 3 == 0) net.demand[i].push_back(j);
    if (net.demand[i].empty()) net.demand[i].push_back(rng() % m);
  }
  return net;
}

Verdict criterion_balanced() {
  Verdict v;
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t total = 2 + rng() % 9;  // n + m in [2, 10]
    const std::size_t n = 1 + rng() % (total - 1), m = total - n;
    const auto net = random_network(rng, n, m);
    const auto f = balanced_flow(net);
    const std::string tag = "network " + std::to_string(trial);
    v.require(is_balanced(net, f), tag + " not balanced");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    EqualityNetwork shuffled = net;
    for (std::size_t i = 0; i < n; ++i) {
      shuffled.budgets[i] = net.budgets[perm[i]];
      shuffled.demand[i] = net.demand[perm[i]];
    }
    const auto r = f.agent_surplus(net);
    const auto g = balanced_flow(shuffled);
    const auto r2 = g.agent_surplus(shuffled);
    bool same = true;
    for (std::size_t i = 0; i < n; ++i) same = same && r2[i] == r[perm[i]];
    v.require(same, tag + " surplus depends on agent order");
    ++checked;
  }
  v.notes.push_back(std::to_string(checked) + " networks");
  return v;
}

Verdict criterion_states() {
  Verdict v;
  for (std::int64_t U : {2, 3}) {
    const auto inst = gen_hard_chain(6, U);
    const Rational u(static_cast<long>(U));
    const auto net = build_equality_network(inst, {u, u, 1, 1, 1, 1});
    const auto r = balanced_flow(net).agent_surplus(net);
    const Rational fifth(1, 5);
    v.require(r == std::vector<Rational>{fifth, fifth, fifth, fifth, fifth, 0},
              "I_6 at (U,U,1,1,1,1), U=" + std::to_string(U) + ": " + show(r));
  }
  for (auto [n, m] : {std::pair<std::size_t, std::size_t>{5, 2}, {6, 3}, {7, 4}, {4, 1}}) {
    // n unit-budget agents all wanting the first m of n unit-value goods
    EqualityNetwork net;
    net.n = net.m = n;
    net.budgets.assign(n, Rational(1));
    net.values.assign(n, Rational(1));
    IndexSet first;
    for (std::size_t j = 0; j < m; ++j) first.push_back(j);
    net.demand.assign(n, first);
    const auto r = balanced_flow(net).agent_surplus(net);
    const Rational expected = make_rational(static_cast<long>(n - m), static_cast<long>(n));
    v.require(r == std::vector<Rational>(n, expected),
              "uniform network n=" + std::to_string(n) + " m=" + std::to_string(m) + ": " + show(r));
  }
  return v;
}

Verdict criterion_invariants() {
  Verdict v = monitor.verdict();
  v.require(monitor.iterations() > 0, "no iterations observed");
  v.notes.push_back(std::to_string(monitor.solves()) + " solves, " + std::to_string(monitor.iterations()) +
                    " iterations checked");
  return v;
}

/// Stage k (between network changes) must keep one S size, and the size
/// grows by two from stage to stage.
void check_chain_separation(Verdict& v, const ChainRun& run) {
  const std::string tag = std::string(policy_name(run.policy)) + " I_" + std::to_string(run.n);
  const auto changes = run.result.trace.network_changes;
  v.require(changes == run.n / 2 - 1, tag + " had " + std::to_string(changes) + " network changes");
  v.require(run.type3 == 0, tag + " saw type-3 agents");
  std::vector<std::vector<std::size_t>> stages(1);
  for (std::size_t t = 0; t < run.S_sizes.size(); ++t) {
    if (run.changed[t]) stages.emplace_back();
    stages.back().push_back(run.S_sizes[t]);
  }
  std::string sizes;
  std::optional<std::size_t> previous;
  for (const auto& stage : stages) {
    if (stage.empty()) continue;
    const bool constant = std::all_of(stage.begin(), stage.end(), [&](auto s) { return s == stage.front(); });
    v.require(constant, tag + " S changed within a stage");
    if (previous) v.require(stage.front() == *previous + 2, tag + " S did not grow by two");
    previous = stage.front();
    sizes += (sizes.empty() ? "" : "->") + std::to_string(stage.front());
  }
  v.notes.push_back(tag + ": " + std::to_string(changes) + " changes, |S| " + sizes);
}

/// Block family under DM. Stage s starts from the state the analysis
/// describes: high-demand goods of earlier blocks at U^k, those of block s
/// three x_max steps below U^s, everything else at 1. Each iteration's Γ(S)
/// must lie inside one block's high-demand goods, and the blocks must
/// appear in windows s then s+1.
void check_block_windows(Verdict& v) {
  const std::int64_t U = 2;
  const auto family = gen_hard_blocks(28, U);
  const auto& inst = family.instance;
  const auto N = inst.agents();
  const auto& blocks = family.blocks;
  SolverConfig cfg = config(Policy::DM);
  const Rational nr(static_cast<long>(N));
  const Rational x_max = 1 + 1 / (cfg.R * nr * nr * nr);
  const std::size_t lead = 3, tail = 3;

  std::string summary;
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    PriceVector p(N, Rational(1));
    for (std::size_t k = 0; k <= s; ++k)
      for (auto g : blocks[k].high_demand()) p[g] = Rational(integer_pow(U, k + 1));
    for (auto g : blocks[s].high_demand()) p[g] /= rational_pow(x_max, lead);

    std::vector<long> labels;
    cfg.initial_prices = p;
    cfg.max_iterations = lead + 1 + tail;
    traced_solve(inst, cfg, [&](const IterationView& view) {
      long label = -1;
      for (const auto& b : blocks) {
        const auto high = b.high_demand();
        if (!view.plan.gamma.empty() &&
            std::includes(high.begin(), high.end(), view.plan.gamma.begin(), view.plan.gamma.end()))
          label = static_cast<long>(b.pi_rank);
      }
      labels.push_back(label);
    });

    std::string seq;
    for (auto l : labels) seq += l < 0 ? "x" : std::to_string(l + 1);
    summary += (summary.empty() ? "" : " | ") + seq;
    const std::string tag = "blocks stage " + std::to_string(s + 1) + " [" + seq + "]";
    // the lead steps belong to block s, the last one landing on the new edge
    for (std::size_t t = 0; t < labels.size() && t < lead; ++t)
      v.require(labels[t] == static_cast<long>(s), tag + " left block " + std::to_string(s + 1) + " early");
    if (s + 1 < blocks.size()) {
      v.require(labels.size() > lead, tag + " stopped before the next block");
      for (std::size_t t = lead; t < labels.size(); ++t)
        v.require(labels[t] == static_cast<long>(s + 1), tag + " did not move on to block " + std::to_string(s + 2));
    }
  }
  v.notes.push_back("DM block windows " + summary);
}

Verdict criterion_separation(const std::vector<ChainRun>& general_runs) {
  Verdict v;
  for (const auto& run : general_runs)
    if (run.U == 2) check_chain_separation(v, run);
  for (std::size_t n : {4, 6}) check_chain_separation(v, run_chain(n, 2, Policy::DGM));
  check_block_windows(v);
  return v;
}

Verdict criterion_reduction() {
  Verdict v;
  std::mt19937_64 rng(4242);
  int tried = 0, certified = 0, attempts = 0;
  while (tried < 24 && attempts < 200) {
    ++attempts;
    const auto n = 1 + rng() % 3, m = 1 + rng() % 3;
    const auto inst = gen_random(n, m, 2, 2, 0.6, rng());
    bool general = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t owned = 0;
      for (std::size_t j = 0; j < m; ++j) owned += inst.w(i, j) > 0;
      general = general || owned != 1 || n != m;
    }
    if (!general) continue;
    // Cost grows steeply with the special market's size through price bit
    // growth; five copies already take minutes each.
    const auto special = to_special(inst);
    if (special.pairs.size() > 4) continue;
    const std::string tag = "instance " + std::to_string(attempts);
    ++tried;
    try {
      const auto res = refining_solve(special.instance, Policy::General);
      const auto lift = lift_solution(inst, special, res.prices, res.flow.edge);
      const bool ok = check_equilibrium(inst, lift.prices, &lift.flow).ok();
      v.require(ok, tag + " lift not certified");
      certified += ok;
    } catch (const std::exception& e) {
      v.require(false, tag + ": " + e.what());
    }
  }
  v.require(certified >= 20, "fewer than 20 certified round trips");
  v.notes.push_back(std::to_string(certified) + " of " + std::to_string(tried) + " round trips certified");
  return v;
}

Verdict criterion_full_epsilon() {
  Verdict v;
  std::mt19937_64 rng(99);
  const std::vector<std::pair<std::size_t, std::size_t>> shapes{
      {1, 1}, {1, 2}, {2, 1}, {2, 2}, {2, 3}, {3, 2}, {1, 4}, {4, 1}, {2, 2}, {2, 3}, {3, 2}, {2, 3}, {3, 2}};
  for (const auto& [n, m] : shapes) {
    const auto inst = gen_random(n, m, 2, 2, 0.7, rng());
    const std::string tag = std::to_string(n) + "x" + std::to_string(m);
    const auto t0 = Clock::now();
    try {
      const auto res = traced_solve(inst, config(Policy::General, std::nullopt));
      v.require(res.status == SolveStatus::Equilibrium, tag + " did not terminate");
      v.require(check_equilibrium(inst, res.prices).ok(), tag + " not certified");
      std::size_t bits = 0;
      for (const auto& it : res.trace.iterations) bits = std::max(bits, it.max_price_bits);
      std::ostringstream note;
      note << tag << ": " << res.trace.iteration_count << " iterations, " << bits << " price bits, "
           << static_cast<long>(seconds_since(t0)) << "s";
      v.notes.push_back(note.str());
    } catch (const std::exception& e) {
      v.require(false, tag + ": " + e.what());
    }
  }
  return v;
}

bool report(int number, const char* name, const std::function<Verdict()>& body) {
  const auto t0 = Clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  std::printf("criterion %d %-28s %s (%.1fs)\n", number, name, v.pass ? "PASS" : "FAIL", seconds_since(t0));
  for (const auto& note : v.notes) std::printf("    %s\n", note.c_str());
  std::fflush(stdout);
  return v.pass;
}

}  // namespace

int main() {
  bool ok = true;
  std::vector<ChainRun> chain_runs;
  ok &= report(1, "chain price ratio", [&] {
    for (auto [n, U] : {std::pair<std::size_t, std::int64_t>{4, 2}, {4, 3}, {6, 2}})
      chain_runs.push_back(run_chain(n, U, Policy::General));
    return criterion_chain(chain_runs);
  });
  ok &= report(2, "oracle agreement", criterion_oracle);
  ok &= report(3, "balanced-flow certificate", criterion_balanced);
  ok &= report(4, "surplus regressions", criterion_states);
  ok &= report(6, "policy separation", [&] { return criterion_separation(chain_runs); });
  ok &= report(7, "reduction round trip", criterion_reduction);
  ok &= report(8, "full-epsilon termination", criterion_full_epsilon);
  // last, so it covers every traced solve above
  ok &= report(5, "run-long invariants", criterion_invariants);
  return ok ? 0 : 1;
}
