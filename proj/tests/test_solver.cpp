#include <gtest/gtest.h>

#include <random>

#include "admarket/instances.hpp"
#include "admarket/oracle.hpp"
#include "admarket/solver.hpp"
#include "test_util.hpp"

using namespace admarket;
using testutil::Q;
using testutil::Qs;

namespace {

SolverConfig desk(Policy policy = Policy::General) {
  SolverConfig c;
  c.policy = policy;
  c.epsilon = Q("1/1000000000000");
  return c;
}

struct ChainState {
  MarketInstance inst;
  PriceVector p;
  EqualityNetwork net;
  EqualityFlow f;
};

ChainState chain_state(const char* p1) {
  ChainState s{gen_hard_chain(6, 2), Qs({p1, p1, "1", "1", "1", "1"}), {}, EqualityFlow(6, 6)};
  s.net = build_equality_network(s.inst, s.p);
  s.f = balanced_flow(s.net);
  return s;
}

}  // namespace

TEST(Select, ChainAtUnitPrices) {
  const auto s = chain_state("1");
  const auto [S, gamma] = select_high_surplus_set(s.inst, s.net, s.f);
  EXPECT_EQ(S, (IndexSet{0, 1, 2}));
  EXPECT_EQ(gamma, (IndexSet{0, 1}));
}

TEST(Select, EqualSurplusesTakeEveryone) {
  const auto net = testutil::make_network(Qs({"1", "1"}), Qs({"1", "1"}), {{0}, {0}});
  const auto inst = testutil::identity_owned({{1, 0}, {1, 1}});
  const auto f = balanced_flow(net);
  EXPECT_EQ(f.agent_surplus(net), Qs({"1/2", "1/2"}));
  EXPECT_EQ(select_high_surplus_set(inst, net, f).first, (IndexSet{0, 1}));
}

TEST(Select, GuardBandAgentWithOutflowExtendsS) {
  const auto inst = testutil::identity_owned({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto net = testutil::make_network(Qs({"1", "1", "1"}), Qs({"1", "1", "1"}), {{0}, {1}, {2}});
  EqualityFlow f(3, 3);
  f.edge[1][1] = f.source[1] = f.sink[1] = Q("1/10");
  f.edge[2][2] = f.source[2] = f.sink[2] = Q("1");
  EXPECT_EQ(f.agent_surplus(net), Qs({"1", "9/10", "0"}));
  const auto [S, gamma] = select_high_surplus_set(inst, net, f);
  EXPECT_EQ(S, (IndexSet{0, 1}));
  EXPECT_EQ(gamma, (IndexSet{0, 1}));
}

TEST(Select, NoSurplusIsAnError) {
  const auto net = testutil::make_network(Qs({"1"}), Qs({"1"}), {{0}});
  const auto inst = MarketInstance(1, 1, {{1}}, {{1}});
  const auto f = balanced_flow(net);
  try {
    select_high_surplus_set(inst, net, f);
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), SolverError::Kind::NoSurplus);
  }
}

TEST(Select, GapRuleIsolatesTheRicherBlock) {
  // five agents sharing one good, three more sharing another
  std::vector<IndexSet> d{{0}, {0}, {0}, {0}, {0}, {1}, {1}, {1}};
  const auto net = testutil::make_network(std::vector<Rational>(8, Rational(1)), Qs({"1", "1"}), d);
  const auto f = balanced_flow(net);
  const auto r = f.agent_surplus(net);
  EXPECT_EQ(r[0], Q("4/5"));
  EXPECT_EQ(r[7], Q("2/3"));
  EXPECT_EQ(r[0] / r[7], Q("6/5"));
  const auto [S, gamma] = select_high_surplus_set_dm(net, f);
  EXPECT_EQ(S, (IndexSet{0, 1, 2, 3, 4}));
  EXPECT_EQ(gamma, (IndexSet{0}));
}

TEST(Classify, ChainAfterFirstNetworkChange) {
  const auto s = chain_state("2");
  SolverConfig cfg;
  const auto plan = make_plan(s.inst, s.net, s.f, s.p, cfg);
  EXPECT_EQ(plan.S, (IndexSet{0, 1, 2, 3, 4}));
  EXPECT_EQ(plan.gamma, (IndexSet{0, 1, 2, 3}));
  std::vector<AgentType> expected{AgentType::T1, AgentType::T1, AgentType::T1,
                                  AgentType::T1, AgentType::T2, AgentType::T4b};
  EXPECT_EQ(plan.types, expected);
  EXPECT_EQ(plan.counts().t3, 0u);
  EXPECT_EQ(plan.k, 4u);
}

TEST(Classify, OwnersOfRaisedGoodsAreTypeThree) {
  // b_2 owns g_1 but is not in S
  const MarketInstance inst(2, 2, {{1, 0}, {0, 1}}, {{0, 1}, {1, 0}});
  const auto net = testutil::make_network(Qs({"1", "1"}), Qs({"1", "1"}), {{0}, {1}});
  EqualityFlow f(2, 2);
  f.edge[1][1] = f.source[1] = f.sink[1] = 1;
  IterationPlan plan;
  plan.S = {0};
  plan.gamma = {0};
  classify_agents(inst, net, f, Qs({"1", "1"}), plan);
  EXPECT_EQ(plan.types[1], AgentType::T3);
  EXPECT_EQ(plan.slopes[1], 1);
  EXPECT_EQ(plan.types[0], AgentType::T2);
}

TEST(Candidates, ChainAtUnitPrices) {
  const auto s = chain_state("1");
  const auto plan = make_plan(s.inst, s.net, s.f, s.p, SolverConfig{});
  ASSERT_TRUE(plan.candidates.eq);
  EXPECT_EQ(*plan.candidates.eq, 2);
  EXPECT_EQ(plan.candidates.max, Q("12961/12960"));
  EXPECT_FALSE(plan.heavy);
  EXPECT_EQ(plan.chosen, CandidateName::Max);
  EXPECT_EQ(plan.x, Q("12961/12960"));
  EXPECT_EQ(*plan.candidates.x2, Q("3/2"));
}

TEST(Candidates, TypeTwoMeetsTypeThree) {
  const auto inst = MarketInstance(2, 2, {{1, 0}, {1, 1}}, {{1, 0}, {0, 1}});
  const auto net = testutil::make_network(Qs({"3", "1"}), Qs({"3", "1"}), {{0}, {1}});
  IterationPlan plan;
  plan.S = {0};
  plan.gamma = {0};
  plan.types = {AgentType::T2, AgentType::T3};
  plan.slopes = {Q("-1"), Q("1")};
  compute_candidates(inst, net, Qs({"1", "1"}), SolverConfig{}, plan, Qs({"3", "1"}));
  ASSERT_TRUE(plan.candidates.x23);
  EXPECT_EQ(*plan.candidates.x23, 2);
  EXPECT_EQ(*plan.candidates.x2, 4);
  EXPECT_FALSE(plan.candidates.eq);
}

TEST(Candidates, DgmCapUsesTypeOneCount) {
  const auto s = chain_state("2");
  const auto plan = make_plan(s.inst, s.net, s.f, s.p, desk(Policy::DGM));
  EXPECT_EQ(plan.candidates.max, 1 + Rational(1, 60 * 4 * 36));
  const auto general = make_plan(s.inst, s.net, s.f, s.p, desk(Policy::General));
  EXPECT_EQ(general.S, plan.S);
  EXPECT_EQ(general.candidates.max, Q("12961/12960"));
}

TEST(Candidates, TieGoesToEarlierName) {
  Candidates c;
  c.max = 2;
  c.x2 = Rational(2);
  c.x24 = Rational(2);
  EXPECT_EQ(c.choose().first, CandidateName::X24);
  c.eq = Rational(3);
  EXPECT_EQ(c.choose().first, CandidateName::X24);
  c.eq = Rational(2);
  EXPECT_EQ(c.choose().first, CandidateName::Eq);
}

TEST(Update, ScalesRaisedGoodsAndTheirBuyers) {
  const auto s = chain_state("1");
  auto [p2, f2] = apply_update(s.p, s.f, {0}, {0}, Rational(2), Rational(2));
  EXPECT_EQ(p2[0], 2 * s.p[0]);
  EXPECT_EQ(f2.sink[0], 2 * s.f.sink[0]);
  EXPECT_EQ(f2.source[0], 2 * s.f.source[0]);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(f2.edge[i][0], 2 * s.f.edge[i][0]);
  for (std::size_t j = 1; j < 6; ++j) EXPECT_EQ(p2[j], s.p[j]);
  EXPECT_EQ(f2.source[1], s.f.source[1]);
}

TEST(Update, RejectsFactorsOutsideRange) {
  const auto s = chain_state("1");
  EXPECT_THROW(apply_update(s.p, s.f, {0}, {0}, Rational(1), Rational(2)), SolverError);
  EXPECT_THROW(apply_update(s.p, s.f, {0}, {0}, Rational(3), Rational(2)), SolverError);
}

TEST(Update, SurplusesMoveLinearlyAndSoldGoodsStaySold) {
  for (const char* p1 : {"1", "2"}) {
    const auto s = chain_state(p1);
    const auto plan = make_plan(s.inst, s.net, s.f, s.p, SolverConfig{});
    const Rational x = 1 + (plan.x - 1) / 2;
    auto [p2, f2] = apply_update(s.p, s.f, plan.S, plan.gamma, x, plan.candidates.max);
    const auto net2 = build_equality_network(s.inst, p2);
    EXPECT_TRUE(is_valid_flow(net2, f2));
    const auto r = s.f.agent_surplus(s.net);
    const auto r2 = f2.agent_surplus(net2);
    for (std::size_t i = 0; i < 6; ++i) {
      if (contains(plan.S, i) || plan.types[i] == AgentType::T3)
        EXPECT_EQ(r2[i], r[i] + (x - 1) * plan.slopes[i]);
      else
        EXPECT_EQ(r2[i], r[i]);
    }
    const auto g = s.f.good_surplus(s.net), g2 = f2.good_surplus(net2);
    for (std::size_t j = 0; j < 6; ++j)
      if (sgn(g[j]) == 0) { EXPECT_EQ(sgn(g2[j]), 0); }
  }
}

TEST(Solve, TrivialMarkets) {
  auto one = solve(MarketInstance(1, 1, {{1}}, {{1}}), desk());
  EXPECT_EQ(one.trace.iteration_count, 0u);
  EXPECT_EQ(one.prices, Qs({"1"}));

  auto sym = solve(testutil::identity_owned({{1, 1}, {1, 1}}), desk());
  EXPECT_EQ(sym.prices, Qs({"1", "1"}));
  EXPECT_EQ(sym.trace.iteration_count, 0u);
}

TEST(Solve, SmallChain) {
  const auto res = solve(gen_hard_chain(4, 2), desk());
  EXPECT_EQ(res.status, SolveStatus::Equilibrium);
  EXPECT_EQ(res.prices, Qs({"2", "2", "1", "1"}));
  EXPECT_TRUE(check_equilibrium(gen_hard_chain(4, 2), res.prices).ok());
  EXPECT_EQ(res.trace.network_changes, 1u);
}

TEST(Solve, IterationCap) {
  auto cfg = desk();
  cfg.max_iterations = 1;
  const auto res = solve(gen_hard_chain(6, 2), cfg);
  EXPECT_EQ(res.status, SolveStatus::IterationCap);
  EXPECT_EQ(res.trace.iteration_count, 1u);
  EXPECT_EQ(res.trace.iterations.size(), 1u);
}

TEST(Solve, RejectsInvalidInputs) {
  try {
    solve(testutil::identity_owned({{1, 0}, {0, 1}}), desk());
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), SolverError::Kind::InvalidInstance);
  }
  auto cfg = desk();
  cfg.R = Q("5911/100");
  EXPECT_THROW(solve(gen_hard_chain(4, 2), cfg), std::invalid_argument);
  cfg = desk();
  cfg.epsilon = Rational(0);
  EXPECT_THROW(solve(gen_hard_chain(4, 2), cfg), std::invalid_argument);
}

TEST(Solve, DefaultEpsilon) {
  EXPECT_EQ(default_epsilon(MarketInstance(1, 1, {{1}}, {{1}})), Q("1/2048"));
  // n+m = 4, UW = 2: 8 * 4^16 * 2^12
  EXPECT_EQ(default_epsilon(testutil::identity_owned({{2, 1}, {1, 1}})), Rational(1, 8) / (Rational(4294967296) * 4096));
}

TEST(Solve, GeneralAndDgmSelectTheSameSets) {
  std::vector<IndexSet> general, dgm;
  auto record = [](std::vector<IndexSet>& out) {
    return [&out](const IterationView& v) { out.push_back(v.plan.S); };
  };
  solve(gen_hard_chain(4, 2), desk(Policy::General), record(general));
  solve(gen_hard_chain(4, 2), desk(Policy::DGM), record(dgm));
  ASSERT_FALSE(general.empty());
  // Step caps differ, so compare the distinct S sequences.
  auto distinct = [](const std::vector<IndexSet>& v) {
    std::vector<IndexSet> out;
    for (const auto& s : v)
      if (out.empty() || out.back() != s) out.push_back(s);
    return out;
  };
  EXPECT_EQ(distinct(general), distinct(dgm));
}

TEST(Solve, RunInvariantsOnRandomInstances) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 12; ++trial) {
    const auto inst = gen_random(2 + rng() % 2, 2 + rng() % 2, 3, 2, 0.7, rng());
    const auto n = inst.agents(), m = inst.goods();
    const auto U = std::max<std::int64_t>(2, inst.max_utility()), W = inst.max_endowment();
    const Rational price_cap = Rational(integer_pow(U, m - 1) * integer_pow(W, 2 * m - 2));
    std::optional<Rational> last_l1;
    std::vector<char> sold(m, 0);
    const auto res = testutil::solve_refining(inst, desk(), [&](const IterationView& v) {
      if (v.iter == 0) {  // a retry starts over
        last_l1.reset();
        sold.assign(m, 0);
      }
      const auto r = v.flow.agent_surplus(v.network);
      const Rational l1 = sum(r);
      EXPECT_LE(l1, Rational(static_cast<long>(n * m * W)));
      if (last_l1) { EXPECT_LE(l1, *last_l1); }
      last_l1 = l1;
      EXPECT_TRUE(std::any_of(v.prices.begin(), v.prices.end(), [](const Rational& x) { return x == 1; }));
      for (const auto& x : v.prices) EXPECT_LE(x, price_cap);
      const auto g = v.flow.good_surplus(v.network);
      for (std::size_t j = 0; j < m; ++j) {
        if (sold[j]) { EXPECT_EQ(sgn(g[j]), 0); }
        if (sgn(g[j]) == 0) sold[j] = 1;
      }
      for (auto j : v.plan.gamma) EXPECT_EQ(sgn(g[j]), 0);
      for (std::size_t i = 0; i < n; ++i)
        if (!contains(v.plan.S, i))
          for (auto j : v.plan.gamma) { EXPECT_EQ(sgn(v.flow.edge[i][j]), 0); }
      const auto next = build_equality_network(inst, v.next_prices);
      const auto rebalanced = balanced_flow(next);
      EXPECT_LE(sum_of_squares(rebalanced.agent_surplus(next)), sum_of_squares(v.updated_flow.agent_surplus(next)));
    });
    EXPECT_TRUE(check_equilibrium(inst, res.prices).ok()) << trial;
  }
}
