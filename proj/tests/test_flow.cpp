#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "admarket/flow.hpp"
#include "admarket/instances.hpp"
#include "test_util.hpp"

using namespace admarket;
using testutil::Q;
using testutil::Qs;

namespace {

// Balanced-flow structure: buyers of a common good share a surplus, and a
// richer admirer never leaves a poorer one's good unbought by it.
void expect_balanced_structure(const EqualityNetwork& net, const EqualityFlow& f) {
  const auto r = f.agent_surplus(net);
  for (std::size_t j = 0; j < net.m; ++j)
    for (std::size_t a = 0; a < net.n; ++a)
      for (std::size_t b = 0; b < net.n; ++b) {
        if (!net.has_edge(a, j) || !net.has_edge(b, j)) continue;
        if (sgn(f.edge[a][j]) > 0 && sgn(f.edge[b][j]) > 0) { EXPECT_EQ(r[a], r[b]); }
        if (r[a] > r[b]) { EXPECT_EQ(sgn(f.edge[b][j]), 0); }
      }
  EXPECT_EQ(sum(r) - sum(f.good_surplus(net)), sum(net.budgets) - sum(net.values));
}

EqualityNetwork permute_agents(const EqualityNetwork& net, const std::vector<std::size_t>& order) {
  EqualityNetwork out = net;
  for (std::size_t k = 0; k < net.n; ++k) {
    out.budgets[k] = net.budgets[order[k]];
    out.demand[k] = net.demand[order[k]];
  }
  return out;
}

EqualityNetwork observation_3_6() {
  // five agents of budget 1 all wanting g_1, g_2; three more goods unwanted
  std::vector<IndexSet> d(5, IndexSet{0, 1});
  return testutil::make_network(std::vector<Rational>(5, Rational(1)), std::vector<Rational>(5, Rational(1)), d);
}

}  // namespace

TEST(MaxFlow, SingleCell) {
  const auto net = build_equality_network(MarketInstance(1, 1, {{1}}, {{1}}), {Rational(1)});
  const auto f = max_flow(net);
  EXPECT_EQ(f.source[0], 1);
  EXPECT_EQ(f.edge[0][0], 1);
  EXPECT_EQ(f.sink[0], 1);
  EXPECT_EQ(f.agent_surplus(net), (std::vector<Rational>{0}));
}

TEST(MaxFlow, ChainAtUnitPricesHasValueFive) {
  const auto net = build_equality_network(gen_hard_chain(6, 2), PriceVector(6, Rational(1)));
  const auto f = max_flow(net);
  EXPECT_EQ(f.value(), 5);
  EXPECT_TRUE(is_valid_flow(net, f));
  EXPECT_TRUE(is_maximum(net, f));
  EXPECT_EQ(f.sink[5], 0);
}

TEST(MaxFlow, ZeroBudgetAgent) {
  const auto net = testutil::make_network({Rational(0), Rational(2)}, {Rational(2)}, {{0}, {0}});
  const auto f = max_flow(net);
  EXPECT_EQ(f.source[0], 0);
  EXPECT_EQ(f.agent_surplus(net)[0], 0);
  EXPECT_EQ(f.value(), 2);
  EXPECT_EQ(balanced_flow(net).agent_surplus(net), (std::vector<Rational>{0, 0}));
}

TEST(BalancedFlow, ChainStageWithFourRaised) {
  const auto inst = gen_hard_chain(6, 2);
  const auto net = build_equality_network(inst, Qs({"2", "2", "1", "1", "1", "1"}));
  const auto f = balanced_flow(net);
  EXPECT_EQ(f.agent_surplus(net), Qs({"1/5", "1/5", "1/5", "1/5", "1/5", "0"}));
  EXPECT_TRUE(is_balanced(net, f));
  expect_balanced_structure(net, f);
}

TEST(BalancedFlow, ChainAtUnitPrices) {
  const auto net = build_equality_network(gen_hard_chain(6, 2), PriceVector(6, Rational(1)));
  const auto f = balanced_flow(net);
  EXPECT_EQ(f.agent_surplus(net), Qs({"1/3", "1/3", "1/3", "0", "0", "0"}));
}

TEST(BalancedFlow, UniformOversubscribedGoods) {
  const auto net = observation_3_6();
  const auto f = balanced_flow(net);
  EXPECT_EQ(f.agent_surplus(net), std::vector<Rational>(5, Q("3/5")));
  EXPECT_TRUE(is_balanced(net, f));
}

TEST(BalancedFlow, SaturatedSourcesGiveZeroSurplus) {
  const auto net = build_equality_network(testutil::identity_owned({{1, 1}, {1, 1}}), Qs({"1", "1"}));
  const auto f = balanced_flow(net);
  EXPECT_EQ(f.agent_surplus(net), Qs({"0", "0"}));
}

TEST(IsBalanced, FigureStateWithAllSurplusOnOneAgent) {
  // k = 4 stage of I_6: every source saturated except b_5, who sends nothing.
  const auto inst = gen_hard_chain(6, 2);
  const auto net = build_equality_network(inst, Qs({"2", "2", "1", "1", "1", "1"}));
  EqualityFlow f(6, 6);
  f.edge[0][1] = 2;  // b_1 -> g_2
  f.edge[1][0] = 2;  // b_2 -> g_1
  f.edge[2][3] = 1;  // b_3 -> g_4
  f.edge[3][2] = 1;  // b_4 -> g_3
  f.edge[5][4] = 1;  // b_6 -> g_5
  f.source = Qs({"2", "2", "1", "1", "0", "1"});
  f.sink = Qs({"2", "2", "1", "1", "1", "0"});
  ASSERT_TRUE(is_valid_flow(net, f));
  EXPECT_TRUE(is_maximum(net, f));
  EXPECT_FALSE(is_balanced(net, f));
  const auto reach = detail::residual_reach_from_agent(net, f, 4);
  EXPECT_TRUE(reach[2]);  // b_5 -> g_4 -> b_3
}

TEST(IsBalanced, ZeroFlowIsNotMaximum) {
  const auto net = observation_3_6();
  EqualityFlow f(5, 5);
  EXPECT_TRUE(is_valid_flow(net, f));
  EXPECT_FALSE(is_maximum(net, f));
  EXPECT_FALSE(is_balanced(net, f));
}

TEST(BalancedFlow, RandomNetworksMatchLpOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t n = 1 + rng() % 5;
    const std::size_t m = 1 + rng() % std::max<std::size_t>(1, 8 - n);
    const auto net = testutil::random_network(rng, n, m);
    const auto f = balanced_flow(net);
    ASSERT_TRUE(is_valid_flow(net, f)) << trial;
    EXPECT_TRUE(is_balanced(net, f)) << trial;
    expect_balanced_structure(net, f);
    EXPECT_EQ(f.value(), max_flow(net).value()) << trial;
    EXPECT_EQ(f.agent_surplus(net), testutil::lp_balanced_surplus(net)) << trial;
  }
}

TEST(BalancedFlow, SurplusIndependentOfAgentOrder) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    const std::size_t m = 1 + rng() % (10 - n);
    const auto net = testutil::random_network(rng, n, m);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto r = balanced_flow(net).agent_surplus(net);
    const auto pnet = permute_agents(net, order);
    const auto pr = balanced_flow(pnet).agent_surplus(pnet);
    for (std::size_t k = 0; k < n; ++k) EXPECT_EQ(pr[k], r[order[k]]) << trial;
  }
}

TEST(BalancedFlow, SurplusSumsDifferByBudgetMinusValue) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = testutil::random_network(rng, 1 + rng() % 5, 1 + rng() % 5);
    const auto f = max_flow(net);
    EXPECT_EQ(sum(f.agent_surplus(net)) - sum(f.good_surplus(net)), sum(net.budgets) - sum(net.values));
    EXPECT_TRUE(is_maximum(net, f));
  }
}

TEST(BalancedFlow, PreferredGoodsAreFilledFirst) {
  const auto net = testutil::make_network(Qs({"1", "1/2"}), Qs({"1", "1", "1"}), {{0, 1}, {1, 2}});
  for (std::size_t want = 0; want < 3; ++want) {
    std::vector<char> prefer(3, 0);
    prefer[want] = 1;
    const auto f = balanced_flow(net, &prefer);
    EXPECT_EQ(f.agent_surplus(net), balanced_flow(net).agent_surplus(net));
    EXPECT_TRUE(is_balanced(net, f));
    if (want != 2) { EXPECT_EQ(f.sink[want], 1); }
  }
}
