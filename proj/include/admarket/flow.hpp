#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

#include "admarket/market.hpp"
#include "admarket/rational.hpp"

namespace admarket {

/// Money flow on an equality network. edge[i][j] is nonzero only on demand
/// edges; source[i] = f_si and sink[j] = f_jt.
struct EqualityFlow {
  std::vector<Rational> source;
  std::vector<Rational> sink;
  std::vector<std::vector<Rational>> edge;

  EqualityFlow() = default;
  EqualityFlow(std::size_t n, std::size_t m)
      : source(n, Rational(0)), sink(m, Rational(0)), edge(n, std::vector<Rational>(m, Rational(0))) {}

  std::size_t agents() const { return source.size(); }
  std::size_t goods() const { return sink.size(); }

  Rational value() const { return sum(source); }

  /// r_f(b_i) = budget_i - f_si
  std::vector<Rational> agent_surplus(const EqualityNetwork& net) const {
    std::vector<Rational> r(net.n);
    for (std::size_t i = 0; i < net.n; ++i) r[i] = net.budgets[i] - source[i];
    return r;
  }

  /// r_f(g_j) = value_j - f_jt
  std::vector<Rational> good_surplus(const EqualityNetwork& net) const {
    std::vector<Rational> r(net.m);
    for (std::size_t j = 0; j < net.m; ++j) r[j] = net.values[j] - sink[j];
    return r;
  }
};

/// Capacity, conservation and support checks, all exact.
inline bool is_valid_flow(const EqualityNetwork& net, const EqualityFlow& f) {
  if (f.agents() != net.n || f.goods() != net.m) return false;
  for (std::size_t i = 0; i < net.n; ++i) {
    Rational out = 0;
    for (std::size_t j = 0; j < net.m; ++j) {
      const auto& x = f.edge[i][j];
      if (sgn(x) < 0) return false;
      if (sgn(x) > 0 && !net.has_edge(i, j)) return false;
      out += x;
    }
    if (out != f.source[i] || sgn(f.source[i]) < 0 || f.source[i] > net.budgets[i]) return false;
  }
  for (std::size_t j = 0; j < net.m; ++j) {
    Rational in = 0;
    for (std::size_t i = 0; i < net.n; ++i) in += f.edge[i][j];
    if (in != f.sink[j] || sgn(f.sink[j]) < 0 || f.sink[j] > net.values[j]) return false;
  }
  return true;
}

namespace detail {

/// Dinic's algorithm over arbitrary-precision integers.
class IntegerMaxFlow {
 public:
  struct Arc {
    std::size_t to;
    std::size_t rev;
    Integer residual;
  };

  explicit IntegerMaxFlow(std::size_t nodes) : adj_(nodes), level_(nodes), cursor_(nodes) {}

  /// Returns a handle (node, position) usable with flow_on().
  std::pair<std::size_t, std::size_t> add_arc(std::size_t from, std::size_t to, const Integer& cap) {
    adj_[from].push_back(Arc{to, adj_[to].size(), cap});
    adj_[to].push_back(Arc{from, adj_[from].size() - 1, Integer(0)});
    return {from, adj_[from].size() - 1};
  }

  Integer run(std::size_t s, std::size_t t) {
    Integer total = 0;
    while (bfs(s, t)) {
      std::fill(cursor_.begin(), cursor_.end(), 0);
      while (true) {
        Integer pushed = push(s, t, nullptr);
        if (pushed == 0) break;
        total += pushed;
      }
    }
    return total;
  }

  /// Flow carried by the arc: the residual of its paired reverse arc.
  const Integer& flow_on(std::pair<std::size_t, std::size_t> handle) const {
    const Arc& a = adj_[handle.first][handle.second];
    return adj_[a.to][a.rev].residual;
  }

  /// Nodes reachable from s through positive-residual arcs.
  std::vector<char> reachable_from(std::size_t s) const {
    std::vector<char> seen(adj_.size(), 0);
    std::queue<std::size_t> todo;
    todo.push(s);
    seen[s] = 1;
    while (!todo.empty()) {
      auto v = todo.front();
      todo.pop();
      for (const auto& a : adj_[v])
        if (!seen[a.to] && sgn(a.residual) > 0) {
          seen[a.to] = 1;
          todo.push(a.to);
        }
    }
    return seen;
  }

  /// Nodes that can reach t through positive-residual arcs without visiting
  /// the node `avoid`.
  std::vector<char> reaching(std::size_t t, std::size_t avoid) const {
    std::vector<char> seen(adj_.size(), 0);
    std::queue<std::size_t> todo;
    todo.push(t);
    seen[t] = 1;
    while (!todo.empty()) {
      auto v = todo.front();
      todo.pop();
      // arc u -> v has positive residual iff adj_[v] contains the reverse
      for (const auto& back : adj_[v]) {
        const Arc& forward = adj_[back.to][back.rev];
        if (back.to == avoid || seen[back.to] || sgn(forward.residual) <= 0) continue;
        seen[back.to] = 1;
        todo.push(back.to);
      }
    }
    return seen;
  }

 private:
  bool bfs(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<std::size_t> todo;
    level_[s] = 0;
    todo.push(s);
    while (!todo.empty()) {
      auto v = todo.front();
      todo.pop();
      for (const auto& a : adj_[v])
        if (level_[a.to] < 0 && sgn(a.residual) > 0) {
          level_[a.to] = level_[v] + 1;
          todo.push(a.to);
        }
    }
    return level_[t] >= 0;
  }

  // limit == nullptr means unbounded
  Integer push(std::size_t v, std::size_t t, const Integer* limit) {
    if (v == t) return limit ? *limit : Integer(0);
    for (; cursor_[v] < adj_[v].size(); ++cursor_[v]) {
      Arc& a = adj_[v][cursor_[v]];
      if (sgn(a.residual) <= 0 || level_[a.to] != level_[v] + 1) continue;
      const Integer& cap = (limit && *limit < a.residual) ? *limit : a.residual;
      Integer got = push(a.to, t, &cap);
      if (sgn(got) > 0) {
        a.residual -= got;
        adj_[a.to][a.rev].residual += got;
        return got;
      }
    }
    return Integer(0);
  }

  std::vector<std::vector<Arc>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> cursor_;
};

/// Scales every capacity of the network to an integer: value * scale.
struct ScaledNetwork {
  Integer scale;
  std::vector<Integer> budgets;
  std::vector<Integer> values;
  Integer infinity;  // exceeds any feasible flow

  ScaledNetwork(const EqualityNetwork& net, const Integer& extra_factor) {
    Integer den = 1;
    for (const auto& b : net.budgets) den = lcm(den, b.get_den());
    for (const auto& v : net.values) den = lcm(den, v.get_den());
    scale = den * extra_factor;
    budgets.reserve(net.n);
    values.reserve(net.m);
    Integer total = 0;
    for (const auto& b : net.budgets) {
      budgets.push_back(b.get_num() * (scale / b.get_den()));
      total += budgets.back();
    }
    for (const auto& v : net.values) values.push_back(v.get_num() * (scale / v.get_den()));
    infinity = total + 1;
  }

  Rational unscale(const Integer& x) const {
    Rational r(x, scale);
    r.canonicalize();
    return r;
  }
};

inline Integer lcm_up_to(std::size_t n) {
  Integer l = 1;
  for (std::size_t k = 2; k <= n; ++k) l = lcm(l, Integer(static_cast<unsigned long>(k)));
  return l;
}

// Node numbering shared by the flow routines.
struct Layout {
  std::size_t n, m;
  std::size_t source() const { return 0; }
  std::size_t agent(std::size_t i) const { return 1 + i; }
  std::size_t good(std::size_t j) const { return 1 + n + j; }
  std::size_t sink() const { return 1 + n + m; }
  std::size_t nodes() const { return 2 + n + m; }
};

}  // namespace detail

/// Exact maximum s-t flow on the equality network.
inline EqualityFlow max_flow(const EqualityNetwork& net) {
  const detail::ScaledNetwork sc(net, Integer(1));
  const detail::Layout L{net.n, net.m};
  detail::IntegerMaxFlow g(L.nodes());
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> handles(net.n);
  for (std::size_t i = 0; i < net.n; ++i) g.add_arc(L.source(), L.agent(i), sc.budgets[i]);
  for (std::size_t j = 0; j < net.m; ++j) g.add_arc(L.good(j), L.sink(), sc.values[j]);
  for (std::size_t i = 0; i < net.n; ++i)
    for (auto j : net.demand[i]) handles[i].push_back(g.add_arc(L.agent(i), L.good(j), sc.infinity));
  g.run(L.source(), L.sink());

  EqualityFlow f(net.n, net.m);
  for (std::size_t i = 0; i < net.n; ++i) {
    Integer out = 0;
    for (std::size_t k = 0; k < net.demand[i].size(); ++k) {
      const auto& x = g.flow_on(handles[i][k]);
      if (sgn(x) == 0) continue;
      f.edge[i][net.demand[i][k]] = sc.unscale(x);
      out += x;
    }
    f.source[i] = sc.unscale(out);
  }
  for (std::size_t j = 0; j < net.m; ++j) {
    Rational in = 0;
    for (std::size_t i = 0; i < net.n; ++i) in += f.edge[i][j];
    f.sink[j] = in;
  }
  return f;
}

/// Maximum flow whose agent-surplus vector has minimum Euclidean norm.
///
/// Level peeling: for the active sub-network, the smallest achievable
/// maximum surplus λ* is found by Dinkelbach iteration. Feasibility of
/// "every surplus ≤ λ" is a max flow with source capacities
/// max(0, budget - λ); on failure the min cut yields an agent set whose
/// average excess is a strictly larger lower bound on λ*. At λ* the agents
/// that cannot reach t in the residual graph (without passing through s)
/// form the top level: they and the goods they demand are frozen and the
/// rest is solved recursively.
///
/// All capacities are scaled by lcm(denominators) * lcm(1..n), which keeps
/// every λ integral in the scaled domain.
///
/// The surplus vector is unique but the split among goods is not. When
/// `prefer` is given (one flag per good), the flow is rerouted so the
/// flagged goods are filled first, which lets a caller keep sold goods sold.
inline EqualityFlow balanced_flow(const EqualityNetwork& net, const std::vector<char>* prefer = nullptr) {
  const auto n = net.n, m = net.m;
  const detail::ScaledNetwork sc(net, detail::lcm_up_to(n));
  const detail::Layout L{n, m};

  std::vector<char> agent_active(n, 1), good_active(m, 1);
  std::vector<std::vector<Integer>> frozen(n, std::vector<Integer>(m, Integer(0)));
  std::size_t remaining = n;

  while (remaining > 0) {
    std::vector<std::size_t> agents;
    for (std::size_t i = 0; i < n; ++i)
      if (agent_active[i]) agents.push_back(i);

    // Solve the active sub-network with source capacities caps[i].
    auto solve = [&](const std::vector<Integer>& caps, detail::IntegerMaxFlow& g,
                     std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& handles) {
      for (auto i : agents) g.add_arc(L.source(), L.agent(i), caps[i]);
      for (std::size_t j = 0; j < m; ++j)
        if (good_active[j]) g.add_arc(L.good(j), L.sink(), sc.values[j]);
      for (auto i : agents)
        for (auto j : net.demand[i])
          if (good_active[j]) handles[i].push_back(g.add_arc(L.agent(i), L.good(j), sc.infinity));
      return g.run(L.source(), L.sink());
    };

    Integer budget_sum = 0;
    for (auto i : agents) budget_sum += sc.budgets[i];

    std::vector<Integer> caps(n, Integer(0));
    for (auto i : agents) caps[i] = sc.budgets[i];
    Integer lambda;
    {
      detail::IntegerMaxFlow g(L.nodes());
      std::vector<std::vector<std::pair<std::size_t, std::size_t>>> handles(n);
      const Integer value = solve(caps, g, handles);
      lambda = (budget_sum - value) / static_cast<unsigned long>(agents.size());
    }

    while (true) {
      Integer cap_sum = 0;
      for (auto i : agents) {
        caps[i] = sc.budgets[i] > lambda ? Integer(sc.budgets[i] - lambda) : Integer(0);
        cap_sum += caps[i];
      }
      detail::IntegerMaxFlow g(L.nodes());
      std::vector<std::vector<std::pair<std::size_t, std::size_t>>> handles(n);
      const Integer value = solve(caps, g, handles);

      if (value != cap_sum) {
        // Infeasible: the source side of a min cut carries too much excess.
        const auto side = g.reachable_from(L.source());
        std::vector<std::size_t> tight;
        for (auto i : agents)
          if (side[L.agent(i)] && sc.budgets[i] > lambda) tight.push_back(i);
        if (tight.empty()) throw std::logic_error("balanced_flow: empty violating set");
        std::vector<char> covered(m, 0);
        Integer excess = 0;
        for (auto i : tight) {
          excess += sc.budgets[i];
          for (auto j : net.demand[i])
            if (good_active[j]) covered[j] = 1;
        }
        for (std::size_t j = 0; j < m; ++j)
          if (covered[j]) excess -= sc.values[j];
        Integer next = excess / static_cast<unsigned long>(tight.size());
        if (next <= lambda) throw std::logic_error("balanced_flow: Dinkelbach step did not increase");
        lambda = next;
        continue;
      }

      // Feasible at λ*: freeze the top level (or everything when λ* = 0).
      std::vector<char> top(n, 0);
      if (sgn(lambda) == 0) {
        for (auto i : agents) top[i] = 1;
      } else {
        const auto reach = g.reaching(L.sink(), L.source());
        bool any = false;
        for (auto i : agents)
          if (!reach[L.agent(i)]) top[i] = any = 1;
        if (!any) throw std::logic_error("balanced_flow: no top level");
      }
      for (auto i : agents) {
        if (!top[i]) continue;
        std::size_t k = 0;
        for (auto j : net.demand[i]) {
          if (!good_active[j]) continue;
          frozen[i][j] = g.flow_on(handles[i][k++]);
        }
      }
      for (auto i : agents)
        if (top[i]) {
          for (auto j : net.demand[i]) good_active[j] = 0;
          agent_active[i] = 0;
          --remaining;
        }
      break;
    }
  }

  if (prefer) {
    // Same source amounts, sink arcs of preferred goods first. Augmenting
    // never lowers a sink flow, so the second phase keeps them filled.
    detail::IntegerMaxFlow g(L.nodes());
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> handles(n);
    for (std::size_t i = 0; i < n; ++i) {
      Integer out = 0;
      for (const auto& x : frozen[i]) out += x;
      g.add_arc(L.source(), L.agent(i), out);
      for (auto j : net.demand[i]) handles[i].push_back(g.add_arc(L.agent(i), L.good(j), sc.infinity));
    }
    for (int phase = 0; phase < 2; ++phase) {
      for (std::size_t j = 0; j < m; ++j)
        if (((*prefer)[j] != 0) == (phase == 0)) g.add_arc(L.good(j), L.sink(), sc.values[j]);
      g.run(L.source(), L.sink());
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(frozen[i].begin(), frozen[i].end(), Integer(0));
      for (std::size_t k = 0; k < net.demand[i].size(); ++k) frozen[i][net.demand[i][k]] = g.flow_on(handles[i][k]);
    }
  }

  // Unscaling needs a gcd against the (possibly huge) scale; most values
  // repeat a budget, a good value or each other, so remember them.
  std::vector<std::pair<Integer, Rational>> known;
  for (std::size_t i = 0; i < n; ++i) known.emplace_back(sc.budgets[i], net.budgets[i]);
  for (std::size_t j = 0; j < m; ++j) known.emplace_back(sc.values[j], net.values[j]);
  auto unscale = [&](const Integer& x) -> Rational {
    if (sgn(x) == 0) return Rational(0);
    for (const auto& [k, v] : known)
      if (k == x) return v;
    known.emplace_back(x, sc.unscale(x));
    return known.back().second;
  };

  EqualityFlow f(n, m);
  std::vector<Integer> into(m, Integer(0));
  for (std::size_t i = 0; i < n; ++i) {
    Integer out = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (sgn(frozen[i][j]) == 0) continue;
      f.edge[i][j] = unscale(frozen[i][j]);
      out += frozen[i][j];
      into[j] += frozen[i][j];
    }
    f.source[i] = unscale(out);
  }
  for (std::size_t j = 0; j < m; ++j) f.sink[j] = unscale(into[j]);
  return f;
}

namespace detail {

// Residual reachability on agents and goods only: agent -> good along every
// demand edge, good -> agent where the edge carries flow.
inline std::vector<char> residual_reach_from_agent(const EqualityNetwork& net, const EqualityFlow& f,
                                                   std::size_t start) {
  std::vector<char> agent_seen(net.n, 0), good_seen(net.m, 0);
  std::queue<std::size_t> todo;
  agent_seen[start] = 1;
  todo.push(start);
  while (!todo.empty()) {
    auto i = todo.front();
    todo.pop();
    for (auto j : net.demand[i]) {
      if (good_seen[j]) continue;
      good_seen[j] = 1;
      for (std::size_t k = 0; k < net.n; ++k)
        if (!agent_seen[k] && sgn(f.edge[k][j]) > 0) {
          agent_seen[k] = 1;
          todo.push(k);
        }
    }
  }
  return agent_seen;
}

}  // namespace detail

/// True iff no augmenting s-t path exists in the residual network.
inline bool is_maximum(const EqualityNetwork& net, const EqualityFlow& f) {
  // Start from agents with residual source capacity and look for a good
  // with residual sink capacity.
  std::vector<char> agent_seen(net.n, 0), good_seen(net.m, 0);
  std::queue<std::size_t> todo;
  for (std::size_t i = 0; i < net.n; ++i)
    if (f.source[i] < net.budgets[i]) {
      agent_seen[i] = 1;
      todo.push(i);
    }
  while (!todo.empty()) {
    auto i = todo.front();
    todo.pop();
    for (auto j : net.demand[i]) {
      if (good_seen[j]) continue;
      good_seen[j] = 1;
      if (f.sink[j] < net.values[j]) return false;
      for (std::size_t k = 0; k < net.n; ++k)
        if (!agent_seen[k] && sgn(f.edge[k][j]) > 0) {
          agent_seen[k] = 1;
          todo.push(k);
        }
    }
  }
  return true;
}

/// Balance certificate: the flow is maximum and the residual graph has no
/// path from an agent to an agent of strictly smaller surplus.
inline bool is_balanced(const EqualityNetwork& net, const EqualityFlow& f) {
  if (!is_maximum(net, f)) return false;
  const auto r = f.agent_surplus(net);
  for (std::size_t i = 0; i < net.n; ++i) {
    const auto seen = detail::residual_reach_from_agent(net, f, i);
    for (std::size_t k = 0; k < net.n; ++k)
      if (seen[k] && r[k] < r[i]) return false;
  }
  return true;
}

}  // namespace admarket
