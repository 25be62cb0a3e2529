#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "admarket/rational.hpp"

namespace admarket {

using IntMatrix = std::vector<std::vector<std::int64_t>>;
using IndexSet = std::vector<std::size_t>;  // sorted, duplicate free
using PriceVector = std::vector<Rational>;

/// Linear exchange market: n agents, m goods, per-unit utilities u and
/// endowments w, both n x m non-negative integer matrices. Indices are
/// zero-based throughout the library.
class MarketInstance {
 public:
  MarketInstance() = default;
  MarketInstance(std::size_t agents, std::size_t goods, IntMatrix utility, IntMatrix endowment)
      : n_(agents), m_(goods), u_(std::move(utility)), w_(std::move(endowment)) {
    auto check = [&](const IntMatrix& mat, const char* name) {
      if (mat.size() != n_) throw std::invalid_argument(std::string(name) + " must have n rows");
      for (const auto& row : mat) {
        if (row.size() != m_) throw std::invalid_argument(std::string(name) + " must have m columns");
        for (auto v : row)
          if (v < 0) throw std::invalid_argument(std::string(name) + " entries must be non-negative");
      }
    };
    if (n_ == 0 || m_ == 0) throw std::invalid_argument("market needs at least one agent and one good");
    check(u_, "u");
    check(w_, "w");
  }

  std::size_t agents() const { return n_; }
  std::size_t goods() const { return m_; }
  std::int64_t u(std::size_t i, std::size_t j) const { return u_[i][j]; }
  std::int64_t w(std::size_t i, std::size_t j) const { return w_[i][j]; }
  const IntMatrix& utility() const { return u_; }
  const IntMatrix& endowment() const { return w_; }

  std::int64_t max_utility() const { return max_entry(u_); }
  std::int64_t max_endowment() const { return max_entry(w_); }

  /// Σ_j w_ij p_j
  Rational budget(std::size_t i, const PriceVector& p) const {
    Rational b = 0;
    for (std::size_t j = 0; j < m_; ++j)
      if (w_[i][j] != 0) b += w_[i][j] * p[j];
    return b;
  }

  /// Σ_i w_ij p_j
  Rational value(std::size_t j, const PriceVector& p) const {
    std::int64_t units = 0;
    for (std::size_t i = 0; i < n_; ++i) units += w_[i][j];
    return units * p[j];
  }

  bool operator==(const MarketInstance&) const = default;

 private:
  static std::int64_t max_entry(const IntMatrix& mat) {
    std::int64_t best = 0;
    for (const auto& row : mat)
      for (auto v : row) best = std::max(best, v);
    return best;
  }

  std::size_t n_ = 0;
  std::size_t m_ = 0;
  IntMatrix u_;
  IntMatrix w_;
};

struct ValidationError {
  enum class Kind { AgentLikesNothing, GoodLikedByNobody, GoodUnowned };
  Kind kind;
  std::size_t index;

  std::string message() const {
    switch (kind) {
      case Kind::AgentLikesNothing: return "agent b_" + std::to_string(index + 1) + " likes no good";
      case Kind::GoodLikedByNobody: return "good g_" + std::to_string(index + 1) + " is liked by no agent";
      case Kind::GoodUnowned: return "good g_" + std::to_string(index + 1) + " has zero total supply";
    }
    return "invalid market";
  }

  bool operator==(const ValidationError&) const = default;
};

/// Returns the first violated instance invariant, agents checked before goods.
inline std::optional<ValidationError> validate_instance(const MarketInstance& inst) {
  const auto n = inst.agents(), m = inst.goods();
  for (std::size_t i = 0; i < n; ++i) {
    bool likes = false;
    for (std::size_t j = 0; j < m && !likes; ++j) likes = inst.u(i, j) > 0;
    if (!likes) return ValidationError{ValidationError::Kind::AgentLikesNothing, i};
  }
  for (std::size_t j = 0; j < m; ++j) {
    bool liked = false, owned = false;
    for (std::size_t i = 0; i < n; ++i) {
      liked = liked || inst.u(i, j) > 0;
      owned = owned || inst.w(i, j) > 0;
    }
    if (!liked) return ValidationError{ValidationError::Kind::GoodLikedByNobody, j};
    if (!owned) return ValidationError{ValidationError::Kind::GoodUnowned, j};
  }
  return std::nullopt;
}

/// Interest digraph on agents: i -> k (i != k) iff b_i likes a good that b_k
/// partially owns. A nonempty proper agent set interested only in goods it
/// owns outright is exactly a set closed under these edges, so the market
/// is irreducible iff the digraph is strongly connected.
inline bool check_irreducible(const MarketInstance& inst) {
  const auto n = inst.agents(), m = inst.goods();
  std::vector<std::vector<char>> edge(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (inst.u(i, j) <= 0) continue;
      for (std::size_t k = 0; k < n; ++k)
        if (k != i && inst.w(k, j) > 0) edge[i][k] = 1;
    }
  auto reaches_all = [&](bool reverse) {
    std::vector<char> seen(n, 0);
    std::queue<std::size_t> todo;
    todo.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!todo.empty()) {
      const auto a = todo.front();
      todo.pop();
      for (std::size_t b = 0; b < n; ++b) {
        const bool e = reverse ? edge[b][a] : edge[a][b];
        if (e && !seen[b]) {
          seen[b] = 1;
          ++count;
          todo.push(b);
        }
      }
    }
    return count == n;
  };
  return reaches_all(false) && reaches_all(true);
}

/// Flow network N_p: s -> b_i with the agent budget, g_j -> t with the good
/// value, and uncapacitated b_i -> g_j on maximum bang-for-buck pairs.
struct EqualityNetwork {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<Rational> budgets;
  std::vector<Rational> values;
  std::vector<IndexSet> demand;  // demand[i] = goods adjacent to agent i

  bool has_edge(std::size_t i, std::size_t j) const {
    return std::binary_search(demand[i].begin(), demand[i].end(), j);
  }

  std::size_t edge_count() const {
    std::size_t c = 0;
    for (const auto& d : demand) c += d.size();
    return c;
  }

  /// Agents adjacent to good j.
  IndexSet admirers(std::size_t j) const {
    IndexSet out;
    for (std::size_t i = 0; i < n; ++i)
      if (has_edge(i, j)) out.push_back(i);
    return out;
  }

  bool same_edges(const EqualityNetwork& other) const { return demand == other.demand; }
};

/// Compares u_a / p_a against u_b / p_b without division.
/// Returns <0, 0, >0 like a three-way comparison.
inline int compare_bang_per_buck(std::int64_t ua, const Rational& pa, std::int64_t ub, const Rational& pb) {
  // ua/pa ? ub/pb  <=>  ua*pb ? ub*pa   (prices positive)
  Integer lhs = Integer(static_cast<long>(ua)) * pb.get_num() * pa.get_den();
  Integer rhs = Integer(static_cast<long>(ub)) * pa.get_num() * pb.get_den();
  return cmp(lhs, rhs);
}

inline EqualityNetwork build_equality_network(const MarketInstance& inst, const PriceVector& p) {
  const auto n = inst.agents(), m = inst.goods();
  if (p.size() != m) throw std::invalid_argument("price vector has wrong length");
  for (const auto& pj : p)
    if (sgn(pj) <= 0) throw std::invalid_argument("prices must be positive");

  EqualityNetwork net;
  net.n = n;
  net.m = m;
  net.budgets.resize(n);
  net.values.resize(m);
  net.demand.resize(n);
  for (std::size_t i = 0; i < n; ++i) net.budgets[i] = inst.budget(i, p);
  for (std::size_t j = 0; j < m; ++j) net.values[j] = inst.value(j, p);

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = m;
    for (std::size_t j = 0; j < m; ++j) {
      if (inst.u(i, j) <= 0) continue;
      if (best == m) {
        best = j;
        net.demand[i].push_back(j);
        continue;
      }
      const int c = compare_bang_per_buck(inst.u(i, j), p[j], inst.u(i, best), p[best]);
      if (c > 0) {
        best = j;
        net.demand[i].assign(1, j);
      } else if (c == 0) {
        net.demand[i].push_back(j);
      }
    }
  }
  return net;
}

/// Γ(agents): goods reachable by one demand edge.
inline IndexSet neighborhood(const EqualityNetwork& net, const IndexSet& agents) {
  std::vector<char> mark(net.m, 0);
  for (auto i : agents)
    for (auto j : net.demand[i]) mark[j] = 1;
  IndexSet out;
  for (std::size_t j = 0; j < net.m; ++j)
    if (mark[j]) out.push_back(j);
  return out;
}

inline IndexSet all_indices(std::size_t count) {
  IndexSet out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = k;
  return out;
}

inline bool contains(const IndexSet& set, std::size_t x) { return std::binary_search(set.begin(), set.end(), x); }

}  // namespace admarket
