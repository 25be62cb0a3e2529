#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "admarket/market.hpp"
#include "admarket/rational.hpp"

namespace admarket {

class GeneratorError : public std::invalid_argument {
 public:
  enum class Kind { OddN, BadU, TooSmallN, GivingUp, BadParameter };
  GeneratorError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Chain instance: b_i owns g_i; u_{i,i-1} = U, u_{i,i+1} = 1 inside the
/// chain and b_1 values g_1 and g_2 at U. Indices here are 1-based as in
/// the usual description; storage is 0-based.
inline MarketInstance gen_hard_chain(std::size_t n, std::int64_t U) {
  if (n % 2 != 0 || n < 4) throw GeneratorError(GeneratorError::Kind::OddN, "chain size must be even and at least 4");
  if (U < 2) throw GeneratorError(GeneratorError::Kind::BadU, "U must be at least 2");
  IntMatrix u(n, std::vector<std::int64_t>(n, 0)), w(n, std::vector<std::int64_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i) w[i][i] = 1;
  u[0][0] = u[0][1] = U;
  for (std::size_t i = 1; i < n; ++i) {
    u[i][i - 1] = U;
    if (i + 1 < n) u[i][i + 1] = 1;
  }
  return MarketInstance(n, n, std::move(u), std::move(w));
}

/// A small block of the block family: `size` agents owning one good each,
/// the first `high` goods being its high-demand goods.
struct BlockSpec {
  std::size_t i = 0;  // block size (a prime)
  std::size_t j = 0;  // number of high-demand goods
  std::size_t begin = 0;  // first agent index, equal to its first good index
  std::size_t pi_rank = 0;  // 0-based position in the sequence pi

  std::size_t size() const { return i; }
  std::size_t end() const { return begin + i; }
  IndexSet agents() const { return range(begin, begin + i); }
  IndexSet high_demand() const { return range(begin, begin + j); }
  IndexSet low_demand() const { return range(begin + j, begin + i); }
  /// Balanced surplus of the block's agents at unit prices.
  Rational initial_surplus() const { return make_rational(static_cast<long>(i - j), static_cast<long>(i)); }

 private:
  static IndexSet range(std::size_t a, std::size_t b) {
    IndexSet out;
    for (auto x = a; x < b; ++x) out.push_back(x);
    return out;
  }
};

struct BlockInstance {
  MarketInstance instance;
  std::vector<BlockSpec> blocks;  // in pi order
  std::size_t terminal_begin = 0;  // the n-agent terminal block
  std::size_t terminal_size = 0;
};

inline bool is_prime(std::size_t x) {
  if (x < 2) return false;
  for (std::size_t d = 2; d * d <= x; ++d)
    if (x % d == 0) return false;
  return true;
}

/// Block family. One block (i, j) per prime i with i^3 < n and 1 <= j < i,
/// laid out in pi order (decreasing (i - j) / i), followed by a terminal
/// block of n agents.
///
/// The chain between consecutive blocks is read as: the high-demand agents
/// of pi_{k+1} value the high-demand goods of pi_k at 2.
inline BlockInstance gen_hard_blocks(std::size_t n, std::int64_t U) {
  if (U < 2) throw GeneratorError(GeneratorError::Kind::BadU, "U must be at least 2");
  std::vector<BlockSpec> blocks;
  for (std::size_t i = 2; i * i * i < n; ++i)
    if (is_prime(i))
      for (std::size_t j = 1; j < i; ++j) blocks.push_back(BlockSpec{i, j, 0, 0});
  if (blocks.empty()) throw GeneratorError(GeneratorError::Kind::TooSmallN, "n must be at least 9");

  std::stable_sort(blocks.begin(), blocks.end(), [](const BlockSpec& a, const BlockSpec& b) {
    return a.initial_surplus() > b.initial_surplus();
  });
  std::size_t offset = 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    blocks[k].pi_rank = k;
    blocks[k].begin = offset;
    offset += blocks[k].i;
  }
  const std::size_t total = offset + n;
  const std::size_t terminal = offset;

  IntMatrix u(total, std::vector<std::int64_t>(total, 0)), w(total, std::vector<std::int64_t>(total, 0));
  for (std::size_t a = 0; a < total; ++a) w[a][a] = 1;

  for (const auto& b : blocks)
    for (auto l : b.agents())
      for (auto g : b.high_demand()) u[l][g] = 2 * U;

  const auto& first = blocks.front();
  for (auto l : first.high_demand())
    for (const auto& b : blocks)
      for (auto g : b.low_demand()) u[l][g] = 2;

  for (std::size_t k = 0; k + 1 < blocks.size(); ++k)
    for (auto l : blocks[k + 1].high_demand())
      for (auto g : blocks[k].high_demand()) u[l][g] = 2;

  for (std::size_t a = terminal; a < total; ++a) {
    u[a][a] = U;
    u[a][first.begin] = 1;
  }
  for (auto l : first.high_demand())
    for (std::size_t g = terminal; g < total; ++g) u[l][g] = 1;

  return BlockInstance{MarketInstance(total, total, std::move(u), std::move(w)), std::move(blocks), terminal, n};
}

/// Random valid, irreducible instance. Each cell of u (and of w) is
/// positive with probability `density`, drawn uniformly from [1, U]
/// (resp. [1, W]). Uses mt19937_64 with plain modular reduction so the
/// output depends only on the seed, not on the standard library.
inline MarketInstance gen_random(std::size_t n, std::size_t m, std::int64_t U, std::int64_t W, double density,
                                 std::uint64_t seed, std::size_t attempts = 10000) {
  if (n == 0 || m == 0 || U < 1 || W < 1 || !(density > 0.0) || density > 1.0)
    throw GeneratorError(GeneratorError::Kind::BadParameter, "random instance parameters out of range");
  std::mt19937_64 rng(seed);
  auto coin = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 < density; };
  auto pick = [&](std::int64_t hi) { return 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi)); };
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    IntMatrix u(n, std::vector<std::int64_t>(m, 0)), w(n, std::vector<std::int64_t>(m, 0));
    for (auto& row : u)
      for (auto& x : row) x = coin() ? pick(U) : 0;
    for (auto& row : w)
      for (auto& x : row) x = coin() ? pick(W) : 0;
    MarketInstance inst(n, m, std::move(u), std::move(w));
    if (!validate_instance(inst) && check_irreducible(inst)) return inst;
  }
  throw GeneratorError(GeneratorError::Kind::GivingUp, "no valid irreducible instance found");
}

}  // namespace admarket
