#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "admarket/rational.hpp"

namespace admarket {

/// maximize c·x  subject to  rows (=, <=, >=)  and  x >= 0.
struct LinearProgram {
  enum class Sense { Eq, Le, Ge };
  struct Row {
    std::vector<Rational> coeffs;
    Sense sense;
    Rational rhs;
  };

  std::size_t variables = 0;
  std::vector<Row> rows;
  std::vector<Rational> objective;

  explicit LinearProgram(std::size_t vars) : variables(vars), objective(vars, Rational(0)) {}

  void add(std::vector<Rational> coeffs, Sense sense, Rational rhs) {
    if (coeffs.size() != variables) throw std::invalid_argument("row has wrong width");
    rows.push_back(Row{std::move(coeffs), sense, std::move(rhs)});
  }
};

struct LpSolution {
  enum class Status { Optimal, Infeasible, Unbounded };
  Status status = Status::Infeasible;
  Rational value;
  std::vector<Rational> x;
};

/// Dense two-phase tableau simplex with Bland's rule; exact.
inline LpSolution solve_lp(const LinearProgram& lp) {
  const std::size_t nv = lp.variables;
  const std::size_t nr = lp.rows.size();

  // Column layout: structural | slack/surplus | artificial | rhs
  std::size_t slack_count = 0;
  for (const auto& r : lp.rows)
    if (r.sense != LinearProgram::Sense::Eq) ++slack_count;
  const std::size_t art_begin = nv + slack_count;
  const std::size_t cols = art_begin + nr;  // one artificial per row
  const std::size_t rhs = cols;

  std::vector<std::vector<Rational>> t(nr, std::vector<Rational>(cols + 1, Rational(0)));
  std::vector<std::size_t> basis(nr);
  std::size_t slack = nv;
  for (std::size_t i = 0; i < nr; ++i) {
    const auto& row = lp.rows[i];
    for (std::size_t j = 0; j < nv; ++j) t[i][j] = row.coeffs[j];
    t[i][rhs] = row.rhs;
    if (row.sense == LinearProgram::Sense::Le) t[i][slack++] = 1;
    if (row.sense == LinearProgram::Sense::Ge) t[i][slack++] = -1;
    if (sgn(t[i][rhs]) < 0)
      for (auto& v : t[i]) v = -v;
    t[i][art_begin + i] = 1;
    basis[i] = art_begin + i;
  }

  auto pivot = [&](std::size_t pr, std::size_t pc) {
    const Rational inv = 1 / t[pr][pc];
    for (auto& v : t[pr]) v *= inv;
    for (std::size_t i = 0; i < nr; ++i) {
      if (i == pr || sgn(t[i][pc]) == 0) continue;
      const Rational factor = t[i][pc];
      for (std::size_t j = 0; j <= cols; ++j)
        if (sgn(t[pr][j]) != 0) t[i][j] -= factor * t[pr][j];
    }
    basis[pr] = pc;
  };

  // Maximizes cost·x over columns < limit. Returns false if unbounded.
  auto run = [&](const std::vector<Rational>& cost, std::size_t limit) {
    while (true) {
      std::size_t enter = limit;
      for (std::size_t j = 0; j < limit && enter == limit; ++j) {
        Rational reduced = cost[j];
        for (std::size_t i = 0; i < nr; ++i)
          if (sgn(t[i][j]) != 0) reduced -= cost[basis[i]] * t[i][j];
        if (sgn(reduced) > 0) enter = j;
      }
      if (enter == limit) return true;
      std::size_t leave = nr;
      Rational best;
      for (std::size_t i = 0; i < nr; ++i) {
        if (sgn(t[i][enter]) <= 0) continue;
        Rational ratio = t[i][rhs] / t[i][enter];
        if (leave == nr || ratio < best || (ratio == best && basis[i] < basis[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave == nr) return false;
      pivot(leave, enter);
    }
  };

  std::vector<Rational> phase1(cols, Rational(0));
  for (std::size_t j = art_begin; j < cols; ++j) phase1[j] = -1;
  run(phase1, cols);
  Rational infeasibility = 0;
  for (std::size_t i = 0; i < nr; ++i)
    if (basis[i] >= art_begin) infeasibility += t[i][rhs];
  LpSolution out;
  if (sgn(infeasibility) != 0) return out;

  // Drive remaining zero-level artificials out of the basis where possible.
  for (std::size_t i = 0; i < nr; ++i) {
    if (basis[i] < art_begin) continue;
    for (std::size_t j = 0; j < art_begin; ++j)
      if (sgn(t[i][j]) != 0) {
        pivot(i, j);
        break;
      }
  }
  // Rows whose artificial stays basic are redundant; zero them out of play.
  for (std::size_t i = 0; i < nr; ++i)
    if (basis[i] >= art_begin)
      for (std::size_t j = 0; j < art_begin; ++j) t[i][j] = 0;

  std::vector<Rational> cost(cols, Rational(0));
  for (std::size_t j = 0; j < nv; ++j) cost[j] = lp.objective[j];
  if (!run(cost, art_begin)) {
    out.status = LpSolution::Status::Unbounded;
    return out;
  }
  out.status = LpSolution::Status::Optimal;
  out.x.assign(nv, Rational(0));
  for (std::size_t i = 0; i < nr; ++i)
    if (basis[i] < nv) out.x[basis[i]] = t[i][rhs];
  out.value = 0;
  for (std::size_t j = 0; j < nv; ++j) out.value += lp.objective[j] * out.x[j];
  return out;
}

}  // namespace admarket
