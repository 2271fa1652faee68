#pragma once

// Exact linear assignment. Rectangular inputs behave as if padded with
// zero-cost dummy rows/columns to square. Small instances additionally
// canonicalize the result to the lexicographically smallest assignment vector
// among equal-cost optima (via the tight-edge graph of the optimal duals);
// large instances keep the solver's deterministic matching and fill dummy
// pairings in ascending order, which matters only for degenerate
// thousand-cluster contingencies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "ttd/error.hpp"

namespace ttd {

struct Assignment {
  std::vector<std::int32_t> column_of_row;  // padded square problem, size max(rows, cols)
  double total_cost = 0.0;
  std::size_t rows = 0;  // original shape
  std::size_t cols = 0;
};

namespace detail {

// Shortest augmenting path with potentials on an n x m matrix, n <= m.
// Returns col_of_row (size n) and the dual potentials.
struct RectangularSolve {
  std::vector<std::int32_t> col_of_row;
  std::vector<double> u, v;  // 1-indexed potentials, sizes n+1 / m+1
};

inline RectangularSolve solve_rectangular(const std::vector<std::vector<double>>& a,
                                          std::size_t n, std::size_t m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::int32_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = static_cast<std::int32_t>(i);
    std::int32_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::int32_t i0 = p[j0];
      double delta = inf;
      std::int32_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = static_cast<std::int32_t>(j);
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::int32_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  RectangularSolve result;
  result.col_of_row.assign(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) result.col_of_row[p[j] - 1] = static_cast<std::int32_t>(j) - 1;
  result.u = std::move(u);
  result.v = std::move(v);
  return result;
}

// Kuhn matching restricted to free columns: can rows [from, n) all be placed?
inline bool rows_matchable(const std::vector<std::vector<std::int32_t>>& adjacency,
                           std::size_t from, std::size_t n,
                           const std::vector<char>& column_taken) {
  std::vector<std::int32_t> row_of_col(n, -1);
  std::vector<char> visited(n, 0);

  std::function<bool(std::int32_t)> augment = [&](std::int32_t row) {
    for (std::int32_t col : adjacency[row]) {
      if (column_taken[col] || visited[col]) continue;
      visited[col] = 1;
      if (row_of_col[col] < 0 || augment(row_of_col[col])) {
        row_of_col[col] = row;
        return true;
      }
    }
    return false;
  };

  for (std::size_t row = from; row < n; ++row) {
    std::fill(visited.begin(), visited.end(), 0);
    if (!augment(static_cast<std::int32_t>(row))) return false;
  }
  return true;
}

// Lexicographically smallest perfect matching of the square tight-edge graph.
inline std::vector<std::int32_t> lexicographic_tight_matching(
    const std::vector<std::vector<double>>& a, const std::vector<double>& u,
    const std::vector<double>& v, std::size_t n, double tol) {
  std::vector<std::vector<std::int32_t>> tight(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (std::abs(a[i][j] - u[i + 1] - v[j + 1]) <= tol)
        tight[i].push_back(static_cast<std::int32_t>(j));

  std::vector<std::int32_t> assignment(n, -1);
  std::vector<char> column_taken(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    bool placed = false;
    for (std::int32_t j : tight[i]) {
      if (column_taken[j]) continue;
      column_taken[j] = 1;
      if (rows_matchable(tight, i + 1, n, column_taken)) {
        assignment[i] = j;
        placed = true;
        break;
      }
      column_taken[j] = 0;
    }
    if (!placed)
      throw Error(ErrorCode::invalid_argument, "assignment canonicalization failed");
  }
  return assignment;
}

}  // namespace detail

// Minimum-total-cost perfect matching of the (implicitly padded) square
// problem. Deterministic; equal-cost optima resolve to the lexicographically
// smallest assignment vector up to the canonicalization size limit.
inline Assignment hungarian_assign(const std::vector<std::vector<double>>& cost) {
  if (cost.empty() || cost.front().empty())
    throw Error(ErrorCode::invalid_argument, "cost matrix must be non-empty");
  const std::size_t rows = cost.size();
  const std::size_t cols = cost.front().size();
  double max_abs = 0.0;
  for (const auto& row : cost) {
    if (row.size() != cols)
      throw Error(ErrorCode::invalid_argument, "cost matrix is ragged");
    for (double c : row) {
      if (std::isnan(c) || !std::isfinite(c))
        throw Error(ErrorCode::invalid_argument, "cost matrix must be finite");
      max_abs = std::max(max_abs, std::abs(c));
    }
  }

  const std::size_t n = std::max(rows, cols);
  Assignment result;
  result.rows = rows;
  result.cols = cols;
  result.column_of_row.assign(n, -1);

  constexpr std::size_t kCanonicalLimit = 128;
  if (n <= kCanonicalLimit) {
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) a[i][j] = cost[i][j];
    const detail::RectangularSolve solve = detail::solve_rectangular(a, n, n);
    const double tol = 1e-9 * std::max(1.0, max_abs);
    result.column_of_row =
        detail::lexicographic_tight_matching(a, solve.u, solve.v, n, tol);
  } else if (rows <= cols) {
    const detail::RectangularSolve solve = detail::solve_rectangular(cost, rows, cols);
    std::vector<char> column_taken(n, 0);
    for (std::size_t i = 0; i < rows; ++i) {
      result.column_of_row[i] = solve.col_of_row[i];
      column_taken[solve.col_of_row[i]] = 1;
    }
    std::int32_t next_free = 0;
    for (std::size_t i = rows; i < n; ++i) {  // dummy rows take leftovers in order
      while (column_taken[next_free]) ++next_free;
      result.column_of_row[i] = next_free;
      column_taken[next_free] = 1;
    }
  } else {
    std::vector<std::vector<double>> transposed(cols, std::vector<double>(rows));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) transposed[j][i] = cost[i][j];
    const detail::RectangularSolve solve = detail::solve_rectangular(transposed, cols, rows);
    std::vector<char> row_done(n, 0);
    for (std::size_t j = 0; j < cols; ++j) {
      result.column_of_row[solve.col_of_row[j]] = static_cast<std::int32_t>(j);
      row_done[solve.col_of_row[j]] = 1;
    }
    std::int32_t next_dummy = static_cast<std::int32_t>(cols);
    for (std::size_t i = 0; i < n; ++i) {  // unmatched rows take dummy columns in order
      if (row_done[i]) continue;
      result.column_of_row[i] = next_dummy++;
    }
  }

  for (std::size_t i = 0; i < rows; ++i) {
    const auto j = static_cast<std::size_t>(result.column_of_row[i]);
    if (j < cols) result.total_cost += cost[i][j];
  }
  return result;
}

}  // namespace ttd
