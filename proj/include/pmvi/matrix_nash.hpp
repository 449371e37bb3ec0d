#pragma once

// Exact Nash equilibria of two-player zero-sum matrix games.
//
// The row player maximizes x^T M y. The game is solved through the classical
// LP pair: after mapping M affinely onto B with entries in [1, 2],
//   max 1^T z  s.t.  B z <= 1, z >= 0
// gives the column strategy y = z / 1^T z, its dual gives the row strategy,
// and the game value is 1 / 1^T z mapped back. The primal starts at the
// slack basis, so no phase one is needed. Pivoting uses Bland's rule, which
// cannot cycle on degenerate tableaux.
//
// When several equilibria exist, the one returned is whichever vertex the
// pivot rule reaches. Only the value is unique.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pmvi/error.hpp"

namespace pmvi {

inline constexpr double kDefaultNashTol = 1e-9;

/// Dense m x n payoff matrix, row-major. Row player maximizes.
class MatrixGame {
 public:
  MatrixGame(int rows, int cols, std::vector<double> payoff)
      : rows_(rows), cols_(cols), payoff_(std::move(payoff)) {
    require(rows >= 1 && cols >= 1, ErrorKind::InvalidArgument,
            "matrix game needs at least one action per player");
    require(payoff_.size() == static_cast<std::size_t>(rows) * cols, ErrorKind::InvalidArgument,
            "payoff matrix has wrong size");
    for (double v : payoff_)
      require(std::isfinite(v), ErrorKind::InvalidArgument, "payoff matrix has non-finite entry");
  }
  MatrixGame(int rows, int cols, std::span<const double> payoff)
      : MatrixGame(rows, cols, std::vector<double>(payoff.begin(), payoff.end())) {}
  explicit MatrixGame(const std::vector<std::vector<double>>& m)
      : MatrixGame(static_cast<int>(m.size()), m.empty() ? 0 : static_cast<int>(m[0].size()),
                   flatten(m)) {}

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  double operator()(int i, int j) const noexcept {
    return payoff_[static_cast<std::size_t>(i) * cols_ + j];
  }
  const std::vector<double>& payoff() const noexcept { return payoff_; }

  /// (M y)_i for every row i.
  std::vector<double> row_payoffs(std::span<const double> y) const {
    require(y.size() == static_cast<std::size_t>(cols_), ErrorKind::InvalidArgument,
            "column strategy has wrong dimension");
    std::vector<double> out(rows_, 0.0);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out[i] += (*this)(i, j) * y[j];
    return out;
  }
  /// (x^T M)_j for every column j.
  std::vector<double> col_payoffs(std::span<const double> x) const {
    require(x.size() == static_cast<std::size_t>(rows_), ErrorKind::InvalidArgument,
            "row strategy has wrong dimension");
    std::vector<double> out(cols_, 0.0);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out[j] += x[i] * (*this)(i, j);
    return out;
  }
  double bilinear(std::span<const double> x, std::span<const double> y) const {
    const auto my = row_payoffs(y);
    double acc = 0.0;
    for (int i = 0; i < rows_; ++i) acc += x[i] * my[i];
    return acc;
  }

  /// Comma-separated rows, for debugging.
  friend std::ostream& operator<<(std::ostream& os, const MatrixGame& g) {
    for (int i = 0; i < g.rows_; ++i) {
      for (int j = 0; j < g.cols_; ++j) os << (j ? "," : "") << g(i, j);
      os << '\n';
    }
    return os;
  }

 private:
  static std::vector<double> flatten(const std::vector<std::vector<double>>& m) {
    std::vector<double> out;
    for (const auto& row : m) {
      require(row.size() == m.front().size(), ErrorKind::InvalidArgument, "ragged payoff matrix");
      out.insert(out.end(), row.begin(), row.end());
    }
    return out;
  }

  int rows_, cols_;
  std::vector<double> payoff_;
};

struct NashSolution {
  std::vector<double> row_strategy;  // x, maximizer
  std::vector<double> col_strategy;  // y, minimizer
  double value = 0.0;
  /// max(max_i (M y)_i - v, v - min_j (x^T M)_j)
  double exploitability = 0.0;
  int pivots = 0;
};

/// max_i (M y)_i - min_j (x^T M)_j; zero exactly at a Nash equilibrium.
inline double best_pure_response_gap(const MatrixGame& game, std::span<const double> x,
                                     std::span<const double> y) {
  const auto my = game.row_payoffs(y);
  const auto xm = game.col_payoffs(x);
  return *std::max_element(my.begin(), my.end()) - *std::min_element(xm.begin(), xm.end());
}

namespace detail {

// Tableau for max c^T z s.t. B z <= 1, z >= 0 with slack basis start.
// Columns 0..n-1 are structural, n..n+m-1 slack.
class BlandSimplex {
 public:
  BlandSimplex(int m, int n, const std::vector<double>& b_matrix)
      : m_(m), n_(n), width_(n + m + 1), tab_(static_cast<std::size_t>(m + 1) * (n + m + 1), 0.0),
        basis_(m) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) at(i, j) = b_matrix[static_cast<std::size_t>(i) * n + j];
      at(i, n + i) = 1.0;
      at(i, n + m) = 1.0;
      basis_[i] = n + i;
    }
    // Objective row holds reduced costs c_j - c_B B^{-1} A_j.
    for (int j = 0; j < n; ++j) at(m, j) = 1.0;
  }

  int solve() {
    constexpr double eps = 1e-12;
    const int max_pivots = 50 * (m_ + n_) * (m_ + n_) + 100;
    int pivots = 0;
    for (;;) {
      int enter = -1;
      for (int j = 0; j < n_ + m_; ++j)
        if (at(m_, j) > eps) {
          enter = j;
          break;
        }
      if (enter < 0) return pivots;

      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        const double a = at(i, enter);
        if (a <= eps) continue;
        const double ratio = at(i, n_ + m_) / a;
        // Ties go to the smallest basic variable index.
        const bool better = leave < 0 || ratio < best_ratio - eps ||
                            (ratio <= best_ratio + eps && basis_[i] < basis_[leave]);
        if (better) {
          best_ratio = leave < 0 ? ratio : std::min(best_ratio, ratio);
          leave = i;
        }
      }
      if (leave < 0)
        fail(ErrorKind::SolverFailure, "simplex reported an unbounded zero-sum LP (bug)");
      pivot(leave, enter);
      if (++pivots > max_pivots)
        fail(ErrorKind::SolverFailure, "simplex exceeded its pivot budget (bug)");
    }
  }

  /// Primal structural values z_j.
  std::vector<double> primal() const {
    std::vector<double> z(n_, 0.0);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < n_) z[basis_[i]] = at(i, n_ + m_);
    return z;
  }
  /// Dual values u_i = -(reduced cost of slack i).
  std::vector<double> dual() const {
    std::vector<double> u(m_);
    for (int i = 0; i < m_; ++i) u[i] = -at(m_, n_ + i);
    return u;
  }

 private:
  double& at(int i, int j) { return tab_[static_cast<std::size_t>(i) * width_ + j]; }
  double at(int i, int j) const { return tab_[static_cast<std::size_t>(i) * width_ + j]; }

  void pivot(int row, int col) {
    const double inv = 1.0 / at(row, col);
    for (int j = 0; j < width_; ++j) at(row, j) *= inv;
    at(row, col) = 1.0;
    for (int i = 0; i <= m_; ++i) {
      if (i == row) continue;
      const double f = at(i, col);
      if (f == 0.0) continue;
      for (int j = 0; j < width_; ++j) at(i, j) -= f * at(row, j);
      at(i, col) = 0.0;
    }
    basis_[row] = col;
  }

  int m_, n_, width_;
  std::vector<double> tab_;
  std::vector<int> basis_;
};

inline std::vector<double> to_simplex_point(std::vector<double> w) {
  double total = 0.0;
  for (double& v : w) {
    v = v > 0.0 ? v : 0.0;
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace detail

inline NashSolution solve_zero_sum(const MatrixGame& game, double tol = kDefaultNashTol) {
  require(tol > 0.0, ErrorKind::InvalidArgument, "Nash tolerance must be positive");
  const int m = game.rows();
  const int n = game.cols();
  const auto& payoff = game.payoff();
  const double lo = *std::min_element(payoff.begin(), payoff.end());
  const double hi = *std::max_element(payoff.begin(), payoff.end());
  const double scale = hi > lo ? hi - lo : 1.0;

  std::vector<double> shifted(payoff.size());
  for (std::size_t k = 0; k < payoff.size(); ++k) shifted[k] = (payoff[k] - lo) / scale + 1.0;

  detail::BlandSimplex lp(m, n, shifted);
  NashSolution sol;
  sol.pivots = lp.solve();
  const auto z = lp.primal();
  const auto u = lp.dual();
  double z_total = 0.0;
  for (double v : z) z_total += v;
  if (!(z_total > 0.0)) fail(ErrorKind::SolverFailure, "degenerate LP optimum (bug)");

  sol.col_strategy = detail::to_simplex_point(z);
  sol.row_strategy = detail::to_simplex_point(u);
  sol.value = (1.0 / z_total - 1.0) * scale + lo;

  const auto my = game.row_payoffs(sol.col_strategy);
  const auto xm = game.col_payoffs(sol.row_strategy);
  const double upper = *std::max_element(my.begin(), my.end());
  const double lower = *std::min_element(xm.begin(), xm.end());
  sol.exploitability = std::max({upper - sol.value, sol.value - lower, 0.0});
  if (sol.exploitability > tol) {
    std::ostringstream os;
    os << "Nash solver exploitability " << sol.exploitability << " exceeds tolerance " << tol
       << " (bug)";
    fail(ErrorKind::SolverFailure, os.str());
  }
  return sol;
}

inline double game_value(const MatrixGame& game, double tol = kDefaultNashTol) {
  return solve_zero_sum(game, tol).value;
}

}  // namespace pmvi
