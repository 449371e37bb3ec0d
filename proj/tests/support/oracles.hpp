#pragma once

// Brute-force reference computations for the test suite. Everything here
// reads the raw spec arrays and uses plain loops, path enumeration or
// exhaustive policy enumeration, so it shares no code with the library's
// algorithms.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "pmvi/dataset.hpp"
#include "pmvi/markov_game.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline std::size_t cell_of(const pmvi::LinearGameSpec& g, int s, int a, int b) {
  return (static_cast<std::size_t>(s) * g.num_actions_max + a) * g.num_actions_min + b;
}
inline std::size_t cells(const pmvi::LinearGameSpec& g) {
  return static_cast<std::size_t>(g.num_states) * g.num_actions_max * g.num_actions_min;
}
inline double prob(const pmvi::LinearGameSpec& g, int h, int s, int a, int b, int n) {
  return g.transition[(h * cells(g) + cell_of(g, s, a, b)) * g.num_states + n];
}
inline double reward(const pmvi::LinearGameSpec& g, int h, int s, int a, int b) {
  return g.reward[h * cells(g) + cell_of(g, s, a, b)];
}

/// r + sum_n P V(n) with explicit loops over the raw tensors.
inline std::vector<double> bellman(const pmvi::LinearGameSpec& g, int h,
                                   const std::vector<double>& v_next) {
  std::vector<double> out(cells(g));
  for (int s = 0; s < g.num_states; ++s)
    for (int a = 0; a < g.num_actions_max; ++a)
      for (int b = 0; b < g.num_actions_min; ++b) {
        double acc = reward(g, h, s, a, b);
        for (int n = 0; n < g.num_states; ++n) acc += prob(g, h, s, a, b, n) * v_next[n];
        out[cell_of(g, s, a, b)] = acc;
      }
  return out;
}

// Linear algebra ------------------------------------------------------------

/// Inverse by Gauss-Jordan with partial pivoting; nullopt when singular.
inline std::optional<Matrix> inverse(Matrix m, double eps = 1e-12) {
  const std::size_t n = m.size();
  Matrix inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < eps) return std::nullopt;
    std::swap(m[piv], m[col]);
    std::swap(inv[piv], inv[col]);
    const double d = m[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      m[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m[r][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        m[r][j] -= f * m[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

inline double quadratic_form(const Matrix& a, const std::vector<double>& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) acc += x[i] * a[i][j] * x[j];
  return acc;
}

/// I + sum over trajectories of phi phi^T, one rank-1 update per sample.
inline Matrix gram(const pmvi::LinearGameSpec& g, const pmvi::OfflineDataset& data, int h) {
  const int d = g.feature_dim;
  Matrix m(d, std::vector<double>(d, 0.0));
  for (int i = 0; i < d; ++i) m[i][i] = 1.0;
  for (const auto& traj : data.trajectories) {
    const auto& st = traj.steps[h];
    const double* phi = &g.features[cell_of(g, st.s, st.a, st.b) * d];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m[i][j] += phi[i] * phi[j];
  }
  return m;
}

/// sqrt(phi^T Lambda^{-1} phi) per cell through an explicit inverse.
inline std::vector<double> widths(const pmvi::LinearGameSpec& g, const Matrix& lambda) {
  const auto inv = inverse(lambda);
  const int d = g.feature_dim;
  std::vector<double> out(cells(g));
  for (std::size_t c = 0; c < cells(g); ++c) {
    std::vector<double> phi(g.features.begin() + c * d, g.features.begin() + (c + 1) * d);
    out[c] = std::sqrt(quadratic_form(*inv, phi));
  }
  return out;
}

// Matrix games --------------------------------------------------------------

/// Value of max_x min_y x^T M y by enumerating square submatrices of the
/// positively shifted matrix. Every extreme optimal pair comes from a
/// nonsingular k x k block B with v = 1 / (1^T B^{-1} 1),
/// x = 1^T B^{-1} v and y = B^{-1} 1 v; a block is accepted after checking
/// feasibility and optimality against every row and column.
inline double matrix_value(const Matrix& m, double tol = 1e-9) {
  const int rows = static_cast<int>(m.size());
  const int cols = static_cast<int>(m[0].size());
  double lo = m[0][0];
  for (const auto& r : m)
    for (double v : r) lo = std::min(lo, v);
  const double shift = 1.0 - lo;
  std::vector<int> ri, ci;
  std::optional<double> found;

  std::function<void(int, int, int)> pick_cols;
  std::function<void(int, int)> pick_rows;
  auto try_block = [&] {
    const std::size_t k = ri.size();
    Matrix b(k, std::vector<double>(k));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) b[i][j] = m[ri[i]][ci[j]] + shift;
    const auto inv = inverse(b);
    if (!inv) return;
    double total = 0.0;
    std::vector<double> xs(k, 0.0), ys(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        total += (*inv)[i][j];
        xs[j] += (*inv)[i][j];
        ys[i] += (*inv)[i][j];
      }
    if (total <= 0.0) return;
    const double v = 1.0 / total;
    std::vector<double> x(rows, 0.0), y(cols, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      if (xs[i] * v < -tol || ys[i] * v < -tol) return;
      x[ri[i]] = xs[i] * v;
      y[ci[i]] = ys[i] * v;
    }
    for (int i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < cols; ++j) acc += (m[i][j] + shift) * y[j];
      if (acc > v + tol) return;
    }
    for (int j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (int i = 0; i < rows; ++i) acc += x[i] * (m[i][j] + shift);
      if (acc < v - tol) return;
    }
    found = v - shift;
  };
  pick_cols = [&](int start, int need, int) {
    if (found) return;
    if (need == 0) {
      try_block();
      return;
    }
    for (int j = start; j < cols; ++j) {
      ci.push_back(j);
      pick_cols(j + 1, need - 1, 0);
      ci.pop_back();
    }
  };
  pick_rows = [&](int start, int need) {
    if (found) return;
    if (need == 0) {
      pick_cols(0, static_cast<int>(ri.size()), 0);
      return;
    }
    for (int i = start; i < rows; ++i) {
      ri.push_back(i);
      pick_rows(i + 1, need - 1);
      ri.pop_back();
    }
  };
  for (int k = 1; k <= std::min(rows, cols) && !found; ++k) pick_rows(0, k);
  return found.value_or(std::numeric_limits<double>::quiet_NaN());
}

/// max_i min_j and min_j max_i over pure strategies.
inline std::pair<double, double> pure_bounds(const Matrix& m) {
  double maximin = -std::numeric_limits<double>::infinity();
  double minimax = std::numeric_limits<double>::infinity();
  for (const auto& row : m) maximin = std::max(maximin, *std::min_element(row.begin(), row.end()));
  for (std::size_t j = 0; j < m[0].size(); ++j) {
    double col_max = -std::numeric_limits<double>::infinity();
    for (const auto& row : m) col_max = std::max(col_max, row[j]);
    minimax = std::min(minimax, col_max);
  }
  return {maximin, minimax};
}

// Policies and path enumeration --------------------------------------------

/// Policy as a raw table probs[(h * S + s) * A + a].
using PolicyTable = std::vector<double>;

inline PolicyTable table_of(const pmvi::MarkovPolicy& p) { return p.data(); }

/// sum_h E[g_h(s_h, a_h, b_h)] by expanding every path of the game tree.
/// g defaults to the reward.
inline double path_sum(const pmvi::LinearGameSpec& g, const PolicyTable& pi,
                       const PolicyTable& nu,
                       const std::function<double(int, int, int, int)>& gain) {
  const int S = g.num_states, A1 = g.num_actions_max, A2 = g.num_actions_min;
  std::function<double(int, int, double)> walk = [&](int h, int s, double w) -> double {
    if (h == g.horizon || w == 0.0) return 0.0;
    double total = 0.0;
    for (int a = 0; a < A1; ++a)
      for (int b = 0; b < A2; ++b) {
        const double wab = w * pi[(h * S + s) * A1 + a] * nu[(h * S + s) * A2 + b];
        if (wab == 0.0) continue;
        total += wab * gain(h, s, a, b);
        for (int n = 0; n < S; ++n) total += walk(h + 1, n, wab * prob(g, h, s, a, b, n));
      }
    return total;
  };
  return walk(0, g.initial_state, 1.0);
}

inline double policy_value(const pmvi::LinearGameSpec& g, const PolicyTable& pi,
                           const PolicyTable& nu) {
  return path_sum(g, pi, nu, [&](int h, int s, int a, int b) { return reward(g, h, s, a, b); });
}

/// Calls fn on every deterministic policy table with A actions.
inline void for_each_deterministic(int horizon, int num_states, int num_actions,
                                   const std::function<void(const PolicyTable&)>& fn) {
  const int slots = horizon * num_states;
  std::vector<int> choice(slots, 0);
  for (;;) {
    PolicyTable t(static_cast<std::size_t>(slots) * num_actions, 0.0);
    for (int k = 0; k < slots; ++k) t[k * num_actions + choice[k]] = 1.0;
    fn(t);
    int k = 0;
    while (k < slots && ++choice[k] == num_actions) choice[k++] = 0;
    if (k == slots) return;
  }
}

/// min over deterministic nu of V^{pi,nu} (fixed max player), or max over
/// deterministic pi (fixed min player).
inline double best_response(const pmvi::LinearGameSpec& g, const PolicyTable& fixed,
                            pmvi::Player fixed_side) {
  const bool max_fixed = fixed_side == pmvi::Player::Max;
  double best = max_fixed ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
  for_each_deterministic(g.horizon, g.num_states,
                         max_fixed ? g.num_actions_min : g.num_actions_max,
                         [&](const PolicyTable& opp) {
                           const double v = max_fixed ? policy_value(g, fixed, opp)
                                                      : policy_value(g, opp, fixed);
                           best = max_fixed ? std::min(best, v) : std::max(best, v);
                         });
  return best;
}

/// sup over deterministic opponents of sum_h E[widths_h].
inline double bonus_sup(const pmvi::LinearGameSpec& g,
                        const std::vector<std::vector<double>>& widths,
                        const PolicyTable& fixed, pmvi::Player fixed_side) {
  const bool max_fixed = fixed_side == pmvi::Player::Max;
  double best = -std::numeric_limits<double>::infinity();
  auto gain = [&](int h, int s, int a, int b) { return widths[h][cell_of(g, s, a, b)]; };
  for_each_deterministic(g.horizon, g.num_states,
                         max_fixed ? g.num_actions_min : g.num_actions_max,
                         [&](const PolicyTable& opp) {
                           const double v = max_fixed ? path_sum(g, fixed, opp, gain)
                                                      : path_sum(g, opp, fixed, gain);
                           best = std::max(best, v);
                         });
  return best;
}

/// Duality gap of a product policy on a one-step bandit from pure deviations.
inline double bandit_gap(const Matrix& m, const std::vector<double>& x,
                         const std::vector<double>& y) {
  double row_best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) acc += m[i][j] * y[j];
    row_best = std::max(row_best, acc);
  }
  double col_best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < y.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) acc += x[i] * m[i][j];
    col_best = std::min(col_best, acc);
  }
  return row_best - col_best;
}

/// Uniform random point on the simplex.
template <class Rng>
std::vector<double> random_simplex(Rng& rng, int n) {
  std::vector<double> out(n);
  double total = 0.0;
  for (double& v : out) total += v = -std::log(1.0 - rng.uniform());
  for (double& v : out) v /= total;
  return out;
}

}  // namespace oracle
