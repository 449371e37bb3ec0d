#pragma once

// Pessimistic minimax value iteration for offline linear Markov games.
//
// Backward over h: ridge-regress the pessimistic (lower, max-player) and
// optimistic (upper, min-player) continuation values onto the features,
// shift each estimate by the elliptical bonus beta * ||phi||_{Lambda^{-1}}
// in the pessimistic direction, clamp to [0, H - h], and solve the per-state
// matrix games. The max-player's output policy comes from the lower game
// and the min-player's from the upper one.

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "pmvi/dataset.hpp"
#include "pmvi/error.hpp"
#include "pmvi/markov_game.hpp"
#include "pmvi/matrix_nash.hpp"

namespace pmvi {

/// beta = c * d * H * sqrt(log(2 d K H / p)).
inline double default_beta(int feature_dim, int horizon, long long num_trajectories, double p,
                           double c) {
  require(feature_dim >= 1 && horizon >= 1 && num_trajectories >= 1, ErrorKind::InvalidArgument,
          "default_beta needs d, H, K >= 1");
  require(p > 0.0 && p < 1.0, ErrorKind::InvalidArgument, "confidence level p must lie in (0, 1)");
  require(c > 0.0, ErrorKind::InvalidArgument, "bonus constant c must be positive");
  const double d = feature_dim;
  const double H = horizon;
  const double zeta = std::log(2.0 * d * static_cast<double>(num_trajectories) * H / p);
  return c * d * H * std::sqrt(zeta);
}

struct PmviConfig {
  /// Explicit bonus scale; when empty it is derived from (c, p).
  std::optional<double> beta;
  double c = 1.0;
  double p = 0.1;
  double nash_tol = kDefaultNashTol;

  /// Resolved bonus scale. An empty dataset uses K = 1 in the log term.
  double resolve_beta(const TabularLinearMG& game, long long num_trajectories) const {
    if (beta) {
      require(*beta > 0.0, ErrorKind::InvalidArgument, "beta must be positive");
      return *beta;
    }
    return default_beta(game.feature_dim(), game.horizon(), std::max(num_trajectories, 1LL), p,
                        c);
  }
};

struct PmviStep {
  Eigen::MatrixXd gram;      // Lambda_h
  Eigen::VectorXd w_lower;   // regression onto the lower continuation
  Eigen::VectorXd w_upper;   // regression onto the upper continuation
  std::vector<double> bonus;  // Gamma_h per cell
};

struct PmviOutput {
  double beta = 0.0;
  std::vector<PmviStep> steps;
  QTable q_lower, q_upper;
  VTable v_lower, v_upper;
  MarkovPolicy pi_hat;  // from NE of the lower game
  MarkovPolicy nu_aux;  // nu', partner of pi_hat in the lower game
  MarkovPolicy pi_aux;  // pi', partner of nu_hat in the upper game
  MarkovPolicy nu_hat;  // from NE of the upper game

  PolicyPair policies() const { return {pi_hat, nu_hat}; }
};

namespace detail {

using Cholesky = Eigen::LLT<Eigen::MatrixXd>;

inline Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

/// Visit counts per cell at step h.
inline std::vector<long long> cell_counts(const OfflineDataset& data, const TabularLinearMG& game,
                                          int h) {
  std::vector<long long> counts(static_cast<std::size_t>(game.num_cells()), 0);
  for (const auto& traj : data.trajectories) {
    const auto& st = traj.steps[h];
    ++counts[game.cell(st.s, st.a, st.b)];
  }
  return counts;
}

inline Cholesky factorize(const Eigen::MatrixXd& gram) {
  Cholesky llt(gram);
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::SolverFailure, "Cholesky factorization of the Gram matrix failed (bug)");
  return llt;
}

}  // namespace detail

/// Lambda_h = I + sum_tau phi_h^tau (phi_h^tau)^T.
inline Eigen::MatrixXd gram_matrix(const OfflineDataset& data, const TabularLinearMG& game, int h) {
  game.check_step(h);
  const int d = game.feature_dim();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(d, d);
  const auto counts = detail::cell_counts(data, game, h);
  for (int c = 0; c < game.num_cells(); ++c) {
    if (counts[c] == 0) continue;
    const auto phi = detail::as_vector(game.feature_of_cell(c));
    gram.noalias() += static_cast<double>(counts[c]) * phi * phi.transpose();
  }
  return gram;
}

/// Lambda_h^{-1} sum_tau phi_h^tau (r_h^tau + V_next(s_{h+1}^tau)), solved
/// through a Cholesky factorization of the Gram matrix.
inline Eigen::VectorXd ridge_weights(const OfflineDataset& data, const TabularLinearMG& game,
                                     int h, const detail::Cholesky& gram_factor,
                                     std::span<const double> v_next) {
  require(v_next.size() == static_cast<std::size_t>(game.num_states()), ErrorKind::OutOfRange,
          "continuation value has wrong length");
  std::vector<double> targets(static_cast<std::size_t>(game.num_cells()), 0.0);
  for (const auto& traj : data.trajectories) {
    const auto& st = traj.steps[h];
    targets[game.cell(st.s, st.a, st.b)] += st.r + v_next[st.s_next];
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(game.feature_dim());
  for (int c = 0; c < game.num_cells(); ++c)
    if (targets[c] != 0.0) rhs += targets[c] * detail::as_vector(game.feature_of_cell(c));
  return gram_factor.solve(rhs);
}

inline Eigen::VectorXd ridge_weights(const OfflineDataset& data, const TabularLinearMG& game,
                                     int h, std::span<const double> v_next) {
  game.check_step(h);
  return ridge_weights(data, game, h, detail::factorize(gram_matrix(data, game, h)), v_next);
}

/// sqrt(phi^T Lambda^{-1} phi) per cell.
inline std::vector<double> elliptical_widths(const TabularLinearMG& game,
                                             const detail::Cholesky& gram_factor) {
  std::vector<double> out(static_cast<std::size_t>(game.num_cells()));
  for (int c = 0; c < game.num_cells(); ++c) {
    Eigen::VectorXd v = detail::as_vector(game.feature_of_cell(c));
    gram_factor.matrixL().solveInPlace(v);
    out[c] = v.norm();
  }
  return out;
}

inline std::vector<double> elliptical_widths(const TabularLinearMG& game,
                                             const Eigen::MatrixXd& gram) {
  require(gram.rows() == game.feature_dim() && gram.cols() == game.feature_dim(),
          ErrorKind::InvalidArgument, "Gram matrix has wrong shape");
  return elliptical_widths(game, detail::factorize(gram));
}

/// Gamma_h(s, a, b) = beta * sqrt(phi^T Lambda_h^{-1} phi), per cell.
inline std::vector<double> bonus(const TabularLinearMG& game, const Eigen::MatrixXd& gram,
                                 double beta) {
  require(beta > 0.0, ErrorKind::InvalidArgument, "beta must be positive");
  auto out = elliptical_widths(game, gram);
  for (double& g : out) g *= beta;
  return out;
}

inline PmviOutput run_pmvi(const TabularLinearMG& game, const OfflineDataset& data,
                           const PmviConfig& config = {}) {
  require(data.horizon == game.horizon(), ErrorKind::InvalidArgument,
          "dataset horizon does not match the game");
  data.check_against(game);
  const int H = game.horizon();
  const int S = game.num_states();
  const int A1 = game.num_actions_max();
  const int A2 = game.num_actions_min();

  PmviOutput out;
  out.beta = config.resolve_beta(game, data.num_trajectories());
  out.steps.resize(static_cast<std::size_t>(H));
  out.q_lower = QTable(game);
  out.q_upper = QTable(game);
  out.v_lower = VTable(game);
  out.v_upper = VTable(game);
  std::vector<double> pi_hat(static_cast<std::size_t>(H) * S * A1);
  std::vector<double> pi_aux(pi_hat.size());
  std::vector<double> nu_hat(static_cast<std::size_t>(H) * S * A2);
  std::vector<double> nu_aux(nu_hat.size());

  for (int h = H - 1; h >= 0; --h) {
    auto& step = out.steps[h];
    step.gram = gram_matrix(data, game, h);
    const auto factor = detail::factorize(step.gram);
    step.w_lower = ridge_weights(data, game, h, factor, out.v_lower.step(h + 1));
    step.w_upper = ridge_weights(data, game, h, factor, out.v_upper.step(h + 1));
    step.bonus = elliptical_widths(game, factor);
    for (double& g : step.bonus) g *= out.beta;

    const double cap = H - h;
    auto q_lo = out.q_lower.step(h);
    auto q_hi = out.q_upper.step(h);
    for (int c = 0; c < game.num_cells(); ++c) {
      const auto phi = detail::as_vector(game.feature_of_cell(c));
      q_lo[c] = std::clamp(phi.dot(step.w_lower) - step.bonus[c], 0.0, cap);
      q_hi[c] = std::clamp(phi.dot(step.w_upper) + step.bonus[c], 0.0, cap);
    }

    for (int s = 0; s < S; ++s) {
      const MatrixGame lower(A1, A2, out.q_lower.matrix(h, s));
      const MatrixGame upper(A1, A2, out.q_upper.matrix(h, s));
      const auto ne_lo = solve_zero_sum(lower, config.nash_tol);
      const auto ne_hi = solve_zero_sum(upper, config.nash_tol);
      const std::size_t off1 = (static_cast<std::size_t>(h) * S + s) * A1;
      const std::size_t off2 = (static_cast<std::size_t>(h) * S + s) * A2;
      std::copy(ne_lo.row_strategy.begin(), ne_lo.row_strategy.end(), pi_hat.begin() + off1);
      std::copy(ne_lo.col_strategy.begin(), ne_lo.col_strategy.end(), nu_aux.begin() + off2);
      std::copy(ne_hi.row_strategy.begin(), ne_hi.row_strategy.end(), pi_aux.begin() + off1);
      std::copy(ne_hi.col_strategy.begin(), ne_hi.col_strategy.end(), nu_hat.begin() + off2);

      const double v_lo = lower.bilinear(ne_lo.row_strategy, ne_lo.col_strategy);
      const double v_hi = upper.bilinear(ne_hi.row_strategy, ne_hi.col_strategy);
      if (std::abs(v_lo - ne_lo.value) > 1e-8 || std::abs(v_hi - ne_hi.value) > 1e-8) {
        std::ostringstream os;
        os << "bilinear value disagrees with the LP value at h=" << h << ", s=" << s << " (bug)";
        fail(ErrorKind::SolverFailure, os.str());
      }
      out.v_lower(h, s) = v_lo;
      out.v_upper(h, s) = v_hi;
    }
  }

  out.pi_hat = MarkovPolicy(Player::Max, H, S, A1, std::move(pi_hat));
  out.pi_aux = MarkovPolicy(Player::Max, H, S, A1, std::move(pi_aux));
  out.nu_hat = MarkovPolicy(Player::Min, H, S, A2, std::move(nu_hat));
  out.nu_aux = MarkovPolicy(Player::Min, H, S, A2, std::move(nu_aux));
  return out;
}

}  // namespace pmvi
