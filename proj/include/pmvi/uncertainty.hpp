#pragma once

// Relative uncertainty of a dataset and the coverage conditions under which
// PMVI's rate specializes to K^{-1/2}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "pmvi/dataset.hpp"
#include "pmvi/error.hpp"
#include "pmvi/evaluation.hpp"
#include "pmvi/markov_game.hpp"
#include "pmvi/value_iteration.hpp"

namespace pmvi {

inline constexpr double kPsdTol = 1e-9;

/// Per-step tables sqrt(phi^T Lambda_h^{-1} phi).
inline std::vector<std::vector<double>> width_tables(const TabularLinearMG& game,
                                                     const std::vector<Eigen::MatrixXd>& grams) {
  require(grams.size() == static_cast<std::size_t>(game.horizon()), ErrorKind::InvalidArgument,
          "need one Gram matrix per step");
  std::vector<std::vector<double>> out;
  out.reserve(grams.size());
  for (const auto& g : grams) out.push_back(elliptical_widths(game, g));
  return out;
}

inline std::vector<Eigen::MatrixXd> gram_matrices(const OfflineDataset& data,
                                                  const TabularLinearMG& game) {
  data.check_against(game);
  std::vector<Eigen::MatrixXd> out;
  for (int h = 0; h < game.horizon(); ++h) out.push_back(gram_matrix(data, game, h));
  return out;
}

/// sup over the opponent of sum_h E[g_h] with one side fixed, by backward
/// DP with a pure maximizing opponent.
inline double bonus_value_dp(const TabularLinearMG& game,
                             const std::vector<std::vector<double>>& widths,
                             const MarkovPolicy& fixed_policy, Player fixed_side) {
  fixed_policy.check_against(game, fixed_side);
  require(widths.size() == static_cast<std::size_t>(game.horizon()), ErrorKind::InvalidArgument,
          "need one width table per step");
  const int S = game.num_states(), A1 = game.num_actions_max(), A2 = game.num_actions_min();
  const int A_opp = fixed_side == Player::Max ? A2 : A1;
  std::vector<double> next(S, 0.0), cur(S);
  for (int h = game.horizon() - 1; h >= 0; --h) {
    require(widths[h].size() == static_cast<std::size_t>(game.num_cells()),
            ErrorKind::InvalidArgument, "width table has wrong size");
    for (int s = 0; s < S; ++s) {
      const auto p = fixed_policy.probs(h, s);
      double best = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < A_opp; ++k) {
        double val = 0.0;
        const int A_fixed = fixed_side == Player::Max ? A1 : A2;
        for (int f = 0; f < A_fixed; ++f) {
          if (p[f] == 0.0) continue;
          const int a = fixed_side == Player::Max ? f : k;
          const int b = fixed_side == Player::Max ? k : f;
          double cont = widths[h][game.cell(s, a, b)];
          const auto trans = game.next_state_distribution(h, s, a, b);
          for (int n = 0; n < S; ++n) cont += trans[n] * next[n];
          val += p[f] * cont;
        }
        best = std::max(best, val);
      }
      cur[s] = best;
    }
    std::swap(cur, next);
  }
  return next[game.initial_state()];
}

inline double bonus_value_dp(const TabularLinearMG& game, const std::vector<Eigen::MatrixXd>& grams,
                             const MarkovPolicy& fixed_policy, Player fixed_side) {
  return bonus_value_dp(game, width_tables(game, grams), fixed_policy, fixed_side);
}

struct RUReport {
  double ru_max_side = 0.0;  // sup_nu sum_h E_{pi*,nu}[w_h]
  double ru_min_side = 0.0;  // sup_pi sum_h E_{pi,nu*}[w_h]
  double ru = 0.0;
  int ne_pair_used = 0;  // index into the candidate list
  std::vector<double> lambda_min;  // per h, when a behavior pair is known
};

/// Minimizes over the candidate NE pairs; the minimizing pair is reported.
inline RUReport relative_uncertainty(const TabularLinearMG& game,
                                     const std::vector<std::vector<double>>& widths,
                                     const std::vector<PolicyPair>& ne_pairs) {
  require(!ne_pairs.empty(), ErrorKind::InvalidArgument, "need at least one NE pair");
  RUReport best;
  best.ru = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ne_pairs.size(); ++i) {
    RUReport r;
    r.ru_max_side = bonus_value_dp(game, widths, ne_pairs[i].max_player, Player::Max);
    r.ru_min_side = bonus_value_dp(game, widths, ne_pairs[i].min_player, Player::Min);
    r.ru = std::max(r.ru_max_side, r.ru_min_side);
    r.ne_pair_used = static_cast<int>(i);
    if (r.ru < best.ru) best = r;
  }
  return best;
}

inline RUReport relative_uncertainty(const TabularLinearMG& game, const OfflineDataset& data,
                                     const std::vector<PolicyPair>& ne_pairs) {
  return relative_uncertainty(game, width_tables(game, gram_matrices(data, game)), ne_pairs);
}

/// RU at the solver's NE.
inline RUReport relative_uncertainty(const TabularLinearMG& game, const OfflineDataset& data,
                                     const NashValues& nash) {
  return relative_uncertainty(game, data, {PolicyPair{nash.pi, nash.nu}});
}

inline RUReport relative_uncertainty(const TabularLinearMG& game, const OfflineDataset& data) {
  return relative_uncertainty(game, data, exact_nash_values(game));
}

/// E_{pi,nu}[phi_h phi_h^T] from the initial state.
inline Eigen::MatrixXd feature_second_moment(const TabularLinearMG& game, const MarkovPolicy& pi,
                                             const MarkovPolicy& nu, int h,
                                             const std::vector<std::vector<double>>& dist) {
  const int d = game.feature_dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (int s = 0; s < game.num_states(); ++s) {
    if (dist[h][s] == 0.0) continue;
    for (int a = 0; a < game.num_actions_max(); ++a)
      for (int b = 0; b < game.num_actions_min(); ++b) {
        const double w = dist[h][s] * pi(h, s, a) * nu(h, s, b);
        if (w == 0.0) continue;
        const auto phi = detail::as_vector(game.feature(s, a, b));
        m.noalias() += w * phi * phi.transpose();
      }
  }
  return m;
}

inline Eigen::MatrixXd feature_second_moment(const TabularLinearMG& game, const MarkovPolicy& pi,
                                             const MarkovPolicy& nu, int h) {
  game.check_step(h);
  return feature_second_moment(game, pi, nu, h, state_distributions(game, pi, nu));
}

inline double lambda_min(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success)
    fail(ErrorKind::SolverFailure, "symmetric eigensolver failed (bug)");
  return eig.eigenvalues().minCoeff();
}

struct CoverageCheck {
  std::vector<bool> holds;     // per h
  std::vector<double> margin;  // min eigenvalue of Lambda_h - I - c1 K M over opponents
  long long opponents_checked = 0;
};

inline constexpr long long kDefaultOpponentLimit = 10'000;

/// Checks Lambda_h >= I + c1 K E[phi_h phi_h^T] in the PSD order for every
/// deterministic opponent of pi* and of nu*. Achievable second moments are
/// convex combinations of deterministic ones, so the vertices suffice.
inline CoverageCheck coverage_sufficient_check(const TabularLinearMG& game,
                                               const OfflineDataset& data, double c1,
                                               const NashValues& nash,
                                               long long opponent_limit = kDefaultOpponentLimit) {
  require(c1 >= 0.0, ErrorKind::InvalidArgument, "c1 must be non-negative");
  const auto grams = gram_matrices(data, game);
  const int H = game.horizon(), S = game.num_states();
  const double scale = c1 * static_cast<double>(data.num_trajectories());
  CoverageCheck out;
  out.holds.assign(H, false);
  out.margin.assign(H, std::numeric_limits<double>::infinity());

  for (Player fixed : {Player::Max, Player::Min}) {
    const Player opp = fixed == Player::Max ? Player::Min : Player::Max;
    const int A = game.num_actions(opp);
    for (int h = 0; h < H; ++h) {
      // Only the opponent's choices at steps 0..h reach phi_h.
      const int slots = S * (h + 1);
      long double count = std::pow(static_cast<long double>(A), slots);
      if (count > static_cast<long double>(opponent_limit))
        fail(ErrorKind::InvalidArgument,
             "coverage check would enumerate more than " + std::to_string(opponent_limit) +
                 " opponent policies");
      std::vector<int> actions(static_cast<std::size_t>(H) * S, 0);
      const Eigen::MatrixXd base =
          grams[h] - Eigen::MatrixXd::Identity(game.feature_dim(), game.feature_dim());
      for (;;) {
        const auto opp_policy = MarkovPolicy::deterministic(opp, H, S, A, actions);
        const auto& pi = fixed == Player::Max ? nash.pi : opp_policy;
        const auto& nu = fixed == Player::Max ? opp_policy : nash.nu;
        const auto m = feature_second_moment(game, pi, nu, h);
        out.margin[h] = std::min(out.margin[h], lambda_min(base - scale * m));
        ++out.opponents_checked;
        int k = 0;
        while (k < slots && ++actions[k] == A) actions[k++] = 0;
        if (k == slots) break;
      }
    }
  }
  for (int h = 0; h < H; ++h) out.holds[h] = out.margin[h] >= -kPsdTol;
  return out;
}

/// lambda_min(E_{behavior}[phi_h phi_h^T]) per h.
inline std::vector<double> well_explored_check(const TabularLinearMG& game,
                                               const PolicyPair& behavior) {
  const auto dist = state_distributions(game, behavior.max_player, behavior.min_player);
  std::vector<double> out;
  for (int h = 0; h < game.horizon(); ++h)
    out.push_back(lambda_min(
        feature_second_moment(game, behavior.max_player, behavior.min_player, h, dist)));
  return out;
}

}  // namespace pmvi
