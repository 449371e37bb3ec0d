#pragma once

// Built-in games and random generators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pmvi/markov_game.hpp"
#include "pmvi/random.hpp"

namespace pmvi {

/// H = 1, one state, one-hot features over the payoff cells.
inline TabularLinearMG matrix_bandit(const std::vector<std::vector<double>>& payoff,
                                     Regularity regularity = Regularity::Warn) {
  TabularGameSpec t;
  t.horizon = 1;
  t.num_states = 1;
  t.num_actions_max = static_cast<int>(payoff.size());
  t.num_actions_min = payoff.empty() ? 0 : static_cast<int>(payoff.front().size());
  for (const auto& row : payoff) {
    require(row.size() == payoff.front().size(), ErrorKind::InvalidArgument, "ragged payoff");
    t.reward.insert(t.reward.end(), row.begin(), row.end());
  }
  t.transition.assign(t.reward.size(), 1.0);
  return one_hot_featurize(t, regularity);
}

inline const std::vector<std::vector<double>>& r1_payoff() {
  static const std::vector<std::vector<double>> m = {
      {0.5, -1.0, 0.0}, {1.0, 0.0, 1.0}, {0.0, -1.0, 0.0}};
  return m;
}

inline const std::vector<std::vector<double>>& r2_payoff() {
  static const std::vector<std::vector<double>> m = {
      {0.0, 0.0, -1.0}, {1.0, 0.0, -1.0}, {1.0, 1.0, 0.0}};
  return m;
}

/// Payoffs in [0, 1] with a fully mixed equilibrium.
inline const std::vector<std::vector<double>>& rate_payoff() {
  static const std::vector<std::vector<double>> m = {
      {1.0, 0.0, 0.4}, {0.2, 0.8, 0.0}, {0.0, 0.5, 0.9}};
  return m;
}

// R1 and R2 have negative payoffs, so they only pass in warn mode.
inline TabularLinearMG bandit_r1() { return matrix_bandit(r1_payoff()); }
inline TabularLinearMG bandit_r2() { return matrix_bandit(r2_payoff()); }
inline TabularLinearMG rate_bandit() { return matrix_bandit(rate_payoff(), Regularity::Strict); }

/// Random tabular game: rewards uniform in [0, 1], transition rows from
/// normalized exponentials.
inline TabularGameSpec random_tabular(Rng& rng, int horizon, int num_states, int num_actions_max,
                                      int num_actions_min) {
  TabularGameSpec t;
  t.horizon = horizon;
  t.num_states = num_states;
  t.num_actions_max = num_actions_max;
  t.num_actions_min = num_actions_min;
  const std::size_t rows =
      static_cast<std::size_t>(horizon) * num_states * num_actions_max * num_actions_min;
  t.reward.resize(rows);
  t.transition.resize(rows * num_states);
  for (std::size_t r = 0; r < rows; ++r) {
    t.reward[r] = rng.uniform();
    double total = 0.0;
    for (int n = 0; n < num_states; ++n) {
      const double e = -std::log(1.0 - rng.uniform());
      t.transition[r * num_states + n] = e;
      total += e;
    }
    for (int n = 0; n < num_states; ++n) t.transition[r * num_states + n] /= total;
    // Renormalize so the row sum is 1 within the stochasticity tolerance.
    double again = 0.0;
    for (int n = 0; n + 1 < num_states; ++n) again += t.transition[r * num_states + n];
    t.transition[r * num_states + num_states - 1] = std::max(0.0, 1.0 - again);
  }
  return t;
}

inline TabularLinearMG random_one_hot_game(std::uint64_t seed, int horizon, int num_states,
                                           int num_actions_max, int num_actions_min) {
  Rng rng(seed);
  return one_hot_featurize(
      random_tabular(rng, horizon, num_states, num_actions_max, num_actions_min),
      Regularity::Strict);
}

/// Fixed 3-state, 2x2-action, H = 3 one-hot game.
inline TabularLinearMG sandwich_game() { return random_one_hot_game(20211014, 3, 3, 2, 2); }

/// Random game with d < S A1 A2: features are probability vectors over d
/// latent factors, each factor k has its own next-state law mu_h(., k) and
/// reward theta_h(k) in [0, 1].
inline TabularLinearMG random_factored_game(std::uint64_t seed, int horizon, int num_states,
                                            int num_actions_max, int num_actions_min,
                                            int feature_dim) {
  Rng rng(seed);
  LinearGameSpec g;
  g.horizon = horizon;
  g.num_states = num_states;
  g.num_actions_max = num_actions_max;
  g.num_actions_min = num_actions_min;
  g.feature_dim = feature_dim;
  const int C = num_states * num_actions_max * num_actions_min;
  const int d = feature_dim;
  auto simplex = [&](double* out, int n) {
    double total = 0.0;
    for (int k = 0; k < n; ++k) total += out[k] = -std::log(1.0 - rng.uniform());
    for (int k = 0; k < n; ++k) out[k] /= total;
  };
  g.features.resize(static_cast<std::size_t>(C) * d);
  for (int c = 0; c < C; ++c) simplex(&g.features[static_cast<std::size_t>(c) * d], d);
  g.theta.resize(static_cast<std::size_t>(horizon) * d);
  for (double& t : g.theta) t = rng.uniform();
  g.mu.assign(static_cast<std::size_t>(horizon) * num_states * d, 0.0);
  std::vector<double> law(num_states);
  for (int h = 0; h < horizon; ++h)
    for (int k = 0; k < d; ++k) {
      simplex(law.data(), num_states);
      for (int n = 0; n < num_states; ++n)
        g.mu[(static_cast<std::size_t>(h) * num_states + n) * d + k] = law[n];
    }
  g.reward.resize(static_cast<std::size_t>(horizon) * C);
  g.transition.resize(static_cast<std::size_t>(horizon) * C * num_states);
  for (int h = 0; h < horizon; ++h)
    for (int c = 0; c < C; ++c) {
      const double* phi = &g.features[static_cast<std::size_t>(c) * d];
      double r = 0.0;
      for (int k = 0; k < d; ++k) r += phi[k] * g.theta[static_cast<std::size_t>(h) * d + k];
      g.reward[static_cast<std::size_t>(h) * C + c] = r;
      for (int n = 0; n < num_states; ++n) {
        double p = 0.0;
        for (int k = 0; k < d; ++k)
          p += phi[k] * g.mu[(static_cast<std::size_t>(h) * num_states + n) * d + k];
        g.transition[(static_cast<std::size_t>(h) * C + c) * num_states + n] = p;
      }
    }
  return TabularLinearMG(std::move(g), Regularity::Strict);
}

}  // namespace pmvi
