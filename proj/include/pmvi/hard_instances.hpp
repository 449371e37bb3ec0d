#pragma once

// Two-point lower-bound family. States x0 (initial), x1, x2; both players
// have A actions. From x0 at the first step the max-player's action i moves
// to x1 with probability p_i and to x2 otherwise (p_i = p3 for i >= 3). x1
// and x2 are absorbing and pay 1 and 0 per later step. x0 is unreachable
// after the first step; it is made absorbing with reward 0 so the model is
// defined everywhere.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pmvi/dataset.hpp"
#include "pmvi/error.hpp"
#include "pmvi/evaluation.hpp"
#include "pmvi/markov_game.hpp"
#include "pmvi/parallel.hpp"
#include "pmvi/random.hpp"
#include "pmvi/uncertainty.hpp"
#include "pmvi/value_iteration.hpp"

namespace pmvi {

inline constexpr int kX0 = 0, kX1 = 1, kX2 = 2;

struct LowerBoundFamily {
  int num_actions = 3;
  int horizon = 3;
  double p1 = 0.5;
  double p2 = 0.5;

  double p3() const { return std::min(p1, p2); }
  double p(int action) const { return action == 0 ? p1 : action == 1 ? p2 : p3(); }
};

inline TabularLinearMG build_game(const LowerBoundFamily& f) {
  require(f.num_actions >= 3, ErrorKind::InvalidArgument, "hard family needs A >= 3");
  require(f.horizon >= 2, ErrorKind::InvalidArgument, "hard family needs H >= 2");
  require(f.p1 >= 0.25 && f.p1 <= 0.75 && f.p2 >= 0.25 && f.p2 <= 0.75,
          ErrorKind::InvalidArgument, "hard family needs p1, p2 in [1/4, 3/4]");
  const int A = f.num_actions, H = f.horizon, S = 3;
  const int d = A * A + 2;
  const int C = S * A * A;

  LinearGameSpec g;
  g.horizon = H;
  g.num_states = S;
  g.num_actions_max = A;
  g.num_actions_min = A;
  g.feature_dim = d;
  g.initial_state = kX0;
  g.features.assign(static_cast<std::size_t>(C) * d, 0.0);
  auto coord = [&](int s, int i, int j) { return s == kX0 ? i * A + j : A * A + (s - 1); };
  for (int s = 0; s < S; ++s)
    for (int i = 0; i < A; ++i)
      for (int j = 0; j < A; ++j)
        g.features[static_cast<std::size_t>((s * A + i) * A + j) * d + coord(s, i, j)] = 1.0;

  g.transition.assign(static_cast<std::size_t>(H) * C * S, 0.0);
  g.reward.assign(static_cast<std::size_t>(H) * C, 0.0);
  g.theta.assign(static_cast<std::size_t>(H) * d, 0.0);
  g.mu.assign(static_cast<std::size_t>(H) * S * d, 0.0);
  auto mu = [&](int h, int next, int k) -> double& {
    return g.mu[(static_cast<std::size_t>(h) * S + next) * d + k];
  };
  for (int h = 0; h < H; ++h) {
    for (int i = 0; i < A; ++i)
      for (int j = 0; j < A; ++j) {
        const int k = i * A + j;
        if (h == 0) {
          mu(h, kX1, k) = f.p(i);
          mu(h, kX2, k) = 1.0 - f.p(i);
        } else {
          mu(h, kX0, k) = 1.0;
        }
      }
    mu(h, kX1, A * A) = 1.0;
    mu(h, kX2, A * A + 1) = 1.0;
    if (h >= 1) g.theta[static_cast<std::size_t>(h) * d + A * A] = 1.0;

    for (int s = 0; s < S; ++s)
      for (int i = 0; i < A; ++i)
        for (int j = 0; j < A; ++j) {
          const std::size_t c = static_cast<std::size_t>((s * A + i) * A + j);
          const int k = coord(s, i, j);
          for (int n = 0; n < S; ++n)
            g.transition[(static_cast<std::size_t>(h) * C + c) * S + n] = mu(h, n, k);
          g.reward[static_cast<std::size_t>(h) * C + c] =
              g.theta[static_cast<std::size_t>(h) * d + k];
        }
  }
  return TabularLinearMG(std::move(g), Regularity::Strict);
}

inline TabularLinearMG build_game(double p1, double p2, int num_actions, int horizon) {
  return build_game(LowerBoundFamily{num_actions, horizon, p1, p2});
}

struct LeCamPair {
  LowerBoundFamily family1;  // M(p*, p, p)
  LowerBoundFamily family2;  // M(p, p*, p)
  TabularLinearMG game1;
  TabularLinearMG game2;
  double p = 0.0;
  double p_star = 0.0;
  long long n1 = 0;  // first-step plays of y1
  long long n2 = 0;  // first-step plays of y2
};

/// p, p* = 1/2 -+ (1/16) sqrt(2 / (n1 + n2)) with n_i the schedule's
/// first-step count of max-player action y_i.
inline LeCamPair le_cam_pair(const ActionSchedule& schedule, int num_actions, int horizon) {
  long long n1 = 0, n2 = 0;
  for (const auto& [a, b] : schedule) {
    require(a >= 0 && a < num_actions && b >= 0 && b < num_actions, ErrorKind::OutOfRange,
            "scheduled action index out of range");
    n1 += a == 0;
    n2 += a == 1;
  }
  require(n1 + n2 >= 1, ErrorKind::InvalidArgument,
          "schedule never plays y1 or y2, so the two games cannot be told apart");
  const double delta = std::sqrt(2.0 / static_cast<double>(n1 + n2)) / 16.0;
  const double p = 0.5 - delta, p_star = 0.5 + delta;
  require(p >= 0.25 && p_star <= 0.75, ErrorKind::InvariantViolation,
          "tuned probabilities left [1/4, 3/4] (bug)");
  LowerBoundFamily f1{num_actions, horizon, p_star, p};
  LowerBoundFamily f2{num_actions, horizon, p, p_star};
  return {f1, f2, build_game(f1), build_game(f2), p, p_star, n1, n2};
}

/// Closed-form KL(P_{D~M1} || P_{D~M2}) of the first-step transitions.
inline double dataset_kl(const LowerBoundFamily& m1, const LowerBoundFamily& m2,
                         const CountStats& counts) {
  require(m1.num_actions == counts.num_actions_max, ErrorKind::InvalidArgument,
          "count statistics do not match the family");
  auto bern_kl = [](double a, double b) {
    require(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0, ErrorKind::InvalidArgument,
            "KL needs probabilities strictly inside (0, 1)");
    return a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
  };
  double kl = 0.0;
  for (int i = 0; i < m1.num_actions; ++i) {
    const long long n = counts.row_counts[i];
    if (n == 0 || m1.p(i) == m2.p(i)) continue;
    kl += static_cast<double>(n) * bern_kl(m1.p(i), m2.p(i));
  }
  return kl;
}

/// m_i >= K/4 - sqrt(K log(2K) / 2) for both absorbing states.
inline bool hoeffding_event(const CountStats& counts) {
  const double K = static_cast<double>(counts.total);
  if (K < 1.0) return false;
  const double threshold = K / 4.0 - std::sqrt(K * std::log(2.0 * K) / 2.0);
  return static_cast<double>(counts.next_state_counts[kX1]) >= threshold &&
         static_cast<double>(counts.next_state_counts[kX2]) >= threshold;
}

/// Maps (game, dataset) to an output policy pair. PMVI only reads the
/// game's feature map; an oracle may use the full model.
using OfflineAlgorithm =
    std::function<PolicyPair(const TabularLinearMG& game, const OfflineDataset& data)>;

inline OfflineAlgorithm pmvi_algorithm(PmviConfig config = {}) {
  return [config](const TabularLinearMG& game, const OfflineDataset& data) {
    return run_pmvi(game, data, config).policies();
  };
}

struct RiskRow {
  int game_id = 1;
  std::uint64_t seed = 0;
  long long K = 0;
  double subb = 0.0;
  double ru = 0.0;
  double subb_over_ru = 0.0;
  double p_star_minus_p = 0.0;
  double pi_hat_y1 = 0.0;  // pi_hat_1(y1 | x0)
  double pi_hat_y2 = 0.0;
  double kl = 0.0;
  bool hoeffding = false;
};

struct RiskSummary {
  double mean_subb[2] = {0.0, 0.0};
  double mean_subb_over_ru[2] = {0.0, 0.0};
  double mean_one_minus_pi_y1_m1 = 0.0;  // E_{M1}[1 - pi_hat(y1)]
  double mean_pi_y1_m2 = 0.0;            // E_{M2}[pi_hat(y1)]
  double gap_scale = 0.0;                // (H - 1)(p* - p)
  double identity_error = 0.0;           // max per-seed |subb - scale (1 - pi_hat(y_g))|
  double reduction_lhs = 0.0;            // E_{M1}[subb] + E_{M2}[subb]
  double reduction_rhs = 0.0;
  double kl = 0.0;
  double p = 0.0;
  double p_star = 0.0;
  double hoeffding_frequency = 0.0;

  int worse_game() const { return mean_subb_over_ru[1] > mean_subb_over_ru[0] ? 2 : 1; }
  double worse_ratio() const { return std::max(mean_subb_over_ru[0], mean_subb_over_ru[1]); }
};

struct RiskTable {
  std::vector<RiskRow> rows;  // seed-major, game 1 before game 2
  RiskSummary summary;
};

/// Identity is only exact up to float noise; anything above this is a bug.
inline constexpr double kReductionTol = 1e-9;

inline RiskTable run_lower_bound_experiment(const OfflineAlgorithm& algorithm,
                                            const ActionSchedule& schedule,
                                            const std::vector<std::uint64_t>& seeds,
                                            int num_actions = 3, int horizon = 3, int jobs = 1) {
  require(!seeds.empty(), ErrorKind::InvalidArgument, "need at least one seed");
  const auto pair = le_cam_pair(schedule, num_actions, horizon);
  const double scale = (horizon - 1) * (pair.p_star - pair.p);
  const TabularLinearMG* games[2] = {&pair.game1, &pair.game2};
  const NashValues nash[2] = {exact_nash_values(pair.game1), exact_nash_values(pair.game2)};

  auto one = [&](std::size_t idx) {
    const int g = static_cast<int>(idx % 2);
    const std::uint64_t seed = seeds[idx / 2];
    const auto& game = *games[g];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(g + 1)));
    const auto data = collect_predetermined(game, schedule, rng);
    const auto policies = algorithm(game, data);
    const auto report = suboptimality(game, policies.max_player, policies.min_player, nash[g]);
    RiskRow row;
    row.game_id = g + 1;
    row.seed = seed;
    row.K = static_cast<long long>(schedule.size());
    row.subb = report.subb;
    row.ru = relative_uncertainty(game, data, nash[g]).ru;
    row.subb_over_ru = row.subb / row.ru;
    row.p_star_minus_p = pair.p_star - pair.p;
    row.pi_hat_y1 = policies.max_player(0, kX0, 0);
    row.pi_hat_y2 = policies.max_player(0, kX0, 1);
    const auto counts = count_stats(data, game);
    row.kl = dataset_kl(pair.family1, pair.family2, counts);
    row.hoeffding = hoeffding_event(counts);
    return row;
  };

  RiskTable table;
  table.rows = parallel_map<RiskRow>(seeds.size() * 2, jobs, one);

  auto& s = table.summary;
  s.gap_scale = scale;
  s.p = pair.p;
  s.p_star = pair.p_star;
  const double n = static_cast<double>(seeds.size());
  long long hoeffding_hits = 0;
  for (const auto& row : table.rows) {
    const int g = row.game_id - 1;
    s.mean_subb[g] += row.subb / n;
    s.mean_subb_over_ru[g] += row.subb_over_ru / n;
    const double own = g == 0 ? row.pi_hat_y1 : row.pi_hat_y2;
    s.identity_error = std::max(s.identity_error, std::abs(row.subb - scale * (1.0 - own)));
    if (g == 0) s.mean_one_minus_pi_y1_m1 += (1.0 - row.pi_hat_y1) / n;
    if (g == 1) s.mean_pi_y1_m2 += row.pi_hat_y1 / n;
    hoeffding_hits += row.hoeffding;
    s.kl = row.kl;
  }
  s.hoeffding_frequency = static_cast<double>(hoeffding_hits) / (2.0 * n);
  s.reduction_lhs = s.mean_subb[0] + s.mean_subb[1];
  s.reduction_rhs = scale * (s.mean_one_minus_pi_y1_m1 + s.mean_pi_y1_m2);
  if (s.identity_error > kReductionTol || s.reduction_lhs < s.reduction_rhs - kReductionTol)
    fail(ErrorKind::InvariantViolation,
         "reduction-to-testing identity violated by " + std::to_string(s.identity_error) +
             " (bug)");
  return table;
}

}  // namespace pmvi
