#pragma once

// Offline trajectories collected from a game, either by a fixed behavior
// policy pair or by a predetermined first-step action schedule, and the
// count statistics derived from them.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmvi/error.hpp"
#include "pmvi/markov_game.hpp"
#include "pmvi/random.hpp"

namespace pmvi {

struct Transition {
  int h = 0;
  int s = 0;
  int a = 0;
  int b = 0;
  double r = 0.0;
  int s_next = 0;

  bool operator==(const Transition&) const = default;
};

struct Trajectory {
  std::vector<Transition> steps;

  bool operator==(const Trajectory&) const = default;
};

enum class Provenance { BehaviorPolicy, PredeterminedSchedule };

inline const char* to_string(Provenance p) {
  return p == Provenance::BehaviorPolicy ? "behavior-policy" : "predetermined-schedule";
}

struct OfflineDataset {
  int horizon = 0;
  int initial_state = 0;
  Provenance provenance = Provenance::BehaviorPolicy;
  std::vector<Trajectory> trajectories;

  int num_trajectories() const noexcept { return static_cast<int>(trajectories.size()); }

  /// Throws unless every trajectory has H chained steps from the initial state.
  void check_structure() const {
    for (std::size_t t = 0; t < trajectories.size(); ++t) {
      const auto& steps = trajectories[t].steps;
      require(steps.size() == static_cast<std::size_t>(horizon), ErrorKind::InvariantViolation,
              "trajectory " + std::to_string(t) + " does not have H steps");
      for (int h = 0; h < horizon; ++h) {
        require(steps[h].h == h, ErrorKind::InvariantViolation,
                "trajectory " + std::to_string(t) + " has out-of-order steps");
        if (h == 0)
          require(steps[0].s == initial_state, ErrorKind::InvariantViolation,
                  "trajectory " + std::to_string(t) + " does not start at the initial state");
        else
          require(steps[h].s == steps[h - 1].s_next, ErrorKind::InvariantViolation,
                  "trajectory " + std::to_string(t) + " is not chained at h=" + std::to_string(h));
      }
    }
  }

  /// Throws unless indices fit the game.
  void check_against(const TabularLinearMG& game) const {
    require(horizon == game.horizon(), ErrorKind::InvalidArgument,
            "dataset horizon does not match the game");
    require(initial_state == game.initial_state(), ErrorKind::InvalidArgument,
            "dataset initial state does not match the game");
    check_structure();
    for (const auto& traj : trajectories)
      for (const auto& st : traj.steps) {
        game.check_indices(st.h, st.s, st.a, st.b);
        require(st.s_next >= 0 && st.s_next < game.num_states(), ErrorKind::OutOfRange,
                "next-state index out of range");
      }
  }

  bool operator==(const OfflineDataset&) const = default;
};

inline OfflineDataset collect_behavior(const TabularLinearMG& game, const MarkovPolicy& behavior_max,
                                       const MarkovPolicy& behavior_min, long long num_trajectories,
                                       Rng& rng) {
  require(num_trajectories >= 0, ErrorKind::InvalidArgument,
          "number of trajectories must be non-negative");
  behavior_max.check_against(game, Player::Max);
  behavior_min.check_against(game, Player::Min);
  OfflineDataset data;
  data.horizon = game.horizon();
  data.initial_state = game.initial_state();
  data.provenance = Provenance::BehaviorPolicy;
  data.trajectories.resize(static_cast<std::size_t>(num_trajectories));
  for (auto& traj : data.trajectories) {
    traj.steps.resize(static_cast<std::size_t>(game.horizon()));
    int s = game.initial_state();
    for (int h = 0; h < game.horizon(); ++h) {
      const int a = rng.categorical(behavior_max.probs(h, s));
      const int b = rng.categorical(behavior_min.probs(h, s));
      const auto step = sample_step(game, h, s, a, b, rng);
      traj.steps[h] = {h, s, a, b, step.reward, step.next_state};
      s = step.next_state;
    }
  }
  return data;
}

/// Schedule of first-step action pairs, one per trajectory.
using ActionSchedule = std::vector<std::pair<int, int>>;

/// First-step actions follow the schedule; later steps play action 0 for
/// both players.
inline OfflineDataset collect_predetermined(const TabularLinearMG& game,
                                            const ActionSchedule& schedule, Rng& rng) {
  for (const auto& [a, b] : schedule)
    require(a >= 0 && a < game.num_actions_max() && b >= 0 && b < game.num_actions_min(),
            ErrorKind::OutOfRange, "scheduled action index out of range");
  OfflineDataset data;
  data.horizon = game.horizon();
  data.initial_state = game.initial_state();
  data.provenance = Provenance::PredeterminedSchedule;
  data.trajectories.resize(schedule.size());
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    auto& steps = data.trajectories[t].steps;
    steps.resize(static_cast<std::size_t>(game.horizon()));
    int s = game.initial_state();
    for (int h = 0; h < game.horizon(); ++h) {
      const int a = h == 0 ? schedule[t].first : 0;
      const int b = h == 0 ? schedule[t].second : 0;
      const auto step = sample_step(game, h, s, a, b, rng);
      steps[h] = {h, s, a, b, step.reward, step.next_state};
      s = step.next_state;
    }
  }
  return data;
}

/// Cycles through every (i, j) pair in row-major order.
inline ActionSchedule balanced_schedule(int num_actions_max, int num_actions_min,
                                        long long num_trajectories) {
  require(num_trajectories >= 0, ErrorKind::InvalidArgument,
          "number of trajectories must be non-negative");
  ActionSchedule out;
  out.reserve(static_cast<std::size_t>(num_trajectories));
  const long long cells = static_cast<long long>(num_actions_max) * num_actions_min;
  for (long long t = 0; t < num_trajectories; ++t)
    out.emplace_back(static_cast<int>((t % cells) / num_actions_min),
                     static_cast<int>(t % num_actions_min));
  return out;
}

/// First-step count statistics.
struct CountStats {
  int num_actions_max = 0;
  int num_actions_min = 0;
  int num_states = 0;
  long long total = 0;
  std::vector<long long> pair_counts;        // n_ij, row-major A1 x A2
  std::vector<long long> action_next_counts;  // kappa_i^{s'}, row-major A1 x S
  std::vector<long long> row_counts;         // n_i
  std::vector<long long> next_state_counts;  // m_{s'}

  long long n(int i, int j) const { return pair_counts[static_cast<std::size_t>(i) * num_actions_min + j]; }
  long long kappa(int i, int next) const {
    return action_next_counts[static_cast<std::size_t>(i) * num_states + next];
  }

  /// min{min_j n_kj, min_i n_ik}; a side is skipped when k exceeds its action count.
  long long n_min(int k) const {
    long long best = std::numeric_limits<long long>::max();
    if (k < num_actions_max)
      for (int j = 0; j < num_actions_min; ++j) best = std::min(best, n(k, j));
    if (k < num_actions_min)
      for (int i = 0; i < num_actions_max; ++i) best = std::min(best, n(i, k));
    require(best != std::numeric_limits<long long>::max(), ErrorKind::OutOfRange,
            "action index out of range for n_min");
    return best;
  }
};

inline CountStats count_stats(const OfflineDataset& data, const TabularLinearMG& game) {
  CountStats c;
  c.num_actions_max = game.num_actions_max();
  c.num_actions_min = game.num_actions_min();
  c.num_states = game.num_states();
  c.total = data.num_trajectories();
  c.pair_counts.assign(static_cast<std::size_t>(c.num_actions_max) * c.num_actions_min, 0);
  c.action_next_counts.assign(static_cast<std::size_t>(c.num_actions_max) * c.num_states, 0);
  c.row_counts.assign(c.num_actions_max, 0);
  c.next_state_counts.assign(c.num_states, 0);
  for (const auto& traj : data.trajectories) {
    require(!traj.steps.empty(), ErrorKind::InvalidArgument, "trajectory has no steps");
    const auto& st = traj.steps.front();
    ++c.pair_counts[static_cast<std::size_t>(st.a) * c.num_actions_min + st.b];
    ++c.action_next_counts[static_cast<std::size_t>(st.a) * c.num_states + st.s_next];
    ++c.row_counts[st.a];
    ++c.next_state_counts[st.s_next];
  }
  return c;
}

}  // namespace pmvi
