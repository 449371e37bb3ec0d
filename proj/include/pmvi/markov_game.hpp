#pragma once

// Finite-horizon two-player zero-sum Markov games whose rewards and
// transitions factor through a known feature map, plus the policy and
// value-table types shared by every other module.
//
// All step indices are 0-based: h = 0 is the first step and a value table
// has H + 1 rows, the last one being the terminal zero row.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pmvi/error.hpp"
#include "pmvi/random.hpp"

namespace pmvi {

enum class Player { Max, Min };

inline const char* to_string(Player p) { return p == Player::Max ? "max" : "min"; }

/// Whether violated norm-regularity bounds are reported or rejected.
/// Linear consistency and stochasticity are always hard errors.
enum class Regularity { Warn, Strict };

inline constexpr double kStochasticTol = 1e-12;
inline constexpr double kLinearTol = 1e-10;

namespace detail {

inline std::string index_string(int h, int s, int a, int b) {
  std::ostringstream os;
  os << "(h=" << h << ", s=" << s << ", a=" << a << ", b=" << b << ")";
  return os.str();
}

inline double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace detail

/// Raw tensors describing a linear Markov game, flattened row-major:
///   transition[h][s][a][b][s'], reward[h][s][a][b], features[s][a][b][k],
///   theta[h][k], mu[h][s'][k].
struct LinearGameSpec {
  int horizon = 0;
  int num_states = 0;
  int num_actions_max = 0;
  int num_actions_min = 0;
  int feature_dim = 0;
  int initial_state = 0;
  std::vector<double> transition;
  std::vector<double> reward;
  std::vector<double> features;
  std::vector<double> theta;
  std::vector<double> mu;
};

/// Tabular game without an explicit feature map; see one_hot_featurize.
struct TabularGameSpec {
  int horizon = 0;
  int num_states = 0;
  int num_actions_max = 0;
  int num_actions_min = 0;
  int initial_state = 0;
  std::vector<double> transition;
  std::vector<double> reward;
};

class TabularLinearMG {
 public:
  explicit TabularLinearMG(LinearGameSpec spec, Regularity regularity = Regularity::Warn)
      : spec_(std::move(spec)) {
    validate(regularity);
  }

  int horizon() const noexcept { return spec_.horizon; }
  int num_states() const noexcept { return spec_.num_states; }
  int num_actions_max() const noexcept { return spec_.num_actions_max; }
  int num_actions_min() const noexcept { return spec_.num_actions_min; }
  int num_actions(Player p) const noexcept {
    return p == Player::Max ? spec_.num_actions_max : spec_.num_actions_min;
  }
  int feature_dim() const noexcept { return spec_.feature_dim; }
  int initial_state() const noexcept { return spec_.initial_state; }
  int num_cells() const noexcept {
    return spec_.num_states * spec_.num_actions_max * spec_.num_actions_min;
  }

  /// Flat index of (s, a, b) used by every per-cell table.
  int cell(int s, int a, int b) const noexcept {
    return (s * spec_.num_actions_max + a) * spec_.num_actions_min + b;
  }

  double transition(int h, int s, int a, int b, int next) const {
    return next_state_distribution(h, s, a, b)[static_cast<std::size_t>(next)];
  }
  std::span<const double> next_state_distribution(int h, int s, int a, int b) const {
    const auto off = (static_cast<std::size_t>(h) * num_cells() + cell(s, a, b)) *
                     static_cast<std::size_t>(spec_.num_states);
    return {spec_.transition.data() + off, static_cast<std::size_t>(spec_.num_states)};
  }
  double reward(int h, int s, int a, int b) const {
    return spec_.reward[static_cast<std::size_t>(h) * num_cells() + cell(s, a, b)];
  }
  std::span<const double> feature(int s, int a, int b) const {
    return feature_of_cell(cell(s, a, b));
  }
  std::span<const double> feature_of_cell(int c) const {
    const auto d = static_cast<std::size_t>(spec_.feature_dim);
    return {spec_.features.data() + static_cast<std::size_t>(c) * d, d};
  }
  std::span<const double> theta(int h) const {
    const auto d = static_cast<std::size_t>(spec_.feature_dim);
    return {spec_.theta.data() + static_cast<std::size_t>(h) * d, d};
  }
  std::span<const double> mu(int h, int next) const {
    const auto d = static_cast<std::size_t>(spec_.feature_dim);
    const auto off = (static_cast<std::size_t>(h) * spec_.num_states + next) * d;
    return {spec_.mu.data() + off, d};
  }

  const LinearGameSpec& spec() const noexcept { return spec_; }

  /// Norm-regularity bounds that failed under Regularity::Warn.
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  void check_step(int h) const {
    if (h < 0 || h >= spec_.horizon)
      fail(ErrorKind::OutOfRange, "step index " + std::to_string(h) + " outside [0, " +
                                      std::to_string(spec_.horizon) + ")");
  }
  void check_indices(int h, int s, int a, int b) const {
    check_step(h);
    if (s < 0 || s >= spec_.num_states || a < 0 || a >= spec_.num_actions_max || b < 0 ||
        b >= spec_.num_actions_min)
      fail(ErrorKind::OutOfRange, "index out of range " + detail::index_string(h, s, a, b));
  }

  /// Largest |P - phi^T mu| and |r - phi^T theta| over all entries.
  std::pair<double, double> linear_residuals() const {
    double p_res = 0.0;
    double r_res = 0.0;
    const int d = spec_.feature_dim;
    for (int h = 0; h < spec_.horizon; ++h) {
      for (int c = 0; c < num_cells(); ++c) {
        const auto phi = feature_of_cell(c);
        const auto th = theta(h);
        double rr = 0.0;
        for (int k = 0; k < d; ++k) rr += phi[k] * th[k];
        const double r = spec_.reward[static_cast<std::size_t>(h) * num_cells() + c];
        r_res = std::max(r_res, std::abs(r - rr));
        for (int n = 0; n < spec_.num_states; ++n) {
          const auto m = mu(h, n);
          double pp = 0.0;
          for (int k = 0; k < d; ++k) pp += phi[k] * m[k];
          const double p =
              spec_.transition[(static_cast<std::size_t>(h) * num_cells() + c) * spec_.num_states +
                               n];
          p_res = std::max(p_res, std::abs(p - pp));
        }
      }
    }
    return {p_res, r_res};
  }

 private:
  void validate(Regularity regularity) {
    const auto& g = spec_;
    require(g.horizon >= 1 && g.num_states >= 1 && g.num_actions_max >= 1 &&
                g.num_actions_min >= 1 && g.feature_dim >= 1,
            ErrorKind::InvalidArgument, "game dimensions must be positive");
    require(g.initial_state >= 0 && g.initial_state < g.num_states, ErrorKind::InvalidArgument,
            "initial state out of range");
    const auto H = static_cast<std::size_t>(g.horizon);
    const auto S = static_cast<std::size_t>(g.num_states);
    const auto C = static_cast<std::size_t>(num_cells());
    const auto d = static_cast<std::size_t>(g.feature_dim);
    require(g.transition.size() == H * C * S, ErrorKind::InvalidArgument,
            "transition tensor has wrong size");
    require(g.reward.size() == H * C, ErrorKind::InvalidArgument, "reward tensor has wrong size");
    require(g.features.size() == C * d, ErrorKind::InvalidArgument,
            "feature tensor has wrong size");
    require(g.theta.size() == H * d, ErrorKind::InvalidArgument, "theta has wrong size");
    require(g.mu.size() == H * S * d, ErrorKind::InvalidArgument, "mu has wrong size");
    for (const auto* v : {&g.transition, &g.reward, &g.features, &g.theta, &g.mu})
      for (double x : *v)
        require(std::isfinite(x), ErrorKind::InvalidArgument, "game contains non-finite entry");

    for (int h = 0; h < g.horizon; ++h)
      for (int s = 0; s < g.num_states; ++s)
        for (int a = 0; a < g.num_actions_max; ++a)
          for (int b = 0; b < g.num_actions_min; ++b) {
            double total = 0.0;
            for (double p : next_state_distribution(h, s, a, b)) {
              if (p < 0.0)
                fail(ErrorKind::InvariantViolation,
                     "negative transition probability at " + detail::index_string(h, s, a, b));
              total += p;
            }
            if (std::abs(total - 1.0) > kStochasticTol)
              fail(ErrorKind::InvariantViolation,
                   "transition row does not sum to 1 at " + detail::index_string(h, s, a, b));
          }

    const auto [p_res, r_res] = linear_residuals();
    if (p_res > kLinearTol || r_res > kLinearTol) {
      std::ostringstream os;
      os << "game is not linear in its features: max |P - phi.mu| = " << p_res
         << ", max |r - phi.theta| = " << r_res;
      fail(ErrorKind::InvariantViolation, os.str());
    }

    std::vector<std::string> issues;
    const double root_d = std::sqrt(static_cast<double>(g.feature_dim));
    for (int c = 0; c < num_cells(); ++c)
      if (detail::norm2(feature_of_cell(c)) > 1.0 + 1e-12) {
        issues.push_back("feature norm exceeds 1 at cell " + std::to_string(c));
        break;
      }
    for (int h = 0; h < g.horizon; ++h) {
      if (detail::norm2(theta(h)) > root_d + 1e-12)
        issues.push_back("||theta_h|| exceeds sqrt(d) at h=" + std::to_string(h));
      std::vector<double> total(d, 0.0);
      for (int n = 0; n < g.num_states; ++n) {
        const auto m = mu(h, n);
        for (std::size_t k = 0; k < d; ++k) total[k] += m[k];
      }
      if (detail::norm2(total) > root_d + 1e-12)
        issues.push_back("||mu_h(S)|| exceeds sqrt(d) at h=" + std::to_string(h));
    }
    for (double r : g.reward)
      if (r < 0.0 || r > 1.0) {
        issues.push_back("rewards fall outside [0, 1]");
        break;
      }
    if (!issues.empty() && regularity == Regularity::Strict)
      fail(ErrorKind::InvariantViolation, "regularity check failed: " + issues.front());
    warnings_ = std::move(issues);
  }

  LinearGameSpec spec_;
  std::vector<std::string> warnings_;
};

/// Q-values q[h][s][a][b] for h in [0, H).
class QTable {
 public:
  QTable() = default;
  QTable(int horizon, int num_states, int num_actions_max, int num_actions_min, double fill = 0.0)
      : horizon_(horizon),
        num_states_(num_states),
        a1_(num_actions_max),
        a2_(num_actions_min),
        data_(static_cast<std::size_t>(horizon) * num_states * num_actions_max * num_actions_min,
              fill) {}
  explicit QTable(const TabularLinearMG& game, double fill = 0.0)
      : QTable(game.horizon(), game.num_states(), game.num_actions_max(), game.num_actions_min(),
               fill) {}

  int horizon() const noexcept { return horizon_; }
  int num_states() const noexcept { return num_states_; }
  int num_actions_max() const noexcept { return a1_; }
  int num_actions_min() const noexcept { return a2_; }

  double& operator()(int h, int s, int a, int b) { return data_[index(h, s, a, b)]; }
  double operator()(int h, int s, int a, int b) const { return data_[index(h, s, a, b)]; }

  /// Payoff matrix Q[h][s][., .], row-major A1 x A2.
  std::span<double> matrix(int h, int s) {
    return {data_.data() + index(h, s, 0, 0), static_cast<std::size_t>(a1_ * a2_)};
  }
  std::span<const double> matrix(int h, int s) const {
    return {data_.data() + index(h, s, 0, 0), static_cast<std::size_t>(a1_ * a2_)};
  }
  /// All cells of step h, indexed like TabularLinearMG::cell.
  std::span<double> step(int h) {
    return {data_.data() + index(h, 0, 0, 0), static_cast<std::size_t>(num_states_ * a1_ * a2_)};
  }
  std::span<const double> step(int h) const {
    return {data_.data() + index(h, 0, 0, 0), static_cast<std::size_t>(num_states_ * a1_ * a2_)};
  }

  const std::vector<double>& data() const noexcept { return data_; }
  bool operator==(const QTable&) const = default;

 private:
  std::size_t index(int h, int s, int a, int b) const noexcept {
    return ((static_cast<std::size_t>(h) * num_states_ + s) * a1_ + a) * a2_ + b;
  }

  int horizon_ = 0, num_states_ = 0, a1_ = 0, a2_ = 0;
  std::vector<double> data_;
};

/// State values v[h][s] for h in [0, H]; row H is the terminal row.
class VTable {
 public:
  VTable() = default;
  VTable(int horizon, int num_states)
      : horizon_(horizon),
        num_states_(num_states),
        data_(static_cast<std::size_t>(horizon + 1) * num_states, 0.0) {}
  explicit VTable(const TabularLinearMG& game) : VTable(game.horizon(), game.num_states()) {}

  int horizon() const noexcept { return horizon_; }
  int num_states() const noexcept { return num_states_; }

  double& operator()(int h, int s) { return data_[static_cast<std::size_t>(h) * num_states_ + s]; }
  double operator()(int h, int s) const {
    return data_[static_cast<std::size_t>(h) * num_states_ + s];
  }
  std::span<double> step(int h) {
    return {data_.data() + static_cast<std::size_t>(h) * num_states_,
            static_cast<std::size_t>(num_states_)};
  }
  std::span<const double> step(int h) const {
    return {data_.data() + static_cast<std::size_t>(h) * num_states_,
            static_cast<std::size_t>(num_states_)};
  }

  bool operator==(const VTable&) const = default;

 private:
  int horizon_ = 0, num_states_ = 0;
  std::vector<double> data_;
};

/// Per-step, per-state action distribution for one player.
class MarkovPolicy {
 public:
  MarkovPolicy() = default;
  MarkovPolicy(Player owner, int horizon, int num_states, int num_actions,
               std::vector<double> table)
      : owner_(owner),
        horizon_(horizon),
        num_states_(num_states),
        num_actions_(num_actions),
        probs_(std::move(table)) {
    require(horizon >= 1 && num_states >= 1 && num_actions >= 1, ErrorKind::InvalidArgument,
            "policy dimensions must be positive");
    require(probs_.size() == static_cast<std::size_t>(horizon) * num_states * num_actions,
            ErrorKind::InvalidArgument, "policy table has wrong size");
    for (int h = 0; h < horizon; ++h)
      for (int s = 0; s < num_states; ++s) {
        double total = 0.0;
        for (double p : probs(h, s)) {
          if (!(p >= 0.0))
            fail(ErrorKind::InvalidArgument, "policy has a negative or NaN probability at h=" +
                                                 std::to_string(h) + ", s=" + std::to_string(s));
          total += p;
        }
        if (std::abs(total - 1.0) > kStochasticTol)
          fail(ErrorKind::InvalidArgument, "policy distribution does not sum to 1 at h=" +
                                               std::to_string(h) + ", s=" + std::to_string(s));
      }
  }

  static MarkovPolicy uniform(Player owner, int horizon, int num_states, int num_actions) {
    return MarkovPolicy(
        owner, horizon, num_states, num_actions,
        std::vector<double>(static_cast<std::size_t>(horizon) * num_states * num_actions,
                            1.0 / num_actions));
  }
  static MarkovPolicy uniform(const TabularLinearMG& game, Player owner) {
    return uniform(owner, game.horizon(), game.num_states(), game.num_actions(owner));
  }

  /// The same action in every (h, s).
  static MarkovPolicy constant(const TabularLinearMG& game, Player owner, int action) {
    const int A = game.num_actions(owner);
    require(action >= 0 && action < A, ErrorKind::OutOfRange, "action index out of range");
    std::vector<double> p(static_cast<std::size_t>(game.horizon()) * game.num_states() * A, 0.0);
    for (std::size_t i = 0; i < p.size(); i += A) p[i + action] = 1.0;
    return MarkovPolicy(owner, game.horizon(), game.num_states(), A, std::move(p));
  }

  /// Deterministic policy from actions[h * S + s].
  static MarkovPolicy deterministic(Player owner, int horizon, int num_states, int num_actions,
                                    std::span<const int> actions) {
    require(actions.size() == static_cast<std::size_t>(horizon) * num_states,
            ErrorKind::InvalidArgument, "action table has wrong size");
    std::vector<double> p(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0);
    for (std::size_t i = 0; i < actions.size(); ++i) {
      require(actions[i] >= 0 && actions[i] < num_actions, ErrorKind::OutOfRange,
              "action index out of range");
      p[i * num_actions + actions[i]] = 1.0;
    }
    return MarkovPolicy(owner, horizon, num_states, num_actions, std::move(p));
  }

  Player owner() const noexcept { return owner_; }
  int horizon() const noexcept { return horizon_; }
  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }

  std::span<const double> probs(int h, int s) const {
    return {probs_.data() + (static_cast<std::size_t>(h) * num_states_ + s) * num_actions_,
            static_cast<std::size_t>(num_actions_)};
  }
  double operator()(int h, int s, int action) const { return probs(h, s)[action]; }

  const std::vector<double>& data() const noexcept { return probs_; }

  /// Throws unless the policy's shape and owner fit the game.
  void check_against(const TabularLinearMG& game, Player expected_owner) const {
    require(owner_ == expected_owner, ErrorKind::InvalidArgument,
            std::string("expected a ") + to_string(expected_owner) + "-player policy");
    require(horizon_ == game.horizon() && num_states_ == game.num_states() &&
                num_actions_ == game.num_actions(owner_),
            ErrorKind::InvalidArgument, "policy shape does not match the game");
  }

  bool operator==(const MarkovPolicy&) const = default;

 private:
  Player owner_ = Player::Max;
  int horizon_ = 0, num_states_ = 0, num_actions_ = 0;
  std::vector<double> probs_;
};

struct PolicyPair {
  MarkovPolicy max_player;
  MarkovPolicy min_player;
};

/// (B_h V)(s, a, b) = r_h(s, a, b) + sum_{s'} P_h(s' | s, a, b) V(s').
/// Returned vector is indexed by TabularLinearMG::cell.
inline std::vector<double> bellman_apply(const TabularLinearMG& game, int h,
                                         std::span<const double> v_next) {
  game.check_step(h);
  require(v_next.size() == static_cast<std::size_t>(game.num_states()), ErrorKind::OutOfRange,
          "continuation value has wrong length");
  std::vector<double> q(static_cast<std::size_t>(game.num_cells()));
  for (int s = 0; s < game.num_states(); ++s)
    for (int a = 0; a < game.num_actions_max(); ++a)
      for (int b = 0; b < game.num_actions_min(); ++b) {
        const auto p = game.next_state_distribution(h, s, a, b);
        double acc = game.reward(h, s, a, b);
        for (std::size_t n = 0; n < p.size(); ++n) acc += p[n] * v_next[n];
        q[game.cell(s, a, b)] = acc;
      }
  return q;
}

/// Embeds a tabular game as a linear one with d = S * A1 * A2 and
/// phi(s, a, b) = e_{cell(s, a, b)}.
inline TabularLinearMG one_hot_featurize(const TabularGameSpec& tab,
                                         Regularity regularity = Regularity::Warn) {
  require(tab.horizon >= 1 && tab.num_states >= 1 && tab.num_actions_max >= 1 &&
              tab.num_actions_min >= 1,
          ErrorKind::InvalidArgument, "game dimensions must be positive");
  const int S = tab.num_states, A1 = tab.num_actions_max, A2 = tab.num_actions_min;
  const std::size_t C = static_cast<std::size_t>(S) * A1 * A2;
  const std::size_t H = static_cast<std::size_t>(tab.horizon);
  require(tab.transition.size() == H * C * S && tab.reward.size() == H * C,
          ErrorKind::InvalidArgument, "tabular tensors have wrong size");
  for (int h = 0; h < tab.horizon; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A1; ++a)
        for (int b = 0; b < A2; ++b) {
          const std::size_t c = (static_cast<std::size_t>(s) * A1 + a) * A2 + b;
          double total = 0.0;
          for (int n = 0; n < S; ++n) {
            const double p = tab.transition[(h * C + c) * S + n];
            if (p < 0.0 || !std::isfinite(p))
              fail(ErrorKind::InvariantViolation,
                   "invalid transition probability at " + detail::index_string(h, s, a, b));
            total += p;
          }
          if (std::abs(total - 1.0) > kStochasticTol)
            fail(ErrorKind::InvariantViolation,
                 "transition row is not stochastic at " + detail::index_string(h, s, a, b));
        }

  LinearGameSpec spec;
  spec.horizon = tab.horizon;
  spec.num_states = S;
  spec.num_actions_max = A1;
  spec.num_actions_min = A2;
  spec.feature_dim = static_cast<int>(C);
  spec.initial_state = tab.initial_state;
  spec.transition = tab.transition;
  spec.reward = tab.reward;
  spec.features.assign(C * C, 0.0);
  for (std::size_t c = 0; c < C; ++c) spec.features[c * C + c] = 1.0;
  spec.theta = tab.reward;
  spec.mu.assign(H * S * C, 0.0);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t c = 0; c < C; ++c)
      for (int n = 0; n < S; ++n) spec.mu[(h * S + n) * C + c] = tab.transition[(h * C + c) * S + n];
  return TabularLinearMG(std::move(spec), regularity);
}

struct StepSample {
  double reward;
  int next_state;
};

/// One environment step; the reward is deterministic given (h, s, a, b).
inline StepSample sample_step(const TabularLinearMG& game, int h, int s, int a, int b, Rng& rng) {
  game.check_indices(h, s, a, b);
  return {game.reward(h, s, a, b), rng.categorical(game.next_state_distribution(h, s, a, b))};
}

}  // namespace pmvi
