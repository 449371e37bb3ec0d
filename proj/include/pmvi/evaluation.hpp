#pragma once

// Exact evaluation against the true model: Nash values, best responses,
// policy values, the duality gap, and the diagnostics used to check PMVI's
// guarantees. Every expectation is an exact DP over state distributions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "pmvi/error.hpp"
#include "pmvi/markov_game.hpp"
#include "pmvi/matrix_nash.hpp"
#include "pmvi/value_iteration.hpp"

namespace pmvi {

inline constexpr double kEvalTol = 1e-8;

struct NashValues {
  VTable v;
  QTable q;
  MarkovPolicy pi;  // max-player NE strategy per (h, s)
  MarkovPolicy nu;  // min-player NE strategy per (h, s)
};

inline NashValues exact_nash_values(const TabularLinearMG& game, double tol = kDefaultNashTol) {
  const int H = game.horizon(), S = game.num_states();
  const int A1 = game.num_actions_max(), A2 = game.num_actions_min();
  NashValues out{VTable(game), QTable(game), {}, {}};
  std::vector<double> pi(static_cast<std::size_t>(H) * S * A1);
  std::vector<double> nu(static_cast<std::size_t>(H) * S * A2);
  for (int h = H - 1; h >= 0; --h) {
    const auto q = bellman_apply(game, h, out.v.step(h + 1));
    std::copy(q.begin(), q.end(), out.q.step(h).begin());
    for (int s = 0; s < S; ++s) {
      const auto ne = solve_zero_sum(MatrixGame(A1, A2, out.q.matrix(h, s)), tol);
      out.v(h, s) = ne.value;
      std::copy(ne.row_strategy.begin(), ne.row_strategy.end(),
                pi.begin() + (static_cast<std::ptrdiff_t>(h) * S + s) * A1);
      std::copy(ne.col_strategy.begin(), ne.col_strategy.end(),
                nu.begin() + (static_cast<std::ptrdiff_t>(h) * S + s) * A2);
    }
  }
  out.pi = MarkovPolicy(Player::Max, H, S, A1, std::move(pi));
  out.nu = MarkovPolicy(Player::Min, H, S, A2, std::move(nu));
  return out;
}

struct BestResponse {
  VTable v;             // V^{pi,*} or V^{*,nu}
  MarkovPolicy policy;  // deterministic best response of the other side
};

/// Best response to a fixed policy. fixed_side names the owner of
/// fixed_policy; the opponent picks the lowest-index optimal pure action.
inline BestResponse best_response_value(const TabularLinearMG& game,
                                        const MarkovPolicy& fixed_policy, Player fixed_side) {
  fixed_policy.check_against(game, fixed_side);
  const int H = game.horizon(), S = game.num_states();
  const int A1 = game.num_actions_max(), A2 = game.num_actions_min();
  const Player responder = fixed_side == Player::Max ? Player::Min : Player::Max;
  const int A_resp = game.num_actions(responder);
  VTable v(game);
  std::vector<int> actions(static_cast<std::size_t>(H) * S);
  for (int h = H - 1; h >= 0; --h) {
    const auto q = bellman_apply(game, h, v.step(h + 1));
    for (int s = 0; s < S; ++s) {
      const auto p = fixed_policy.probs(h, s);
      int best_action = 0;
      double best = 0.0;
      for (int k = 0; k < A_resp; ++k) {
        double val = 0.0;
        if (fixed_side == Player::Max)
          for (int a = 0; a < A1; ++a) val += p[a] * q[game.cell(s, a, k)];
        else
          for (int b = 0; b < A2; ++b) val += p[b] * q[game.cell(s, k, b)];
        const bool better = fixed_side == Player::Max ? val < best : val > best;
        if (k == 0 || better) {
          best = val;
          best_action = k;
        }
      }
      v(h, s) = best;
      actions[static_cast<std::size_t>(h) * S + s] = best_action;
    }
  }
  return {std::move(v), MarkovPolicy::deterministic(responder, H, S, A_resp, actions)};
}

/// Q^{pi,nu} for the pair, with V^{pi,nu} alongside.
struct PolicyEvaluation {
  VTable v;
  QTable q;
};

inline PolicyEvaluation evaluate_pair(const TabularLinearMG& game, const MarkovPolicy& pi,
                                      const MarkovPolicy& nu) {
  pi.check_against(game, Player::Max);
  nu.check_against(game, Player::Min);
  const int A1 = game.num_actions_max(), A2 = game.num_actions_min();
  PolicyEvaluation out{VTable(game), QTable(game)};
  for (int h = game.horizon() - 1; h >= 0; --h) {
    const auto q = bellman_apply(game, h, out.v.step(h + 1));
    std::copy(q.begin(), q.end(), out.q.step(h).begin());
    for (int s = 0; s < game.num_states(); ++s) {
      const auto x = pi.probs(h, s);
      const auto y = nu.probs(h, s);
      double acc = 0.0;
      for (int a = 0; a < A1; ++a)
        for (int b = 0; b < A2; ++b) acc += x[a] * y[b] * q[game.cell(s, a, b)];
      out.v(h, s) = acc;
    }
  }
  return out;
}

inline VTable policy_value(const TabularLinearMG& game, const MarkovPolicy& pi,
                           const MarkovPolicy& nu) {
  return evaluate_pair(game, pi, nu).v;
}

/// Distribution of s_h under (pi, nu) from the initial state, h in [0, H).
inline std::vector<std::vector<double>> state_distributions(const TabularLinearMG& game,
                                                            const MarkovPolicy& pi,
                                                            const MarkovPolicy& nu) {
  pi.check_against(game, Player::Max);
  nu.check_against(game, Player::Min);
  const int S = game.num_states(), A1 = game.num_actions_max(), A2 = game.num_actions_min();
  std::vector<std::vector<double>> dist(static_cast<std::size_t>(game.horizon()),
                                        std::vector<double>(S, 0.0));
  dist[0][game.initial_state()] = 1.0;
  for (int h = 0; h + 1 < game.horizon(); ++h)
    for (int s = 0; s < S; ++s) {
      if (dist[h][s] == 0.0) continue;
      for (int a = 0; a < A1; ++a)
        for (int b = 0; b < A2; ++b) {
          const double w = dist[h][s] * pi(h, s, a) * nu(h, s, b);
          if (w == 0.0) continue;
          const auto p = game.next_state_distribution(h, s, a, b);
          for (int n = 0; n < S; ++n) dist[h + 1][n] += w * p[n];
        }
    }
  return dist;
}

/// sum_h E_{pi,nu}[g_h(s_h, a_h, b_h)] for per-step cell tables g_h.
inline double expected_cell_sum(const TabularLinearMG& game, const MarkovPolicy& pi,
                                const MarkovPolicy& nu,
                                const std::vector<std::vector<double>>& per_step) {
  require(per_step.size() == static_cast<std::size_t>(game.horizon()), ErrorKind::InvalidArgument,
          "need one cell table per step");
  const auto dist = state_distributions(game, pi, nu);
  double total = 0.0;
  for (int h = 0; h < game.horizon(); ++h) {
    require(per_step[h].size() == static_cast<std::size_t>(game.num_cells()),
            ErrorKind::InvalidArgument, "cell table has wrong size");
    for (int s = 0; s < game.num_states(); ++s) {
      if (dist[h][s] == 0.0) continue;
      for (int a = 0; a < game.num_actions_max(); ++a)
        for (int b = 0; b < game.num_actions_min(); ++b)
          total += dist[h][s] * pi(h, s, a) * nu(h, s, b) * per_step[h][game.cell(s, a, b)];
    }
  }
  return total;
}

struct EvaluationReport {
  double v_star = 0.0;      // V*_1(x)
  double v_pi_br = 0.0;     // V^{pi_hat,*}_1(x)
  double v_br_nu = 0.0;     // V^{*,nu_hat}_1(x)
  double v_pair = 0.0;      // V^{pi_hat,nu_hat}_1(x)
  double sub = 0.0;         // v_br_nu - v_pi_br
  double subb = 0.0;        // |v_star - v_pair|
  double bound_rhs = std::numeric_limits<double>::quiet_NaN();
  bool sandwich_ok = false;
  double max_lower_error = 0.0;  // max_h,cell of the lower Bellman error
  double max_upper_error = 0.0;  // max_h,cell of -(upper Bellman error)
};

inline void check_weak_duality(const EvaluationReport& r) {
  if (r.v_pi_br > r.v_star + kEvalTol || r.v_star > r.v_br_nu + kEvalTol) {
    std::ostringstream os;
    os << "weak duality violated: V^{pi,*} = " << r.v_pi_br << ", V* = " << r.v_star
       << ", V^{*,nu} = " << r.v_br_nu << " (bug)";
    fail(ErrorKind::InvariantViolation, os.str());
  }
}

inline EvaluationReport suboptimality(const TabularLinearMG& game, const MarkovPolicy& pi_hat,
                                      const MarkovPolicy& nu_hat, const NashValues& nash) {
  const int x = game.initial_state();
  EvaluationReport r;
  r.v_star = nash.v(0, x);
  r.v_pi_br = best_response_value(game, pi_hat, Player::Max).v(0, x);
  r.v_br_nu = best_response_value(game, nu_hat, Player::Min).v(0, x);
  r.v_pair = policy_value(game, pi_hat, nu_hat)(0, x);
  r.sub = r.v_br_nu - r.v_pi_br;
  r.subb = std::abs(r.v_star - r.v_pair);
  check_weak_duality(r);
  return r;
}

inline EvaluationReport suboptimality(const TabularLinearMG& game, const MarkovPolicy& pi_hat,
                                      const MarkovPolicy& nu_hat) {
  return suboptimality(game, pi_hat, nu_hat, exact_nash_values(game));
}

struct BellmanErrors {
  QTable lower;  // B_h V_lower_{h+1} - Q_lower_h
  QTable upper;  // B_h V_upper_{h+1} - Q_upper_h
};

inline BellmanErrors bellman_error_tables(const TabularLinearMG& game, const PmviOutput& out) {
  require(out.q_lower.horizon() == game.horizon() && out.q_lower.num_states() == game.num_states() &&
              out.q_lower.num_actions_max() == game.num_actions_max() &&
              out.q_lower.num_actions_min() == game.num_actions_min() &&
              out.v_lower.num_states() == game.num_states(),
          ErrorKind::InvalidArgument, "PMVI output shape does not match the game");
  BellmanErrors e{QTable(game), QTable(game)};
  for (int h = 0; h < game.horizon(); ++h) {
    const auto lo = bellman_apply(game, h, out.v_lower.step(h + 1));
    const auto hi = bellman_apply(game, h, out.v_upper.step(h + 1));
    const auto q_lo = out.q_lower.step(h);
    const auto q_hi = out.q_upper.step(h);
    auto e_lo = e.lower.step(h);
    auto e_hi = e.upper.step(h);
    for (int c = 0; c < game.num_cells(); ++c) {
      e_lo[c] = lo[c] - q_lo[c];
      e_hi[c] = hi[c] - q_hi[c];
    }
  }
  return e;
}

/// 0 <= lower <= 2 Gamma and 0 <= -upper <= 2 Gamma at every (h, cell).
inline bool sandwich_holds(const BellmanErrors& e, const PmviOutput& out, double tol = 1e-9) {
  for (int h = 0; h < e.lower.horizon(); ++h) {
    const auto lo = e.lower.step(h);
    const auto hi = e.upper.step(h);
    const auto& gamma = out.steps[h].bonus;
    for (std::size_t c = 0; c < lo.size(); ++c) {
      if (lo[c] < -tol || lo[c] > 2.0 * gamma[c] + tol) return false;
      if (-hi[c] < -tol || -hi[c] > 2.0 * gamma[c] + tol) return false;
    }
  }
  return true;
}

/// 2 beta sum_h E_{pi*,nu'}[w_h] + 2 beta sum_h E_{pi',nu*}[w_h], where
/// w_h = sqrt(phi^T Lambda_h^{-1} phi). beta defaults to the run's value.
inline double theorem_bound_rhs(const TabularLinearMG& game, const PmviOutput& out,
                                const NashValues& nash, std::optional<double> beta = {}) {
  const double b = beta.value_or(out.beta);
  std::vector<std::vector<double>> widths;
  widths.reserve(out.steps.size());
  for (const auto& st : out.steps) widths.push_back(elliptical_widths(game, st.gram));
  return 2.0 * b * expected_cell_sum(game, nash.pi, out.nu_aux, widths) +
         2.0 * b * expected_cell_sum(game, out.pi_aux, nash.nu, widths);
}

/// Report for a PMVI run, including the Bellman-error sandwich and the
/// Bellman-error bound on the duality gap.
inline EvaluationReport evaluate_pmvi(const TabularLinearMG& game, const PmviOutput& out,
                                      const NashValues& nash) {
  auto r = suboptimality(game, out.pi_hat, out.nu_hat, nash);
  const auto errors = bellman_error_tables(game, out);
  r.sandwich_ok = sandwich_holds(errors, out);
  r.max_lower_error = *std::max_element(errors.lower.data().begin(), errors.lower.data().end());
  double worst = -std::numeric_limits<double>::infinity();
  for (double v : errors.upper.data()) worst = std::max(worst, -v);
  r.max_upper_error = worst;
  r.bound_rhs = theorem_bound_rhs(game, out, nash);
  return r;
}

struct ValueDifference {
  double strategy_term = 0.0;  // sum_h E[<Q_hat, pi_hat x nu_hat - pi x nu>]
  double bellman_term = 0.0;   // sum_h E[Q_hat - B_h V_hat_{h+1}]
  double lhs = 0.0;            // V_hat_1(x) - V^{pi,nu}_1(x)
};

/// Decomposes V_hat_1(x) - V^{pi,nu}_1(x) into the two sums of the value
/// difference identity. v_hat must equal <Q_hat, pi_hat x nu_hat> per state.
inline ValueDifference value_difference(const TabularLinearMG& game, const QTable& q_hat,
                                        const VTable& v_hat, const PolicyPair& product,
                                        const PolicyPair& comparison,
                                        double tol = kEvalTol) {
  const int H = game.horizon(), S = game.num_states();
  const int A1 = game.num_actions_max(), A2 = game.num_actions_min();
  require(q_hat.horizon() == H && q_hat.num_states() == S && q_hat.num_actions_max() == A1 &&
              q_hat.num_actions_min() == A2 && v_hat.horizon() == H && v_hat.num_states() == S,
          ErrorKind::InvalidArgument, "estimated tables do not match the game");
  const auto& ph = product.max_player;
  const auto& nh = product.min_player;
  ph.check_against(game, Player::Max);
  nh.check_against(game, Player::Min);

  auto inner = [&](const MarkovPolicy& x, const MarkovPolicy& y, int h, int s) {
    const auto q = q_hat.matrix(h, s);
    double acc = 0.0;
    for (int a = 0; a < A1; ++a)
      for (int b = 0; b < A2; ++b) acc += x(h, s, a) * y(h, s, b) * q[a * A2 + b];
    return acc;
  };

  double deviation = 0.0;
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s) deviation = std::max(deviation, std::abs(v_hat(h, s) - inner(ph, nh, h, s)));
  for (int s = 0; s < S; ++s) deviation = std::max(deviation, std::abs(v_hat(H, s)));
  if (deviation > tol) {
    std::ostringstream os;
    os << "estimated values are not <Q_hat, pi_hat x nu_hat>: max deviation " << deviation;
    fail(ErrorKind::InvalidArgument, os.str());
  }

  const auto& pi = comparison.max_player;
  const auto& nu = comparison.min_player;
  const auto dist = state_distributions(game, pi, nu);
  ValueDifference out;
  std::vector<std::vector<double>> residual(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h) {
    const auto bv = bellman_apply(game, h, v_hat.step(h + 1));
    const auto q = q_hat.step(h);
    residual[h].resize(bv.size());
    for (std::size_t c = 0; c < bv.size(); ++c) residual[h][c] = q[c] - bv[c];
    for (int s = 0; s < S; ++s)
      if (dist[h][s] != 0.0)
        out.strategy_term += dist[h][s] * (inner(ph, nh, h, s) - inner(pi, nu, h, s));
  }
  out.bellman_term = expected_cell_sum(game, pi, nu, residual);
  out.lhs = v_hat(0, game.initial_state()) - policy_value(game, pi, nu)(0, game.initial_state());
  return out;
}

}  // namespace pmvi
