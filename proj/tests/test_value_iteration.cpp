#include <catch_amalgamated.hpp>

#include <cmath>
#include <Eigen/Eigenvalues>

#include "pmvi/dataset.hpp"
#include "pmvi/evaluation.hpp"
#include "pmvi/games.hpp"
#include "pmvi/value_iteration.hpp"
#include "support/oracles.hpp"

using namespace pmvi;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

OfflineDataset uniform_data(const TabularLinearMG& game, long long K, std::uint64_t seed) {
  Rng rng(seed);
  return collect_behavior(game, MarkovPolicy::uniform(game, Player::Max),
                          MarkovPolicy::uniform(game, Player::Min), K, rng);
}

OfflineDataset empty_data(const TabularLinearMG& game) { return uniform_data(game, 0, 0); }

}  // namespace

TEST_CASE("default_beta closed forms") {
  // log(2 d K H / p) = 1 when p = 2 / e.
  for (double c : {0.5, 1.0, 3.0})
    CHECK_THAT(default_beta(1, 1, 1, 2.0 / std::exp(1.0), c), WithinAbs(c, 1e-12));
  CHECK_THAT(default_beta(1, 1, 1, 0.5, 3.0), WithinAbs(3.0 * std::sqrt(std::log(4.0)), 1e-12));
  CHECK_THAT(default_beta(9, 1, 9000, 0.05, 1.0), WithinRel(34.846488989699516, 1e-14));
  CHECK_THAT(default_beta(9, 1, 9000, 0.05, 2.0) / default_beta(9, 1, 9000, 0.05, 1.0),
             WithinAbs(2.0, 1e-14));
  const double b1 = default_beta(4, 3, 1000, 0.1, 1.0);
  const double b2 = default_beta(4, 3, 2000, 0.1, 1.0);
  CHECK(b2 > b1);
  CHECK_THAT(b2 / b1, WithinAbs(std::sqrt(std::log(2 * 4 * 2000 * 3 / 0.1) /
                                          std::log(2 * 4 * 1000 * 3 / 0.1)),
                                1e-12));
  CHECK_THROWS_AS(default_beta(0, 1, 1, 0.1, 1.0), Error);
  CHECK_THROWS_AS(default_beta(1, 1, 0, 0.1, 1.0), Error);
  CHECK_THROWS_AS(default_beta(1, 1, 1, 1.0, 1.0), Error);
  CHECK_THROWS_AS(default_beta(1, 1, 1, 0.1, 0.0), Error);
}

TEST_CASE("gram matrix of an empty dataset is the identity") {
  const auto game = sandwich_game();
  const auto data = empty_data(game);
  for (int h = 0; h < 3; ++h)
    CHECK(gram_matrix(data, game, h).isApprox(Eigen::MatrixXd::Identity(12, 12), 0.0));
}

TEST_CASE("gram matrix of a one-hot bandit is diagonal in the cell counts") {
  const auto game = bandit_r1();
  const auto data = uniform_data(game, 500, 3);
  const auto c = count_stats(data, game);
  const auto g = gram_matrix(data, game, 0);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      CHECK(g(i, j) == (i == j ? 1.0 + static_cast<double>(c.pair_counts[i]) : 0.0));
}

TEST_CASE("gram matrix matches naive accumulation on factored games") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto game = random_factored_game(seed, 3, 4, 2, 3, 5);
    const auto data = uniform_data(game, 250, seed + 1);
    for (int h = 0; h < 3; ++h) {
      const auto g = gram_matrix(data, game, h);
      const auto ref = oracle::gram(game.spec(), data, h);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) CHECK_THAT(g(i, j), WithinRel(ref[i][j], 1e-12));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
      CHECK(eig.eigenvalues().minCoeff() >= 1.0 - 1e-9);
      CHECK((g - g.transpose()).norm() <= 1e-12 * g.norm());
    }
  }
}

TEST_CASE("ridge weights: empty data and single-sample closed forms") {
  const auto game = sandwich_game();
  const std::vector<double> v{0.3, 1.1, 0.7};
  CHECK(ridge_weights(empty_data(game), game, 1, v).isZero(0.0));

  auto data = uniform_data(game, 1, 12);
  const auto& st = data.trajectories[0].steps[1];
  const auto w = ridge_weights(data, game, 1, v);
  const int k = game.cell(st.s, st.a, st.b);
  for (int i = 0; i < game.feature_dim(); ++i)
    CHECK_THAT(w[i], WithinAbs(i == k ? (st.r + v[st.s_next]) / 2.0 : 0.0, 1e-15));
}

TEST_CASE("ridge weights solve the normal equations on factored games") {
  const auto game = random_factored_game(31, 2, 3, 2, 2, 3);
  const auto data = uniform_data(game, 80, 5);
  const std::vector<double> v{0.2, 0.9, 0.4};
  const auto w = ridge_weights(data, game, 0, v);
  const auto g = gram_matrix(data, game, 0);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3);
  for (const auto& t : data.trajectories) {
    const auto& st = t.steps[0];
    const auto phi = game.feature(st.s, st.a, st.b);
    for (int k = 0; k < 3; ++k) rhs[k] += phi[k] * (st.r + v[st.s_next]);
  }
  CHECK((g * w - rhs).norm() <= 1e-10);
}

TEST_CASE("bonus closed forms") {
  const auto game = bandit_r1();
  for (double g : bonus(game, gram_matrix(empty_data(game), game, 0), 2.5)) CHECK(g == 2.5);
  const auto data = uniform_data(game, 900, 4);
  const auto c = count_stats(data, game);
  const auto b = bonus(game, gram_matrix(data, game, 0), 3.0);
  for (int k = 0; k < 9; ++k)
    CHECK_THAT(b[k], WithinRel(3.0 / std::sqrt(1.0 + static_cast<double>(c.pair_counts[k])), 1e-14));
  CHECK_THROWS_AS(bonus(game, gram_matrix(data, game, 0), 0.0), Error);
}

TEST_CASE("elliptical widths match an explicit-inverse quadratic form") {
  Rng rng(6);
  const auto game = random_factored_game(2, 1, 3, 2, 2, 4);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 4);
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Identity(4, 4) + 10.0 * rng.uniform() * a * a.transpose();
    oracle::Matrix ref_lambda(4, std::vector<double>(4));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) ref_lambda[i][j] = lambda(i, j);
    const auto got = elliptical_widths(game, lambda);
    const auto ref = oracle::widths(game.spec(), ref_lambda);
    for (std::size_t c = 0; c < got.size(); ++c) CHECK_THAT(got[c], WithinAbs(ref[c], 1e-12));
  }
}

TEST_CASE("K = 0 forces maximal pessimism") {
  const auto game = sandwich_game();
  const auto out = run_pmvi(game, empty_data(game));
  CHECK(out.beta == default_beta(12, 3, 1, 0.1, 1.0));
  for (double q : out.q_lower.data()) CHECK(q == 0.0);
  for (int h = 0; h < 3; ++h) {
    for (int s = 0; s < 3; ++s) {
      CHECK(out.v_lower(h, s) == 0.0);
      CHECK(out.v_upper(h, s) == 3.0 - h);
    }
    for (double g : out.steps[h].bonus) CHECK(g == out.beta);
  }
}

TEST_CASE("zero-reward game keeps the lower value at zero") {
  TabularGameSpec t;
  t.horizon = 2;
  t.num_states = 2;
  t.num_actions_max = 2;
  t.num_actions_min = 2;
  t.reward.assign(2 * 8, 0.0);
  for (int r = 0; r < 16; ++r) t.transition.insert(t.transition.end(), {0.5, 0.5});
  const auto game = one_hot_featurize(t);
  const auto data = uniform_data(game, 400, 10);
  const auto out = run_pmvi(game, data, PmviConfig{std::nullopt, 0.01});
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 2; ++s) CHECK(out.v_lower(h, s) == 0.0);
  CHECK_NOTHROW(out.pi_hat.check_against(game, Player::Max));
}

TEST_CASE("counterexample dataset leaves uncovered cells at zero") {
  const auto game = bandit_r1();
  Rng rng(0);
  const auto data = collect_predetermined(game, {{1, 1}, {2, 2}}, rng);
  const auto out = run_pmvi(game, data);
  for (double q : out.q_lower.data()) CHECK(q == 0.0);
  CHECK_THAT(out.steps[0].bonus[4], WithinRel(out.beta / std::sqrt(2.0), 1e-14));
  const auto r = suboptimality(game, out.pi_hat, out.nu_hat);
  CHECK(r.sub >= 0.0);
}

TEST_CASE("PMVI output invariants on random runs") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto game = seed % 2 ? random_one_hot_game(seed, 3, 2, 2, 2)
                               : random_factored_game(seed, 3, 3, 2, 2, 4);
    const long long K = 50 + 40 * static_cast<long long>(seed);
    const auto data = uniform_data(game, K, seed * 7 + 1);
    const PmviConfig cfg{std::nullopt, 0.05 + 0.05 * (seed % 4)};
    const auto out = run_pmvi(game, data, cfg);
    const int H = game.horizon(), d = game.feature_dim();
    for (int h = 0; h < H; ++h) {
      const auto lo = out.q_lower.step(h);
      const auto hi = out.q_upper.step(h);
      for (std::size_t c = 0; c < lo.size(); ++c) {
        CHECK(lo[c] >= 0.0);
        CHECK(lo[c] <= H - h);
        CHECK(hi[c] >= 0.0);
        CHECK(hi[c] <= H - h);
        CHECK(out.steps[h].bonus[c] >= 0.0);
      }
      const double bound = H * std::sqrt(static_cast<double>(K) * d);
      CHECK(out.steps[h].w_lower.norm() <= bound);
      CHECK(out.steps[h].w_upper.norm() <= bound);
      for (int s = 0; s < game.num_states(); ++s) {
        const MatrixGame lower(game.num_actions_max(), game.num_actions_min(), out.q_lower.matrix(h, s));
        CHECK_THAT(out.v_lower(h, s), WithinAbs(game_value(lower), 1e-8));
      }
    }
    const auto again = run_pmvi(game, data, cfg);
    CHECK(again.q_lower == out.q_lower);
    CHECK(again.q_upper == out.q_upper);
    CHECK(again.v_lower == out.v_lower);
    CHECK(again.pi_hat == out.pi_hat);
    CHECK(again.nu_hat == out.nu_hat);
  }
}

TEST_CASE("explicit beta overrides the derived value and must be positive") {
  const auto game = sandwich_game();
  const auto data = uniform_data(game, 30, 1);
  CHECK(run_pmvi(game, data, PmviConfig{0.7}).beta == 0.7);
  CHECK_THROWS_AS(run_pmvi(game, data, PmviConfig{-1.0}), Error);
  auto wrong = data;
  wrong.horizon = 2;
  CHECK_THROWS_AS(run_pmvi(game, wrong), Error);
}
