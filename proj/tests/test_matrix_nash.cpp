#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "pmvi/games.hpp"
#include "pmvi/matrix_nash.hpp"
#include "pmvi/random.hpp"
#include "support/oracles.hpp"

using namespace pmvi;
using Catch::Matchers::WithinAbs;

namespace {

void check_simplex(const std::vector<double>& p) {
  for (double v : p) CHECK(v >= 0.0);
  CHECK_THAT(std::accumulate(p.begin(), p.end(), 0.0), WithinAbs(1.0, 1e-12));
}

std::vector<std::vector<double>> random_matrix(Rng& rng, int m, int n, double lo, double hi) {
  std::vector<std::vector<double>> out(m, std::vector<double>(n));
  for (auto& row : out)
    for (double& v : row) v = lo + (hi - lo) * rng.uniform();
  return out;
}

}  // namespace

TEST_CASE("R1 and R2 have pure equilibria of value 0") {
  const auto s1 = solve_zero_sum(MatrixGame(r1_payoff()));
  CHECK_THAT(s1.value, WithinAbs(0.0, 1e-12));
  CHECK_THAT(s1.row_strategy[1], WithinAbs(1.0, 1e-12));
  CHECK_THAT(s1.col_strategy[1], WithinAbs(1.0, 1e-12));
  const auto s2 = solve_zero_sum(MatrixGame(r2_payoff()));
  CHECK_THAT(s2.value, WithinAbs(0.0, 1e-12));
  CHECK_THAT(s2.row_strategy[2], WithinAbs(1.0, 1e-12));
  CHECK_THAT(s2.col_strategy[2], WithinAbs(1.0, 1e-12));
}

TEST_CASE("identity 2x2 has the uniform equilibrium") {
  const auto s = solve_zero_sum(MatrixGame({{1.0, 0.0}, {0.0, 1.0}}));
  CHECK_THAT(s.value, WithinAbs(0.5, 1e-12));
  for (double v : s.row_strategy) CHECK_THAT(v, WithinAbs(0.5, 1e-12));
  for (double v : s.col_strategy) CHECK_THAT(v, WithinAbs(0.5, 1e-12));
}

TEST_CASE("constant matrix has its constant as value and zero exploitability") {
  for (double c : {-3.0, 0.0, 2.5}) {
    const auto s = solve_zero_sum(MatrixGame(2, 3, std::vector<double>(6, c)));
    CHECK(s.value == c);
    CHECK(s.exploitability == 0.0);
    check_simplex(s.row_strategy);
    check_simplex(s.col_strategy);
  }
}

TEST_CASE("rock-paper-scissors has value 0") {
  const MatrixGame rps({{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}});
  CHECK_THAT(game_value(rps), WithinAbs(0.0, 1e-12));
  const auto s = solve_zero_sum(rps);
  for (double v : s.row_strategy) CHECK_THAT(v, WithinAbs(1.0 / 3, 1e-12));
}

TEST_CASE("best_pure_response_gap certificates") {
  const MatrixGame r1(r1_payoff());
  const std::vector<double> e1{1, 0, 0}, e2{0, 1, 0};
  CHECK(best_pure_response_gap(r1, e2, e2) == 0.0);
  // Pure (a1, b1): best row against b1 pays 1, worst column against a1 pays -1.
  CHECK(best_pure_response_gap(r1, e1, e1) == 2.0);
  const MatrixGame id({{1.0, 0.0}, {0.0, 1.0}});
  const std::vector<double> u{0.5, 0.5};
  CHECK(best_pure_response_gap(id, u, u) == 0.0);
  CHECK_THROWS_AS(best_pure_response_gap(id, e1, u), Error);
}

TEST_CASE("solver rejects invalid inputs") {
  CHECK_THROWS_AS(MatrixGame(0, 1, std::vector<double>{}), Error);
  CHECK_THROWS_AS(MatrixGame(2, 2, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(MatrixGame(1, 1, std::vector<double>{std::nan("")}), Error);
  CHECK_THROWS_AS(solve_zero_sum(MatrixGame(std::vector<std::vector<double>>{{1.0}}), 0.0), Error);
}

TEST_CASE("duality and simplex invariants on random matrices") {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = 1 + trial % 6, n = 1 + (trial / 6) % 6;
    const MatrixGame g(random_matrix(rng, m, n, -2.0, 2.0));
    const auto s = solve_zero_sum(g);
    check_simplex(s.row_strategy);
    check_simplex(s.col_strategy);
    const auto my = g.row_payoffs(s.col_strategy);
    const auto xm = g.col_payoffs(s.row_strategy);
    const double lo = *std::min_element(xm.begin(), xm.end());
    const double hi = *std::max_element(my.begin(), my.end());
    CHECK(lo <= s.value + 1e-9);
    CHECK(s.value <= hi + 1e-9);
    CHECK(hi - lo <= 2e-9);
    CHECK(s.exploitability <= kDefaultNashTol);
    CHECK_THAT(best_pure_response_gap(g, s.row_strategy, s.col_strategy), WithinAbs(0.0, 2e-9));
  }
}

TEST_CASE("value matches the square-submatrix oracle on random matrices") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const int m = 1 + trial % 4, n = 1 + (trial / 4) % 4;
    const auto mat = random_matrix(rng, m, n, -1.0, 1.0);
    CHECK_THAT(game_value(MatrixGame(mat)), WithinAbs(oracle::matrix_value(mat), 1e-9));
    const auto [maximin, minimax] = oracle::pure_bounds(mat);
    const double v = game_value(MatrixGame(mat));
    CHECK(maximin <= v + 1e-12);
    CHECK(v <= minimax + 1e-12);
  }
}

TEST_CASE("value matches the oracle on every matrix up to 2x3 over {-1,0,1}") {
  for (int m = 1; m <= 2; ++m)
    for (int n = 1; n <= 3; ++n) {
      const int count = static_cast<int>(std::pow(3, m * n));
      for (int code = 0; code < count; ++code) {
        std::vector<std::vector<double>> mat(m, std::vector<double>(n));
        int k = code;
        for (auto& row : mat)
          for (double& v : row) {
            v = k % 3 - 1.0;
            k /= 3;
          }
        CHECK_THAT(game_value(MatrixGame(mat)), WithinAbs(oracle::matrix_value(mat), 1e-9));
      }
    }
}

TEST_CASE("scale and shift equivariance") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto mat = random_matrix(rng, 3, 4, 0.0, 1.0);
    const double alpha = 0.1 + 5.0 * rng.uniform(), c = 10.0 * rng.uniform() - 5.0;
    auto moved = mat;
    for (auto& row : moved)
      for (double& v : row) v = alpha * v + c;
    CHECK_THAT(game_value(MatrixGame(moved)), WithinAbs(alpha * game_value(MatrixGame(mat)) + c, 1e-9));
  }
}

TEST_CASE("value is non-expansive in the sup norm") {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + trial % 6, n = 1 + (trial / 6) % 6;
    const auto a = random_matrix(rng, m, n, -1.0, 1.0);
    const double eps = rng.uniform() * 0.5;
    auto b = a;
    for (auto& row : b)
      for (double& v : row) v += eps * (2.0 * rng.uniform() - 1.0);
    CHECK(std::abs(game_value(MatrixGame(a)) - game_value(MatrixGame(b))) <=
          eps + 2 * kDefaultNashTol);
  }
}

TEST_CASE("solver is deterministic") {
  Rng rng(8);
  const MatrixGame g(random_matrix(rng, 5, 4, -1.0, 1.0));
  const auto a = solve_zero_sum(g);
  const auto b = solve_zero_sum(g);
  CHECK(a.row_strategy == b.row_strategy);
  CHECK(a.col_strategy == b.col_strategy);
  CHECK(a.value == b.value);
}

TEST_CASE("degenerate games with many equilibria still solve") {
  // Duplicate rows and columns, ties everywhere.
  const MatrixGame g({{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}});
  const auto s = solve_zero_sum(g);
  CHECK_THAT(s.value, WithinAbs(0.5, 1e-12));
  CHECK(s.exploitability <= 1e-12);
}
