#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "pmvi/games.hpp"
#include "pmvi/io.hpp"

using namespace pmvi;

namespace {

OfflineDataset uniform_data(const TabularLinearMG& game, long long K, std::uint64_t seed) {
  Rng rng(seed);
  return collect_behavior(game, MarkovPolicy::uniform(game, Player::Max),
                          MarkovPolicy::uniform(game, Player::Min), K, rng);
}

}  // namespace

TEST_CASE("format_double round-trips and ignores the locale") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3, 1e-300, 34.846488989699516,
                   std::numeric_limits<double>::max()})
    CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("game JSON round-trip preserves the model") {
  for (const auto& game : {sandwich_game(), random_factored_game(4, 2, 3, 2, 2, 3),
                           build_game(0.6, 0.4, 3, 3)}) {
    const auto back = game_from_json(json::parse(game_to_json(game).dump()));
    CHECK(back.spec().transition == game.spec().transition);
    CHECK(back.spec().reward == game.spec().reward);
    CHECK(back.spec().features == game.spec().features);
    CHECK(back.spec().theta == game.spec().theta);
    CHECK(back.spec().mu == game.spec().mu);
    CHECK(back.initial_state() == game.initial_state());
  }
}

TEST_CASE("game JSON without features is embedded one-hot") {
  const auto j = json::parse(R"({
    "horizon": 1, "states": ["x"], "actions_p1": ["u", "v"], "actions_p2": 1,
    "initial_state": "x",
    "transition": [[[[[1.0]], [[1.0]]]]],
    "reward": [[[[0.25], [0.75]]]]
  })");
  const auto game = game_from_json(j);
  CHECK(game.feature_dim() == 2);
  CHECK(game.reward(0, 0, 1, 0) == 0.75);
  auto bad = j;
  bad["reward"] = json::parse("[[[0.25, 0.75]]]");
  CHECK_THROWS_AS(game_from_json(bad), Error);
}

TEST_CASE("game JSON with features recovers theta and mu by least squares") {
  const auto src = random_factored_game(9, 2, 3, 2, 2, 3);
  auto j = game_to_json(src);
  j.erase("theta");
  j.erase("mu");
  const auto game = game_from_json(j);
  CHECK(game.warnings().empty());
  const auto [p_res, r_res] = game.linear_residuals();
  CHECK(p_res <= 1e-9);
  CHECK(r_res <= 1e-9);
}

TEST_CASE("malformed game documents are rejected") {
  CHECK_THROWS_AS(game_from_json(json::parse("[]")), Error);
  CHECK_THROWS_AS(game_from_json(json::parse(R"({"horizon": 1})")), Error);
  auto j = game_to_json(sandwich_game());
  j["regularity"] = "loose";
  CHECK_THROWS_AS(game_from_json(j), Error);
  auto k = game_to_json(sandwich_game());
  k.erase("features");
  CHECK_THROWS_AS(game_from_json(k), Error);
}

TEST_CASE("dataset JSON-lines round-trip") {
  const auto game = random_one_hot_game(5, 3, 2, 2, 3);
  const auto data = uniform_data(game, 40, 4);
  std::stringstream ss;
  write_dataset(ss, data);
  const auto h = json::parse(ss.str().substr(0, ss.str().find('\n')));
  CHECK(h.at("format") == "pmvi-dataset");
  CHECK(h.at("K") == 40);
  CHECK(h.at("provenance") == "behavior-policy");
  const auto back = read_dataset(ss);
  CHECK(back == data);
}

TEST_CASE("dataset reader rejects inconsistent input") {
  const auto game = sandwich_game();
  std::ostringstream os;
  write_dataset(os, uniform_data(game, 3, 1));
  const auto text = os.str();
  {
    std::istringstream is(text.substr(text.find('\n') + 1));
    CHECK_THROWS_AS(read_dataset(is), Error);
  }
  {
    std::istringstream is(text.substr(0, text.rfind('\n', text.size() - 2) + 1));
    CHECK_THROWS_AS(read_dataset(is), Error);
  }
  {
    std::istringstream is("not json\n");
    CHECK_THROWS_AS(read_dataset(is), Error);
  }
}

TEST_CASE("resolve_game names") {
  CHECK(resolve_game("bandit-r1").reward(0, 0, 0, 0) == bandit_r1().reward(0, 0, 0, 0));
  CHECK(resolve_game("rate-bandit").num_actions_max() == 3);
  CHECK(resolve_game("sandwich").horizon() == 3);
  const auto hard = resolve_game("hard:0.6:0.4:4:5");
  CHECK(hard.num_actions_max() == 4);
  CHECK(hard.horizon() == 5);
  CHECK(hard.transition(0, 0, 0, 0, 1) == 0.6);
  CHECK(resolve_game("hard").feature_dim() == 11);
  CHECK(resolve_game("random:3:2:2:2:2").spec().transition ==
        random_one_hot_game(3, 2, 2, 2, 2).spec().transition);
  CHECK(resolve_game("factored:1:2:3:2:2:4").feature_dim() == 4);
  CHECK_THROWS_AS(resolve_game("hard:0.6"), Error);
  CHECK_THROWS_AS(resolve_game("random:1:2"), Error);
  CHECK_THROWS_AS(resolve_game("no-such-game"), Error);
}

TEST_CASE("policy and PMVI output documents round-trip") {
  const auto game = sandwich_game();
  const auto out = run_pmvi(game, uniform_data(game, 200, 2), PmviConfig{std::nullopt, 0.1});
  const auto j = json::parse(pmvi_output_to_json(game, out).dump());
  const auto back = pmvi_output_from_json(game, j);
  CHECK(back.beta == out.beta);
  CHECK(back.q_lower == out.q_lower);
  CHECK(back.q_upper == out.q_upper);
  CHECK(back.v_lower == out.v_lower);
  CHECK(back.v_upper == out.v_upper);
  CHECK(back.pi_hat == out.pi_hat);
  CHECK(back.nu_hat == out.nu_hat);
  CHECK(back.pi_aux == out.pi_aux);
  CHECK(back.nu_aux == out.nu_aux);
  for (int h = 0; h < 3; ++h) {
    CHECK(back.steps[h].gram == out.steps[h].gram);
    CHECK(back.steps[h].w_lower == out.steps[h].w_lower);
    CHECK(back.steps[h].bonus == out.steps[h].bonus);
  }
  CHECK_THROWS_AS(pmvi_output_from_json(bandit_r1(), j), Error);
  CHECK_THROWS_AS(policy_from_json(policy_to_json(out.pi_hat), Player::Min, 3, 3, 2), Error);
}

TEST_CASE("matrix CSV parsing") {
  std::istringstream is("# payoff\r\n1, -1\r\n\r\n-1,1\r\n");
  const auto m = read_matrix_csv(is);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m(0, 1) == -1.0);
  std::istringstream bad("1,x\n");
  CHECK_THROWS_AS(read_matrix_csv(bad), Error);
  std::istringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(read_matrix_csv(ragged), Error);
  std::istringstream empty("# nothing\n");
  CHECK_THROWS_AS(read_matrix_csv(empty), Error);
}
