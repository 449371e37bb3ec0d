#pragma once

// JSON game files, JSON-lines datasets, PMVI output documents, built-in
// game names, and locale-independent number formatting.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>
#include <json.hpp>

#include "pmvi/dataset.hpp"
#include "pmvi/error.hpp"
#include "pmvi/games.hpp"
#include "pmvi/hard_instances.hpp"
#include "pmvi/markov_game.hpp"
#include "pmvi/value_iteration.hpp"

namespace pmvi {

using json = nlohmann::json;

/// Shortest round-trip decimal form; never locale dependent.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline void expect(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::InvalidArgument, "game file: " + what);
}

/// Accepts an integer count or a list of labels.
inline int index_set_size(const json& j, const char* field) {
  expect(j.contains(field), std::string("missing field '") + field + "'");
  const auto& v = j.at(field);
  if (v.is_number_integer()) return v.get<int>();
  expect(v.is_array(), std::string("field '") + field + "' must be an integer or a label list");
  return static_cast<int>(v.size());
}

inline int label_index(const json& j, const char* field, const json& value) {
  if (value.is_number_integer()) return value.get<int>();
  expect(value.is_string() && j.contains(field) && j.at(field).is_array(),
         std::string("cannot resolve label for '") + field + "'");
  const auto& labels = j.at(field);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == value) return static_cast<int>(i);
  fail(ErrorKind::InvalidArgument, "game file: unknown label " + value.dump());
}

/// Flattens a nested array whose shape must equal `shape`.
inline void flatten_into(const json& v, std::span<const int> shape, std::vector<double>& out,
                         const std::string& field) {
  if (shape.empty()) {
    expect(v.is_number(), "field '" + field + "' has a non-numeric entry");
    out.push_back(v.get<double>());
    return;
  }
  expect(v.is_array() && v.size() == static_cast<std::size_t>(shape.front()),
         "field '" + field + "' has the wrong shape");
  for (const auto& e : v) flatten_into(e, shape.subspan(1), out, field);
}

inline std::vector<double> read_tensor(const json& j, const char* field,
                                       std::initializer_list<int> shape) {
  expect(j.contains(field), std::string("missing field '") + field + "'");
  std::vector<double> out;
  const std::vector<int> dims(shape);
  flatten_into(j.at(field), dims, out, field);
  return out;
}

inline json nest(std::span<const double> flat, std::span<const int> shape) {
  if (shape.size() == 1) return json(std::vector<double>(flat.begin(), flat.end()));
  json arr = json::array();
  std::size_t stride = 1;
  for (std::size_t k = 1; k < shape.size(); ++k) stride *= static_cast<std::size_t>(shape[k]);
  for (int i = 0; i < shape.front(); ++i) arr.push_back(nest(flat.subspan(i * stride, stride), shape.subspan(1)));
  return arr;
}

inline json nest(const std::vector<double>& flat, std::initializer_list<int> shape) {
  const std::vector<int> dims(shape);
  return nest(std::span<const double>(flat), dims);
}

inline std::vector<double> matrix_rows(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

}  // namespace detail

/// Parses a game document. Without features the game is embedded one-hot.
/// With features but no theta/mu these are recovered by least squares and
/// the usual linear-consistency check decides whether the fit is exact.
inline TabularLinearMG game_from_json(const json& j) {
  using detail::expect;
  expect(j.is_object(), "top level must be an object");
  expect(j.contains("horizon") && j.at("horizon").is_number_integer(), "missing integer 'horizon'");
  const int H = j.at("horizon").get<int>();
  const int S = detail::index_set_size(j, "states");
  const int A1 = detail::index_set_size(j, "actions_p1");
  const int A2 = detail::index_set_size(j, "actions_p2");
  expect(H >= 1 && S >= 1 && A1 >= 1 && A2 >= 1, "dimensions must be positive");
  const int x = j.contains("initial_state") ? detail::label_index(j, "states", j.at("initial_state")) : 0;
  Regularity reg = Regularity::Warn;
  if (j.contains("regularity")) {
    const auto r = j.at("regularity").get<std::string>();
    expect(r == "warn" || r == "strict", "regularity must be 'warn' or 'strict'");
    reg = r == "strict" ? Regularity::Strict : Regularity::Warn;
  }

  auto transition = detail::read_tensor(j, "transition", {H, S, A1, A2, S});
  auto reward = detail::read_tensor(j, "reward", {H, S, A1, A2});
  if (!j.contains("features")) {
    expect(!j.contains("theta") && !j.contains("mu"), "theta/mu given without features");
    return one_hot_featurize({H, S, A1, A2, x, std::move(transition), std::move(reward)}, reg);
  }

  expect(j.at("features").is_array() && !j.at("features").empty() &&
             j.at("features")[0].is_array() && !j.at("features")[0].empty() &&
             j.at("features")[0][0].is_array() && !j.at("features")[0][0].empty() &&
             j.at("features")[0][0][0].is_array(),
         "features must be nested [s][a][b][k]");
  const int d = static_cast<int>(j.at("features")[0][0][0].size());
  expect(d >= 1, "feature dimension must be positive");
  LinearGameSpec g{H, S, A1, A2, d, x, std::move(transition), std::move(reward),
                   detail::read_tensor(j, "features", {S, A1, A2, d}), {}, {}};
  const bool has_theta = j.contains("theta"), has_mu = j.contains("mu");
  if (has_theta) g.theta = detail::read_tensor(j, "theta", {H, d});
  if (has_mu) g.mu = detail::read_tensor(j, "mu", {H, S, d});
  if (!has_theta || !has_mu) {
    const int C = S * A1 * A2;
    Eigen::MatrixXd phi(C, d);
    for (int c = 0; c < C; ++c)
      for (int k = 0; k < d; ++k) phi(c, k) = g.features[static_cast<std::size_t>(c) * d + k];
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> ls(phi);
    if (!has_theta) g.theta.assign(static_cast<std::size_t>(H) * d, 0.0);
    if (!has_mu) g.mu.assign(static_cast<std::size_t>(H) * S * d, 0.0);
    for (int h = 0; h < H; ++h) {
      if (!has_theta) {
        Eigen::VectorXd r(C);
        for (int c = 0; c < C; ++c) r(c) = g.reward[static_cast<std::size_t>(h) * C + c];
        const Eigen::VectorXd t = ls.solve(r);
        for (int k = 0; k < d; ++k) g.theta[static_cast<std::size_t>(h) * d + k] = t(k);
      }
      if (!has_mu) {
        Eigen::MatrixXd p(C, S);
        for (int c = 0; c < C; ++c)
          for (int n = 0; n < S; ++n)
            p(c, n) = g.transition[(static_cast<std::size_t>(h) * C + c) * S + n];
        const Eigen::MatrixXd m = ls.solve(p);
        for (int n = 0; n < S; ++n)
          for (int k = 0; k < d; ++k)
            g.mu[(static_cast<std::size_t>(h) * S + n) * d + k] = m(k, n);
      }
    }
  }
  return TabularLinearMG(std::move(g), reg);
}

inline json game_to_json(const TabularLinearMG& game) {
  const auto& g = game.spec();
  const int H = g.horizon, S = g.num_states, A1 = g.num_actions_max, A2 = g.num_actions_min;
  const int d = g.feature_dim;
  return json{{"horizon", H},
              {"states", S},
              {"actions_p1", A1},
              {"actions_p2", A2},
              {"initial_state", g.initial_state},
              {"transition", detail::nest(g.transition, {H, S, A1, A2, S})},
              {"reward", detail::nest(g.reward, {H, S, A1, A2})},
              {"features", detail::nest(g.features, {S, A1, A2, d})},
              {"theta", detail::nest(g.theta, {H, d})},
              {"mu", detail::nest(g.mu, {H, S, d})}};
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

inline TabularLinearMG load_game(const std::filesystem::path& path) {
  try {
    return game_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

template <class T>
T parse_number(const std::string& s, const std::string& context) {
  T value{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail(ErrorKind::InvalidArgument, "bad number '" + s + "' in " + context);
  return value;
}

}  // namespace detail

/// Built-in names:
///   bandit-r1, bandit-r2, rate-bandit, sandwich,
///   hard[:p1:p2[:A[:H]]]              (defaults 0.5:0.5:3:3),
///   random:seed:H:S:A1:A2             (one-hot),
///   factored:seed:H:S:A1:A2:d.
/// Anything else is treated as a path to a JSON game file.
inline TabularLinearMG resolve_game(const std::string& spec) {
  if (spec == "bandit-r1") return bandit_r1();
  if (spec == "bandit-r2") return bandit_r2();
  if (spec == "rate-bandit") return rate_bandit();
  if (spec == "sandwich") return sandwich_game();
  const auto parts = detail::split(spec, ':');
  const auto& head = parts.front();
  auto num = [&](std::size_t i) { return detail::parse_number<long long>(parts[i], spec); };
  if (head == "hard") {
    require(parts.size() == 1 || parts.size() == 3 || parts.size() == 4 || parts.size() == 5,
            ErrorKind::InvalidArgument, "expected hard[:p1:p2[:A[:H]]], got " + spec);
    LowerBoundFamily f;
    if (parts.size() >= 3) {
      f.p1 = detail::parse_number<double>(parts[1], spec);
      f.p2 = detail::parse_number<double>(parts[2], spec);
    }
    if (parts.size() >= 4) f.num_actions = static_cast<int>(num(3));
    if (parts.size() >= 5) f.horizon = static_cast<int>(num(4));
    return build_game(f);
  }
  if (head == "random") {
    require(parts.size() == 6, ErrorKind::InvalidArgument,
            "expected random:seed:H:S:A1:A2, got " + spec);
    return random_one_hot_game(static_cast<std::uint64_t>(num(1)), static_cast<int>(num(2)),
                               static_cast<int>(num(3)), static_cast<int>(num(4)),
                               static_cast<int>(num(5)));
  }
  if (head == "factored") {
    require(parts.size() == 7, ErrorKind::InvalidArgument,
            "expected factored:seed:H:S:A1:A2:d, got " + spec);
    return random_factored_game(static_cast<std::uint64_t>(num(1)), static_cast<int>(num(2)),
                                static_cast<int>(num(3)), static_cast<int>(num(4)),
                                static_cast<int>(num(5)), static_cast<int>(num(6)));
  }
  if (std::filesystem::exists(spec)) return load_game(spec);
  fail(ErrorKind::InvalidArgument, "unknown game '" + spec + "' (not a built-in name or a file)");
}

// JSON-lines datasets. The first line is a header record; each following
// line is one trajectory. Steps use 0-based h.

inline void write_dataset(std::ostream& os, const OfflineDataset& data) {
  json header{{"format", "pmvi-dataset"},
              {"version", 1},
              {"horizon", data.horizon},
              {"initial_state", data.initial_state},
              {"provenance", to_string(data.provenance)},
              {"K", data.num_trajectories()}};
  os << header.dump() << '\n';
  for (std::size_t t = 0; t < data.trajectories.size(); ++t) {
    json steps = json::array();
    for (const auto& st : data.trajectories[t].steps)
      steps.push_back({{"h", st.h}, {"s", st.s}, {"a", st.a}, {"b", st.b}, {"r", st.r},
                       {"s_next", st.s_next}});
    os << json{{"tau", t}, {"steps", std::move(steps)}}.dump() << '\n';
  }
}

inline OfflineDataset read_dataset(std::istream& is) {
  OfflineDataset data;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  long long declared = -1;
  try {
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = json::parse(line);
      if (!have_header) {
        require(j.value("format", "") == "pmvi-dataset", ErrorKind::InvalidArgument,
                "dataset: first line is not a dataset header");
        data.horizon = j.at("horizon").get<int>();
        data.initial_state = j.at("initial_state").get<int>();
        const auto prov = j.at("provenance").get<std::string>();
        require(prov == "behavior-policy" || prov == "predetermined-schedule",
                ErrorKind::InvalidArgument, "dataset: unknown provenance '" + prov + "'");
        data.provenance = prov == "behavior-policy" ? Provenance::BehaviorPolicy
                                                    : Provenance::PredeterminedSchedule;
        declared = j.at("K").get<long long>();
        have_header = true;
        continue;
      }
      require(j.at("tau").get<long long>() == data.num_trajectories(), ErrorKind::InvalidArgument,
              "dataset: trajectories out of order at line " + std::to_string(line_no));
      Trajectory traj;
      for (const auto& st : j.at("steps"))
        traj.steps.push_back({st.at("h").get<int>(), st.at("s").get<int>(), st.at("a").get<int>(),
                              st.at("b").get<int>(), st.at("r").get<double>(),
                              st.at("s_next").get<int>()});
      data.trajectories.push_back(std::move(traj));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument,
         "dataset line " + std::to_string(line_no) + ": " + std::string(e.what()));
  }
  require(have_header, ErrorKind::InvalidArgument, "dataset: missing header record");
  require(declared == data.num_trajectories(), ErrorKind::InvalidArgument,
          "dataset: header K does not match the number of trajectories");
  data.check_structure();
  return data;
}

inline void save_dataset(const std::filesystem::path& path, const OfflineDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  write_dataset(out, data);
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

inline OfflineDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return read_dataset(in);
}

inline json policy_to_json(const MarkovPolicy& p) {
  return json{{"owner", to_string(p.owner())},
              {"probs", detail::nest(p.data(), {p.horizon(), p.num_states(), p.num_actions()})}};
}

inline MarkovPolicy policy_from_json(const json& j, Player owner, int H, int S, int A) {
  require(j.at("owner").get<std::string>() == to_string(owner), ErrorKind::InvalidArgument,
          "policy owner mismatch");
  std::vector<double> flat;
  const std::vector<int> dims{H, S, A};
  detail::flatten_into(j.at("probs"), dims, flat, "probs");
  return MarkovPolicy(owner, H, S, A, std::move(flat));
}

/// Every PMVI artifact as nested arrays. Per-step entries are Lambda (d x d),
/// the two weight vectors, Gamma and both Q tables ([s][a][b]).
inline json pmvi_output_to_json(const TabularLinearMG& game, const PmviOutput& out) {
  const int H = game.horizon(), S = game.num_states();
  const int A1 = game.num_actions_max(), A2 = game.num_actions_min(), d = game.feature_dim();
  json steps = json::array();
  for (int h = 0; h < H; ++h) {
    const auto& st = out.steps[h];
    auto q_lo = out.q_lower.step(h);
    auto q_hi = out.q_upper.step(h);
    steps.push_back({{"h", h},
                     {"gram", detail::nest(detail::matrix_rows(st.gram), {d, d})},
                     {"w_lower", std::vector<double>(st.w_lower.begin(), st.w_lower.end())},
                     {"w_upper", std::vector<double>(st.w_upper.begin(), st.w_upper.end())},
                     {"bonus", detail::nest(st.bonus, {S, A1, A2})},
                     {"q_lower", detail::nest(std::vector<double>(q_lo.begin(), q_lo.end()),
                                              {S, A1, A2})},
                     {"q_upper", detail::nest(std::vector<double>(q_hi.begin(), q_hi.end()),
                                              {S, A1, A2})}});
  }
  json v_lo = json::array(), v_hi = json::array();
  for (int h = 0; h <= H; ++h) {
    auto lo = out.v_lower.step(h);
    auto hi = out.v_upper.step(h);
    v_lo.push_back(std::vector<double>(lo.begin(), lo.end()));
    v_hi.push_back(std::vector<double>(hi.begin(), hi.end()));
  }
  return json{{"format", "pmvi-output"},
              {"beta", out.beta},
              {"horizon", H},
              {"states", S},
              {"actions_p1", A1},
              {"actions_p2", A2},
              {"feature_dim", d},
              {"steps", std::move(steps)},
              {"v_lower", std::move(v_lo)},
              {"v_upper", std::move(v_hi)},
              {"pi_hat", policy_to_json(out.pi_hat)},
              {"nu_hat", policy_to_json(out.nu_hat)},
              {"pi_aux", policy_to_json(out.pi_aux)},
              {"nu_aux", policy_to_json(out.nu_aux)}};
}

inline PmviOutput pmvi_output_from_json(const TabularLinearMG& game, const json& j) {
  const int H = game.horizon(), S = game.num_states();
  const int A1 = game.num_actions_max(), A2 = game.num_actions_min(), d = game.feature_dim();
  try {
    require(j.value("format", "") == "pmvi-output", ErrorKind::InvalidArgument,
            "not a PMVI output document");
    require(j.at("horizon") == H && j.at("states") == S && j.at("actions_p1") == A1 &&
                j.at("actions_p2") == A2 && j.at("feature_dim") == d,
            ErrorKind::InvalidArgument, "PMVI output does not match the game");
    PmviOutput out;
    out.beta = j.at("beta").get<double>();
    out.q_lower = QTable(game);
    out.q_upper = QTable(game);
    out.v_lower = VTable(game);
    out.v_upper = VTable(game);
    const std::vector<int> cell_shape{S, A1, A2}, gram_shape{d, d}, w_shape{d};
    for (int h = 0; h < H; ++h) {
      const auto& js = j.at("steps").at(h);
      PmviStep st;
      std::vector<double> flat;
      detail::flatten_into(js.at("gram"), gram_shape, flat, "gram");
      st.gram = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>(flat.data(), d, d);
      flat.clear();
      detail::flatten_into(js.at("w_lower"), w_shape, flat, "w_lower");
      st.w_lower = Eigen::Map<const Eigen::VectorXd>(flat.data(), d);
      flat.clear();
      detail::flatten_into(js.at("w_upper"), w_shape, flat, "w_upper");
      st.w_upper = Eigen::Map<const Eigen::VectorXd>(flat.data(), d);
      detail::flatten_into(js.at("bonus"), cell_shape, st.bonus, "bonus");
      flat.clear();
      detail::flatten_into(js.at("q_lower"), cell_shape, flat, "q_lower");
      std::copy(flat.begin(), flat.end(), out.q_lower.step(h).begin());
      flat.clear();
      detail::flatten_into(js.at("q_upper"), cell_shape, flat, "q_upper");
      std::copy(flat.begin(), flat.end(), out.q_upper.step(h).begin());
      out.steps.push_back(std::move(st));
    }
    for (int h = 0; h <= H; ++h)
      for (int s = 0; s < S; ++s) {
        out.v_lower(h, s) = j.at("v_lower").at(h).at(s).get<double>();
        out.v_upper(h, s) = j.at("v_upper").at(h).at(s).get<double>();
      }
    out.pi_hat = policy_from_json(j.at("pi_hat"), Player::Max, H, S, A1);
    out.nu_hat = policy_from_json(j.at("nu_hat"), Player::Min, H, S, A2);
    out.pi_aux = policy_from_json(j.at("pi_aux"), Player::Max, H, S, A1);
    out.nu_aux = policy_from_json(j.at("nu_aux"), Player::Min, H, S, A2);
    return out;
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("PMVI output document: ") + e.what());
  }
}

/// Matrix from comma-separated rows; blank lines and '#' comments skipped.
inline MatrixGame read_matrix_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    for (auto cell : detail::split(line, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      require(b != std::string::npos, ErrorKind::InvalidArgument, "empty matrix cell");
      row.push_back(detail::parse_number<double>(cell.substr(b, e - b + 1), "matrix CSV"));
    }
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorKind::InvalidArgument, "matrix CSV is empty");
  return MatrixGame(rows);
}

}  // namespace pmvi
