#pragma once

// Experiment drivers behind the command-line tool. Each driver is a pure
// function of its config and writes RFC-4180 CSV; seeds run in parallel and
// rows are merged in (K, seed) order.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pmvi/dataset.hpp"
#include "pmvi/evaluation.hpp"
#include "pmvi/hard_instances.hpp"
#include "pmvi/io.hpp"
#include "pmvi/parallel.hpp"
#include "pmvi/random.hpp"
#include "pmvi/uncertainty.hpp"
#include "pmvi/value_iteration.hpp"

namespace pmvi {

struct ExperimentConfig {
  std::string game = "sandwich";
  std::optional<std::string> dataset;  // replaces sampling in `run`
  std::vector<long long> ks;
  int seeds = 1;
  std::uint64_t seed = 0;  // first seed; seeds run seed, seed + 1, ...
  std::optional<double> beta;
  double c = 1.0;
  double p = 0.1;
  int jobs = 1;
  /// "uniform", "balanced", or explicit first-step pairs "a:b,a:b,...".
  std::string schedule = "uniform";
  int num_actions = 3;  // hard family
  int horizon = 3;      // hard family

  PmviConfig pmvi() const {
    PmviConfig cfg;
    cfg.beta = beta;
    cfg.c = c;
    cfg.p = p;
    return cfg;
  }

  std::vector<std::uint64_t> seed_list() const {
    std::vector<std::uint64_t> out;
    for (int i = 0; i < seeds; ++i) out.push_back(seed + static_cast<std::uint64_t>(i));
    return out;
  }

  void validate() const {
    require(seeds >= 1, ErrorKind::InvalidArgument, "--seeds must be at least 1");
    require(jobs >= 1, ErrorKind::InvalidArgument, "--jobs must be at least 1");
    for (long long k : ks) require(k >= 0, ErrorKind::InvalidArgument, "K must be non-negative");
    if (beta)
      require(*beta > 0.0, ErrorKind::InvalidArgument, "--beta must be positive");
    else
      require(c > 0.0 && p > 0.0 && p < 1.0, ErrorKind::InvalidArgument,
              "need c > 0 and p in (0, 1)");
  }
};

// CSV ---------------------------------------------------------------------

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << csv_field(fields[i]);
  os << "\r\n";
}

// Datasets ----------------------------------------------------------------

/// Generator for the dataset of (seed, K), shared by every subcommand.
inline Rng dataset_rng(std::uint64_t seed, long long num_trajectories) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(num_trajectories)));
}

inline ActionSchedule parse_schedule(const std::string& text, const TabularLinearMG& game,
                                     long long num_trajectories) {
  if (text == "balanced")
    return balanced_schedule(game.num_actions_max(), game.num_actions_min(), num_trajectories);
  ActionSchedule out;
  for (const auto& item : detail::split(text, ',')) {
    const auto ab = detail::split(item, ':');
    require(ab.size() == 2, ErrorKind::InvalidArgument,
            "schedule entries look like a:b, got '" + item + "'");
    out.emplace_back(detail::parse_number<int>(ab[0], "schedule"),
                     detail::parse_number<int>(ab[1], "schedule"));
  }
  return out;
}

/// Uniform behavior pair for "uniform", a schedule otherwise. An explicit
/// schedule fixes K to its own length.
inline OfflineDataset make_dataset(const TabularLinearMG& game, const std::string& schedule,
                                   long long num_trajectories, std::uint64_t seed) {
  if (schedule == "uniform") {
    auto rng = dataset_rng(seed, num_trajectories);
    return collect_behavior(game, MarkovPolicy::uniform(game, Player::Max),
                            MarkovPolicy::uniform(game, Player::Min), num_trajectories, rng);
  }
  const auto sched = parse_schedule(schedule, game, num_trajectories);
  auto rng = dataset_rng(seed, static_cast<long long>(sched.size()));
  return collect_predetermined(game, sched, rng);
}

// run -----------------------------------------------------------------------

struct RunRow {
  std::uint64_t seed = 0;
  long long K = 0;
  double beta = 0.0;
  std::optional<double> c;
  EvaluationReport report;
  RUReport ru;
  std::vector<double> lambda_min;  // empty unless the behavior pair is known
};

inline std::vector<std::string> run_header(int horizon) {
  std::vector<std::string> h{"seed", "K",   "beta",   "c",           "sub",        "subb",
                             "bound_rhs", "sandwich_ok", "ru", "ru_max_side", "ru_min_side"};
  for (int k = 1; k <= horizon; ++k) h.push_back("lambda_min_h" + std::to_string(k));
  return h;
}

inline std::vector<std::string> run_fields(const RunRow& r, int horizon) {
  std::vector<std::string> f{std::to_string(r.seed),
                             std::to_string(r.K),
                             format_double(r.beta),
                             r.c ? format_double(*r.c) : "",
                             format_double(r.report.sub),
                             format_double(r.report.subb),
                             format_double(r.report.bound_rhs),
                             r.report.sandwich_ok ? "1" : "0",
                             format_double(r.ru.ru),
                             format_double(r.ru.ru_max_side),
                             format_double(r.ru.ru_min_side)};
  for (int h = 0; h < horizon; ++h)
    f.push_back(h < static_cast<int>(r.lambda_min.size()) ? format_double(r.lambda_min[h]) : "");
  return f;
}

/// PMVI, the exact evaluation and RU for one dataset.
inline RunRow evaluate_dataset(const TabularLinearMG& game, const NashValues& nash,
                               const OfflineDataset& data, const PmviConfig& cfg,
                               std::uint64_t seed, const std::vector<double>& lambda_min) {
  const auto out = run_pmvi(game, data, cfg);
  RunRow row;
  row.seed = seed;
  row.K = data.num_trajectories();
  row.beta = out.beta;
  if (!cfg.beta) row.c = cfg.c;
  row.report = evaluate_pmvi(game, out, nash);
  std::vector<std::vector<double>> widths;
  for (const auto& st : out.steps) widths.push_back(elliptical_widths(game, st.gram));
  row.ru = relative_uncertainty(game, widths, {PolicyPair{nash.pi, nash.nu}});
  row.lambda_min = lambda_min;
  return row;
}

inline std::vector<RunRow> run_rows(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto game = resolve_game(cfg.game);
  const auto nash = exact_nash_values(game);
  const auto pmvi_cfg = cfg.pmvi();
  if (cfg.dataset) {
    const auto data = load_dataset(*cfg.dataset);
    data.check_against(game);
    return {evaluate_dataset(game, nash, data, pmvi_cfg, cfg.seed, {})};
  }
  require(!cfg.ks.empty(), ErrorKind::InvalidArgument, "need --k or --dataset");
  std::vector<double> lambda;
  if (cfg.schedule == "uniform")
    lambda = well_explored_check(game, {MarkovPolicy::uniform(game, Player::Max),
                                        MarkovPolicy::uniform(game, Player::Min)});
  const auto seeds = cfg.seed_list();
  std::vector<RunRow> rows;
  for (long long K : cfg.ks) {
    auto batch = parallel_map<RunRow>(seeds.size(), cfg.jobs, [&](std::size_t i) {
      const auto data = make_dataset(game, cfg.schedule, K, seeds[i]);
      return evaluate_dataset(game, nash, data, pmvi_cfg, seeds[i], lambda);
    });
    rows.insert(rows.end(), batch.begin(), batch.end());
  }
  return rows;
}

inline void cmd_run(const ExperimentConfig& cfg, std::ostream& os) {
  const auto rows = run_rows(cfg);
  const int H = resolve_game(cfg.game).horizon();
  write_csv_row(os, run_header(H));
  for (const auto& r : rows) write_csv_row(os, run_fields(r, H));
}

inline void cmd_generate_data(const ExperimentConfig& cfg, std::ostream& os) {
  cfg.validate();
  const auto game = resolve_game(cfg.game);
  const long long K = cfg.ks.empty() ? 0 : cfg.ks.front();
  require(cfg.ks.size() <= 1, ErrorKind::InvalidArgument, "generate-data takes a single K");
  write_dataset(os, make_dataset(game, cfg.schedule, K, cfg.seed));
}

// rate-sweep --------------------------------------------------------------

struct RateSummary {
  std::vector<long long> ks;
  std::vector<double> mean_sub;
  std::vector<double> stderr_sub;
  int seeds = 0;
  double slope = 0.0;
  double intercept = 0.0;
  bool degenerate = false;
};

/// Least-squares slope of log(mean_sub) on log(K). Degenerate when the
/// means are constant or a mean is not positive.
inline RateSummary summarize_rate(const std::vector<RunRow>& rows, int seeds) {
  RateSummary s;
  s.seeds = seeds;
  for (std::size_t i = 0; i < rows.size(); i += static_cast<std::size_t>(seeds)) {
    double mean = 0.0;
    for (int j = 0; j < seeds; ++j) mean += rows[i + j].report.sub;
    mean /= seeds;
    double var = 0.0;
    for (int j = 0; j < seeds; ++j) var += std::pow(rows[i + j].report.sub - mean, 2);
    var = seeds > 1 ? var / (seeds - 1) : 0.0;
    s.ks.push_back(rows[i].K);
    s.mean_sub.push_back(mean);
    s.stderr_sub.push_back(std::sqrt(var / seeds));
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < s.ks.size(); ++i) {
    if (s.ks[i] <= 0 || s.mean_sub[i] <= 0.0) {
      s.degenerate = true;
      continue;
    }
    lx.push_back(std::log(static_cast<double>(s.ks[i])));
    ly.push_back(std::log(s.mean_sub[i]));
  }
  require(lx.size() >= 2, ErrorKind::InvalidArgument,
          "rate sweep needs at least two K values with positive mean suboptimality");
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  require(sxx > 0.0, ErrorKind::InvalidArgument, "rate sweep needs at least two distinct K");
  s.slope = sxy / sxx;
  s.intercept = my - s.slope * mx;
  const auto [lo, hi] = std::minmax_element(ly.begin(), ly.end());
  if (*hi - *lo <= 1e-9) s.degenerate = true;
  return s;
}

inline const std::vector<long long>& default_rate_ks() {
  static const std::vector<long long> ks{100, 300, 1000, 3000, 10000};
  return ks;
}

inline void write_rate_summary(std::ostream& os, const RateSummary& s) {
  write_csv_row(os, {"K", "seeds", "mean_sub", "stderr_sub", "fitted_slope", "degenerate"});
  for (std::size_t i = 0; i < s.ks.size(); ++i)
    write_csv_row(os, {std::to_string(s.ks[i]), std::to_string(s.seeds), format_double(s.mean_sub[i]),
                       format_double(s.stderr_sub[i]), format_double(s.slope),
                       s.degenerate ? "1" : "0"});
}

/// Per-seed rows to `rows_out`, the per-K summary with the fitted slope to
/// `summary_out`.
inline RateSummary cmd_rate_sweep(const ExperimentConfig& cfg, std::ostream& rows_out,
                                  std::ostream& summary_out) {
  require(!cfg.dataset, ErrorKind::InvalidArgument, "rate-sweep samples its own datasets");
  ExperimentConfig c = cfg;
  if (c.ks.empty()) c.ks = default_rate_ks();
  const auto rows = run_rows(c);
  const int H = resolve_game(c.game).horizon();
  write_csv_row(rows_out, run_header(H));
  for (const auto& r : rows) write_csv_row(rows_out, run_fields(r, H));
  const auto summary = summarize_rate(rows, c.seeds);
  write_rate_summary(summary_out, summary);
  return summary;
}

// lower-bound -------------------------------------------------------------

inline const std::vector<long long>& default_lower_bound_ks() {
  static const std::vector<long long> ks{100, 1000, 10000};
  return ks;
}

struct LowerBoundResult {
  long long K = 0;
  RiskTable table;
};

inline std::vector<LowerBoundResult> lower_bound_results(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto ks = cfg.ks.empty() ? default_lower_bound_ks() : cfg.ks;
  require(cfg.schedule == "balanced" || cfg.schedule == "uniform", ErrorKind::InvalidArgument,
          "lower-bound uses the balanced schedule");
  std::vector<LowerBoundResult> out;
  for (long long K : ks) {
    require(K >= 1, ErrorKind::InvalidArgument, "lower-bound needs K >= 1");
    const auto schedule = balanced_schedule(cfg.num_actions, cfg.num_actions, K);
    out.push_back({K, run_lower_bound_experiment(pmvi_algorithm(cfg.pmvi()), schedule,
                                                 cfg.seed_list(), cfg.num_actions, cfg.horizon,
                                                 cfg.jobs)});
  }
  return out;
}

inline void write_risk_rows(std::ostream& os, const std::vector<LowerBoundResult>& results) {
  write_csv_row(os, {"game_id", "seed", "K", "subb", "ru", "subb_over_ru", "p_star_minus_p"});
  for (const auto& res : results)
    for (const auto& r : res.table.rows)
      write_csv_row(os, {std::to_string(r.game_id), std::to_string(r.seed), std::to_string(r.K),
                         format_double(r.subb), format_double(r.ru), format_double(r.subb_over_ru),
                         format_double(r.p_star_minus_p)});
}

inline void write_risk_summary(std::ostream& os, const std::vector<LowerBoundResult>& results) {
  write_csv_row(os, {"K", "p", "p_star", "mean_subb_m1", "mean_subb_m2", "mean_ratio_m1",
                     "mean_ratio_m2", "worse_game", "identity_error", "reduction_lhs",
                     "reduction_rhs", "kl", "hoeffding_frequency"});
  for (const auto& res : results) {
    const auto& s = res.table.summary;
    write_csv_row(os, {std::to_string(res.K), format_double(s.p), format_double(s.p_star),
                       format_double(s.mean_subb[0]), format_double(s.mean_subb[1]),
                       format_double(s.mean_subb_over_ru[0]), format_double(s.mean_subb_over_ru[1]),
                       std::to_string(s.worse_game()), format_double(s.identity_error),
                       format_double(s.reduction_lhs), format_double(s.reduction_rhs),
                       format_double(s.kl), format_double(s.hoeffding_frequency)});
  }
}

inline std::vector<LowerBoundResult> cmd_lower_bound(const ExperimentConfig& cfg,
                                                     std::ostream& rows_out,
                                                     std::ostream* summary_out) {
  auto results = lower_bound_results(cfg);
  write_risk_rows(rows_out, results);
  if (summary_out) write_risk_summary(*summary_out, results);
  return results;
}

// solve-matrix ------------------------------------------------------------

inline void cmd_solve_matrix(std::istream& in, std::ostream& os, double tol = kDefaultNashTol) {
  const auto game = read_matrix_csv(in);
  const auto sol = solve_zero_sum(game, tol);
  std::vector<std::string> row{"row"}, col{"col"};
  for (double v : sol.row_strategy) row.push_back(format_double(v));
  for (double v : sol.col_strategy) col.push_back(format_double(v));
  write_csv_row(os, {"value", format_double(sol.value)});
  write_csv_row(os, {"exploitability", format_double(sol.exploitability)});
  write_csv_row(os, row);
  write_csv_row(os, col);
}

// evaluate ----------------------------------------------------------------

/// Evaluation row for a stored PMVI output; seed and K columns are blank.
inline void cmd_evaluate(const TabularLinearMG& game, const PmviOutput& out, std::ostream& os) {
  const auto nash = exact_nash_values(game);
  RunRow row;
  row.beta = out.beta;
  row.report = evaluate_pmvi(game, out, nash);
  std::vector<std::vector<double>> widths;
  for (const auto& st : out.steps) widths.push_back(elliptical_widths(game, st.gram));
  row.ru = relative_uncertainty(game, widths, {PolicyPair{nash.pi, nash.nu}});
  auto fields = run_fields(row, game.horizon());
  fields[0] = fields[1] = "";
  write_csv_row(os, run_header(game.horizon()));
  write_csv_row(os, fields);
}

}  // namespace pmvi
