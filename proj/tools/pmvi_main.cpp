// pmvi: command-line experiment runner.
//
//   pmvi generate-data --game sandwich --k 2000 --seed 7 --out data.jsonl
//   pmvi run --game sandwich --k 500,2000 --seeds 20 --out run.csv
//   pmvi rate-sweep --seeds 50 --out rows.csv --summary summary.csv
//   pmvi lower-bound --seeds 200 --out risk.csv --summary risk_summary.csv
//   pmvi solve-matrix --matrix m.csv
//   pmvi evaluate --game sandwich --pmvi output.json
//
// Option values load in three layers: subcommand defaults, then the
// --config JSON file, then flags.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmvi/experiments.hpp"
#include "pmvi/io.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kInvariantError = 3 };

struct Options {
  pmvi::ExperimentConfig cfg;
  std::string out;
  std::string summary;
  std::string pmvi_out;
  std::string pmvi_in;
  std::string matrix;
  double nash_tol = pmvi::kDefaultNashTol;
};

void apply_subcommand_defaults(const std::string& sub, Options& o) {
  if (sub == "rate-sweep") {
    o.cfg.game = "rate-bandit";
    o.cfg.seeds = 50;
    o.cfg.c = 0.02;
  } else if (sub == "lower-bound") {
    o.cfg.seeds = 200;
    o.cfg.schedule = "balanced";
  }
}

void apply_config_file(const std::string& path, Options& o) {
  const auto j = pmvi::read_json_file(path);
  pmvi::require(j.is_object(), pmvi::ErrorKind::InvalidArgument, "config file must be an object");
  static const std::vector<std::string> known{
      "game", "dataset", "k", "seeds", "seed", "beta", "c", "p", "jobs", "schedule",
      "actions", "horizon", "out", "summary", "pmvi", "pmvi_out", "matrix", "nash_tol"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end())
        pmvi::fail(pmvi::ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
      auto& c = o.cfg;
      if (key == "game") c.game = value.get<std::string>();
      if (key == "dataset") c.dataset = value.get<std::string>();
      if (key == "k")
        c.ks = value.is_array() ? value.get<std::vector<long long>>()
                                : std::vector<long long>{value.get<long long>()};
      if (key == "seeds") c.seeds = value.get<int>();
      if (key == "seed") c.seed = value.get<std::uint64_t>();
      if (key == "beta") c.beta = value.get<double>();
      if (key == "c") c.c = value.get<double>();
      if (key == "p") c.p = value.get<double>();
      if (key == "jobs") c.jobs = value.get<int>();
      if (key == "schedule") c.schedule = value.get<std::string>();
      if (key == "actions") c.num_actions = value.get<int>();
      if (key == "horizon") c.horizon = value.get<int>();
      if (key == "out") o.out = value.get<std::string>();
      if (key == "summary") o.summary = value.get<std::string>();
      if (key == "pmvi") o.pmvi_in = value.get<std::string>();
      if (key == "pmvi_out") o.pmvi_out = value.get<std::string>();
      if (key == "matrix") o.matrix = value.get<std::string>();
      if (key == "nash_tol") o.nash_tol = value.get<double>();
    }
  } catch (const pmvi::json::exception& e) {
    pmvi::fail(pmvi::ErrorKind::InvalidArgument, path + ": " + e.what());
  }
}

/// Writes to the named file, or stdout when the name is empty.
template <class Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) pmvi::fail(pmvi::ErrorKind::Io, "cannot write " + path);
  fn(os);
  if (!os) pmvi::fail(pmvi::ErrorKind::Io, "write failed for " + path);
}

void write_pmvi_output(const Options& o) {
  const auto& c = o.cfg;
  const auto game = pmvi::resolve_game(c.game);
  pmvi::OfflineDataset data;
  if (c.dataset) {
    data = pmvi::load_dataset(*c.dataset);
  } else {
    pmvi::require(c.ks.size() == 1 && c.seeds == 1, pmvi::ErrorKind::InvalidArgument,
                  "--pmvi-out needs a single dataset (one K and one seed, or --dataset)");
    data = pmvi::make_dataset(game, c.schedule, c.ks.front(), c.seed);
  }
  const auto out = pmvi::run_pmvi(game, data, c.pmvi());
  with_output(o.pmvi_out, [&](std::ostream& os) {
    os << pmvi::pmvi_output_to_json(game, out).dump() << '\n';
  });
}

int run(int argc, char** argv) {
  Options o;
  if (argc >= 2) apply_subcommand_defaults(argv[1], o);
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") apply_config_file(argv[i + 1], o);

  CLI::App app{"Offline pessimistic minimax value iteration experiments"};
  app.require_subcommand(1);
  std::string config_path;
  auto& c = o.cfg;
  std::optional<std::string> dataset_flag;
  std::optional<double> beta_flag;

  auto common = [&](CLI::App* sub, bool with_data) {
    sub->add_option("--config", config_path, "JSON file with option defaults");
    sub->add_option("--game", c.game, "Built-in game name or JSON game file")->capture_default_str();
    sub->add_option("--k", c.ks, "Trajectory counts, comma separated")->delimiter(',');
    sub->add_option("--seed", c.seed, "First seed")->capture_default_str();
    sub->add_option("--out", o.out, "Output file (stdout when omitted)");
    if (with_data) {
      sub->add_option("--seeds", c.seeds, "Number of seeds")->capture_default_str();
      auto* beta = sub->add_option("--beta", beta_flag, "Bonus scale");
      sub->add_option("--c", c.c, "Bonus constant when --beta is absent")
          ->capture_default_str()
          ->excludes(beta);
      sub->add_option("--p", c.p, "Confidence level when --beta is absent")
          ->capture_default_str()
          ->excludes(beta);
      sub->add_option("--jobs", c.jobs, "Worker threads")->capture_default_str();
    }
    sub->add_option("--schedule", c.schedule,
                    "uniform (behavior policy), balanced, or first-step pairs a:b,a:b,...")
        ->capture_default_str();
  };

  auto* gen = app.add_subcommand("generate-data", "Sample a JSON-lines dataset");
  common(gen, false);
  auto* run_cmd = app.add_subcommand("run", "PMVI plus exact evaluation, one CSV row per (K, seed)");
  common(run_cmd, true);
  run_cmd->add_option("--dataset", dataset_flag, "Evaluate this dataset instead of sampling");
  run_cmd->add_option("--pmvi-out", o.pmvi_out, "Also write the PMVI output as JSON");
  auto* rate = app.add_subcommand("rate-sweep", "Suboptimality against K with a log-log fit");
  common(rate, true);
  rate->add_option("--summary", o.summary, "Per-K summary CSV (stderr when omitted)");
  auto* lb = app.add_subcommand("lower-bound", "Two-point hard-instance risk experiment");
  common(lb, true);
  lb->add_option("--summary", o.summary, "Per-K summary CSV (stderr when omitted)");
  lb->add_option("--actions", c.num_actions, "Actions per player")->capture_default_str();
  lb->add_option("--horizon", c.horizon, "Horizon")->capture_default_str();
  auto* solve = app.add_subcommand("solve-matrix", "Solve a zero-sum matrix game from CSV");
  solve->add_option("--config", config_path, "JSON file with option defaults");
  solve->add_option("--matrix", o.matrix, "CSV matrix file (stdin when omitted)");
  solve->add_option("--tol", o.nash_tol, "Exploitability tolerance")->capture_default_str();
  solve->add_option("--out", o.out, "Output file (stdout when omitted)");
  auto* eval = app.add_subcommand("evaluate", "Evaluate a stored PMVI output");
  eval->add_option("--config", config_path, "JSON file with option defaults");
  eval->add_option("--game", c.game, "Built-in game name or JSON game file")->capture_default_str();
  eval->add_option("--pmvi", o.pmvi_in, "PMVI output JSON");
  eval->add_option("--out", o.out, "Output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (dataset_flag) c.dataset = dataset_flag;
  if (beta_flag) c.beta = beta_flag;

  if (gen->parsed()) {
    c.validate();
    with_output(o.out, [&](std::ostream& os) { pmvi::cmd_generate_data(c, os); });
  } else if (run_cmd->parsed()) {
    std::ostringstream buf;
    pmvi::cmd_run(c, buf);
    with_output(o.out, [&](std::ostream& os) { os << buf.str(); });
    if (!o.pmvi_out.empty()) write_pmvi_output(o);
  } else if (rate->parsed()) {
    std::ostringstream rows, summary;
    const auto s = pmvi::cmd_rate_sweep(c, rows, summary);
    with_output(o.out, [&](std::ostream& os) { os << rows.str(); });
    if (o.summary.empty())
      std::cerr << summary.str();
    else
      with_output(o.summary, [&](std::ostream& os) { os << summary.str(); });
    std::cerr << "fitted slope " << pmvi::format_double(s.slope)
              << (s.degenerate ? " (degenerate)" : "") << '\n';
  } else if (lb->parsed()) {
    std::ostringstream rows, summary;
    pmvi::cmd_lower_bound(c, rows, &summary);
    with_output(o.out, [&](std::ostream& os) { os << rows.str(); });
    if (o.summary.empty())
      std::cerr << summary.str();
    else
      with_output(o.summary, [&](std::ostream& os) { os << summary.str(); });
  } else if (solve->parsed()) {
    std::ostringstream buf;
    if (o.matrix.empty() || o.matrix == "-") {
      pmvi::cmd_solve_matrix(std::cin, buf, o.nash_tol);
    } else {
      std::ifstream in(o.matrix);
      if (!in) pmvi::fail(pmvi::ErrorKind::Io, "cannot open " + o.matrix);
      pmvi::cmd_solve_matrix(in, buf, o.nash_tol);
    }
    with_output(o.out, [&](std::ostream& os) { os << buf.str(); });
  } else if (eval->parsed()) {
    pmvi::require(!o.pmvi_in.empty(), pmvi::ErrorKind::InvalidArgument, "evaluate needs --pmvi");
    const auto game = pmvi::resolve_game(c.game);
    const auto out = pmvi::pmvi_output_from_json(game, pmvi::read_json_file(o.pmvi_in));
    std::ostringstream buf;
    pmvi::cmd_evaluate(game, out, buf);
    with_output(o.out, [&](std::ostream& os) { os << buf.str(); });
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const pmvi::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case pmvi::ErrorKind::InvariantViolation:
      case pmvi::ErrorKind::SolverFailure:
        return kInvariantError;
      default:
        return kConfigError;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}
