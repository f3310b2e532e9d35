// ffs: test-time-scaling orchestration CLI.
//
// Subcommands:
//   simulate  sweep strategies over a dataset on the deterministic simulator
//   run       same sweep against an OpenAI-compatible streaming endpoint
//   theory    expected-extreme vs Monte-Carlo oracle table + formula checks
//   analyze   length-distribution statistics over a persisted trace log
//
// Machine-readable output (CSV/JSON) goes to stdout or --out files; human
// logs go to stderr. Exit codes: 0 success, 1 usage error, 2 run failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ffs/analyze.hpp"
#include "ffs/harness.hpp"
#include "ffs/http_backend.hpp"
#include "ffs/sim_backend.hpp"
#include "ffs/theory.hpp"

namespace {

firstfinish::Strategy parse_strategy(const std::string& name) {
  if (name == "sd") return firstfinish::Strategy::Sd;
  if (name == "ffs") return firstfinish::Strategy::FfsAsync;
  if (name == "ffs-sync") return firstfinish::Strategy::FfsSync;
  if (name == "lfs") return firstfinish::Strategy::Lfs;
  if (name == "mv") return firstfinish::Strategy::Mv;
  if (name == "bf") return firstfinish::Strategy::Bf;
  throw CLI::ValidationError("--strategy", "unknown strategy '" + name + "'");
}

struct SweepFlags {
  std::string dataset_path;
  std::string profile_path;  // simulate only
  std::vector<std::string> strategies{"ffs"};
  int n = 4;
  std::uint64_t seed = 0;
  double temperature = 0.6;
  double top_p = 0.95;
  long max_tokens = 32768;
  long bf_reserve = 3072;
  int repeats = 1;
  int parallel = 1;
  std::string out_dir;
  std::string base_url;  // run only
  std::string model;     // run only
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& f, bool http) {
  cmd->add_option("--dataset", f.dataset_path, "JSONL dataset of questions")->required();
  if (!http) cmd->add_option("--profile", f.profile_path, "length-profile JSON for the simulator");
  cmd->add_option("--strategy", f.strategies,
                  "strategies to run: sd, ffs, ffs-sync, lfs, mv, bf (repeatable)");
  cmd->add_option("--n", f.n, "parallel samples per question")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "master seed; all randomness derives from it");
  cmd->add_option("--temperature", f.temperature, "sampling temperature");
  cmd->add_option("--top-p", f.top_p, "nucleus sampling mass");
  cmd->add_option("--max-tokens", f.max_tokens, "per-trace token cap")->check(CLI::PositiveNumber);
  cmd->add_option("--bf-reserve", f.bf_reserve, "tokens reserved for the forced answer (bf)");
  cmd->add_option("--repeats", f.repeats, "independent repeats per question")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--parallel", f.parallel, "max concurrent questions")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out_dir, "output directory for metrics.csv / questions.jsonl");
  if (http) {
    cmd->add_option("--base-url", f.base_url, "endpoint base URL (default: env FFS_BASE_URL)");
    cmd->add_option("--model", f.model, "model name for the request body")->required();
  }
}

int run_sweep(firstfinish::Backend& backend, const SweepFlags& f) {
  const auto dataset = firstfinish::load_dataset(f.dataset_path);
  if (dataset.empty()) {
    std::cerr << "error: dataset " << f.dataset_path << " has no records\n";
    return 1;
  }
  firstfinish::SweepConfig config;
  config.dataset_name = std::filesystem::path(f.dataset_path).stem().string();
  config.params.temperature = f.temperature;
  config.params.top_p = f.top_p;
  config.params.max_tokens = f.max_tokens;
  config.params.n_samples = f.n;
  config.params.bf_answer_reserve = f.bf_reserve;
  config.seed = f.seed;
  config.repeats = f.repeats;
  config.parallel = f.parallel;
  config.out_dir = f.out_dir;

  std::vector<firstfinish::Strategy> strategies;
  for (const auto& name : f.strategies) strategies.push_back(parse_strategy(name));

  firstfinish::EvalHarness harness(backend, dataset, config);
  const auto rows = harness.run_sweep(strategies);
  for (const auto& s : harness.skipped()) {
    std::cerr << "skipped " << s.strategy << ": " << s.reason << '\n';
  }

  std::cout << firstfinish::EvalHarness::metrics_csv_header() << '\n';
  for (const auto& row : rows) std::cout << firstfinish::EvalHarness::metrics_csv_row(row) << '\n';
  if (!f.out_dir.empty()) std::cerr << "wrote " << f.out_dir << "/metrics.csv\n";
  return 0;
}

int cmd_simulate(const SweepFlags& f) {
  firstfinish::LengthProfile profile;
  if (!f.profile_path.empty()) profile = firstfinish::LengthProfile::load(f.profile_path);
  firstfinish::SimulatedBackend backend(profile, f.seed);
  for (const auto& record : firstfinish::load_dataset(f.dataset_path)) {
    backend.add_question(record.id, record.answer);
  }
  return run_sweep(backend, f);
}

int cmd_run(const SweepFlags& f) {
  if (!std::getenv("FFS_API_KEY")) {
    std::cerr << "error: FFS_API_KEY is not set (export FFS_API_KEY=<secret>)\n";
    return 1;
  }
  firstfinish::ApiConfig api = firstfinish::ApiConfig::from_env(f.model);
  if (!f.base_url.empty()) api.base_url = f.base_url;
  firstfinish::HttpBackend backend(api);
  return run_sweep(backend, f);
}

int cmd_theory(long trials, std::uint64_t seed) {
  // Oracle table: asymptotic vs Monte-Carlo extremes of n standard normals.
  std::cout << "n,extreme,asymptotic,mc_value,mc_std_error\n";
  firstfinish::RngStream rng(seed);
  for (int n : {1, 10, 100, 1000}) {
    for (firstfinish::Extreme which : {firstfinish::Extreme::Min, firstfinish::Extreme::Max}) {
      const double asym =
          n == 1 ? 0.0 : firstfinish::expected_extreme(0.0, 1.0, n, which);
      const auto mc = firstfinish::mc_extreme(0.0, 1.0, n, trials,
                                      which, rng.substream(which == firstfinish::Extreme::Min ? "min" : "max")
                                                 .substream(static_cast<std::uint64_t>(n)));
      std::cout << n << ',' << (which == firstfinish::Extreme::Min ? "min" : "max") << ',' << asym << ','
                << mc.value << ',' << mc.std_error << '\n';
    }
  }

  // Formula self-checks; any failure flips the exit code.
  bool ok = true;
  auto check = [&](const char* name, bool pass) {
    std::cerr << (pass ? "pass" : "FAIL") << ": " << name << '\n';
    ok = ok && pass;
  };
  {
    firstfinish::MixtureParams p{0.5, 0.0, 1.0, 4.0, 1.0};
    check("p_correct_given_length midpoint = 1/2",
          std::abs(firstfinish::p_correct_given_length(2.0, p) - 0.5) < 1e-12);
    double prev = 1.0;
    bool monotone = true;
    for (int i = 0; i <= 1000; ++i) {
      const double x = -6.0 + 16.0 * i / 1000.0;
      const double v = firstfinish::p_correct_given_length(x, p);
      monotone = monotone && v <= prev + 1e-12;
      prev = v;
    }
    check("p_correct_given_length monotone (sigma1=sigma2, mu1<mu2)", monotone);
  }
  {
    firstfinish::RngStream r(seed);
    const auto mn = firstfinish::mc_extreme(0.0, 1.0, 100, trials, firstfinish::Extreme::Min, r.substream("chk"));
    const double asym = firstfinish::expected_extreme(0.0, 1.0, 100, firstfinish::Extreme::Min);
    check("mc min of 100 lies between asymptote and mean",
          mn.value > asym && mn.value < 0.0);
  }
  return ok ? 0 : 2;
}

int cmd_analyze(const std::string& log_path, const std::string& out_dir) {
  const auto traces = firstfinish::load_trace_log(log_path);
  const auto report = firstfinish::analyze_traces(traces);
  const std::string questions = firstfinish::analysis_questions_csv(report);
  const std::string summary = firstfinish::analysis_summary_csv(report);
  const std::string curve = firstfinish::analysis_curve_csv(report);
  if (out_dir.empty()) {
    std::cout << questions << '\n' << summary << '\n' << curve;
  } else {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "normality.csv") << questions;
    std::ofstream(fs::path(out_dir) / "separation.csv") << summary;
    std::ofstream(fs::path(out_dir) / "fitted_curve.csv") << curve;
    std::cerr << "wrote " << out_dir << "/{normality,separation,fitted_curve}.csv\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-Finish Search: parallel decoding strategies and theory checks"};
  app.require_subcommand(1);

  SweepFlags sim_flags, run_flags;
  auto* simulate = app.add_subcommand("simulate", "evaluate strategies on the simulator");
  add_sweep_flags(simulate, sim_flags, /*http=*/false);
  auto* run = app.add_subcommand("run", "evaluate strategies against a live endpoint");
  add_sweep_flags(run, run_flags, /*http=*/true);

  long trials = 100000;
  std::uint64_t theory_seed = 0;
  auto* theory = app.add_subcommand("theory", "extreme-value oracle table and formula checks");
  theory->add_option("--trials", trials, "Monte-Carlo trials")->check(CLI::Range(1000L, 100000000L));
  theory->add_option("--seed", theory_seed, "master seed");

  std::string log_path, analyze_out;
  auto* analyze = app.add_subcommand("analyze", "trace-length statistics from questions.jsonl");
  analyze->add_option("--log", log_path, "questions.jsonl from a previous run")->required();
  analyze->add_option("--out", analyze_out, "output directory (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_flags);
    if (run->parsed()) return cmd_run(run_flags);
    if (theory->parsed()) return cmd_theory(trials, theory_seed);
    if (analyze->parsed()) return cmd_analyze(log_path, analyze_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
