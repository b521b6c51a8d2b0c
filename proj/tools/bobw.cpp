// Command-line front end: run experiments, fit regret curves, run the
// acceptance suite and print gap diagnostics.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bobw/acceptance.hpp"
#include "bobw/config.hpp"
#include "bobw/harness.hpp"

#ifndef BOBW_FIXTURE_DIR
#define BOBW_FIXTURE_DIR "tests/fixtures"
#endif

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kAcceptance = 2;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const auto first = std::stoull(text.substr(0, colon));
    const auto count = std::stoull(text.substr(colon + 1));
    for (std::uint64_t i = 0; i < count; ++i) out.push_back(first + i);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  if (out.empty()) throw bobw::Error(bobw::Errc::config_error, "--seeds: empty seed list");
  return out;
}

void print_fits(const std::vector<double>& mean) {
  for (auto model : {bobw::FitModel::log, bobw::FitModel::sqrt}) {
    try {
      const auto f = bobw::fit_scaling(mean, model);
      std::printf("fit %-4s coefficient %.6g intercept %.6g R2 %.6f\n", model == bobw::FitModel::log ? "log" : "sqrt",
                  f.coefficient, f.intercept, f.r2);
    } catch (const bobw::Error& e) {
      std::printf("fit %-4s unavailable: %s\n", model == bobw::FitModel::log ? "log" : "sqrt", e.what());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Best-of-both-worlds learners for layered MDPs and online shortest paths"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds_text, learner_override;
  int threads = 1;
  auto* run_cmd = app.add_subcommand("run", "run a configured experiment over its seeds");
  run_cmd->add_option("--config", config_path, "JSON run configuration")->required();
  run_cmd->add_option("--out-dir", out_dir, "output directory (overrides output.dir)");
  run_cmd->add_option("--seeds", seeds_text, "comma list or first:count");
  run_cmd->add_option("--learner-override", learner_override, "replace learner.id");
  run_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  std::string trace_path, model_name = "log";
  auto* fit_cmd = app.add_subcommand("fit", "fit the mean regret of a JSON trace file");
  fit_cmd->add_option("--input", trace_path, "trace JSON written by run")->required();
  fit_cmd->add_option("--model", model_name, "log or sqrt");

  std::string fixture_dir = BOBW_FIXTURE_DIR;
  std::vector<int> only;
  auto* accept_cmd = app.add_subcommand("accept", "run the acceptance suite");
  accept_cmd->add_option("--fixtures", fixture_dir, "directory holding gap_fixture.json");
  accept_cmd->add_option("--only", only, "criterion ids to run");
  accept_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* diag_cmd = app.add_subcommand("diag", "diagnostics");
  diag_cmd->require_subcommand(1);
  auto* gaps_cmd = diag_cmd->add_subcommand("gaps", "print gaps, S* and lower-bound constants");
  gaps_cmd->add_option("--config", config_path, "JSON run configuration")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*run_cmd) {
      bobw::RunConfig cfg = bobw::load_config(config_path);
      if (!out_dir.empty()) cfg.output.dir = out_dir;
      if (!seeds_text.empty()) cfg.seeds = parse_seed_list(seeds_text);
      if (!learner_override.empty()) {
        cfg.learner = bobw::parse_learner(learner_override);
        if (bobw::is_graph_learner(cfg.learner) != std::holds_alternative<bobw::Dag>(cfg.instance)) {
          throw bobw::Error(bobw::Errc::config_error, "--learner-override does not match the instance kind");
        }
      }
      const auto traces = bobw::run(cfg, bobw::RunOptions{threads});
      bobw::emit(traces, cfg.output);
      const auto summary = bobw::summarize(traces);
      std::printf("%zu seeds, T=%lld, learner %s, mode %s\n", traces.size(), cfg.horizon,
                  bobw::to_string(cfg.learner).c_str(), bobw::to_string(cfg.environment.mode).c_str());
      std::printf("final pseudo-regret %.6g +- %.3g\n", summary.final_mean, summary.final_stderr);
      if (!summary.mean.empty()) print_fits(summary.mean);
      std::printf("wrote %s/%s.{csv,json,svg}\n", cfg.output.dir.c_str(), cfg.output.prefix.c_str());
      return kOk;
    }
    if (*fit_cmd) {
      std::ifstream in(trace_path);
      if (!in) throw bobw::Error(bobw::Errc::config_error, "cannot open " + trace_path);
      const auto traces = bobw::read_json(in);
      const auto summary = bobw::summarize(traces);
      const auto f = bobw::fit_scaling(summary.mean, bobw::parse_fit_model(model_name));
      std::printf("model %s coefficient %.6g intercept %.6g R2 %.6f points %zu\n", model_name.c_str(),
                  f.coefficient, f.intercept, f.r2, f.points);
      return kOk;
    }
    if (*accept_cmd) {
      bobw::AcceptanceOptions opt;
      opt.fixture_dir = fixture_dir;
      opt.threads = threads;
      opt.only = std::set<int>(only.begin(), only.end());
      const auto results = bobw::run_acceptance(opt, std::cout);
      int failed = 0;
      for (const auto& r : results) failed += r.passed ? 0 : 1;
      std::printf("%zu criteria, %d failed\n", results.size(), failed);
      return failed == 0 ? kOk : kAcceptance;
    }
    if (*gaps_cmd) {
      const bobw::RunConfig cfg = bobw::load_config(config_path);
      std::cout << bobw::gap_report(cfg).dump(2) << '\n';
      return kOk;
    }
  } catch (const bobw::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  }
  return kOk;
}
