// isl: run | sweep | plot | verify. Exit codes: 0 ok, 1 verification or run
// failure, 2 usage or configuration error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "isl/harness.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// --out, then the config's output_dir, then ISL_OUT_DIR.
fs::path resolve_out_dir(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (const char* env = std::getenv("ISL_OUT_DIR"); env != nullptr && *env != '\0') return env;
  throw isl::InvalidArgument("no output directory: pass --out, set output_dir in the config, or set ISL_OUT_DIR");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw isl::InvalidArgument("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information seeking learner: experiments, plots and verification"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seeds;
  int jobs = 0;
  std::string level = "quick";
  std::string plot_dir;
  std::string suite;

  auto* run = app.add_subcommand("run", "run one experiment for every seed");
  auto* sweep = app.add_subcommand("sweep", "run every point of the config's parameter grid");
  for (auto* sub : {run, sweep}) {
    sub->add_option("--config", config_path, "experiment JSON")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seeds", seeds, "seed list, \"0..9\" or \"1,2,3\"");
    sub->add_option("--jobs", jobs, "concurrent seeds")->check(CLI::PositiveNumber);
  }
  auto* plot = app.add_subcommand("plot", "write SVG quartile plots for a run or sweep directory");
  plot->add_option("dir", plot_dir, "run or sweep directory");
  plot->add_option("--out", out_dir, "run or sweep directory (alternative to the positional argument)");
  auto* verify = app.add_subcommand("verify", "differential checks against the brute-force oracles");
  verify->add_option("--level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  verify->add_option("--suite", suite, "run only this suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (run->parsed()) {
      const std::string text = read_text(config_path);
      isl::ExperimentConfig cfg = isl::parse_config(text, config_path);
      if (!cfg.grid.empty()) throw isl::InvalidArgument(config_path + ": \"grid\" is only valid for sweep");
      if (!seeds.empty()) cfg.seeds = isl::parse_seed_list(seeds);
      if (jobs > 0) cfg.jobs = jobs;
      const fs::path dir = resolve_out_dir(out_dir, cfg.output_dir);
      const auto results = isl::run_experiment(cfg);
      isl::write_run(cfg, results, dir);
      for (const auto& r : results) {
        std::cout << "seed " << r.seed << ": metric " << isl::format_number(r.metric) << " (" << r.status << ")\n";
      }
      std::cout << "wrote " << dir.string() << "\n";
      return 0;
    }
    if (sweep->parsed()) {
      const std::string text = read_text(config_path);
      const isl::ExperimentConfig cfg = isl::parse_config(text, config_path);
      const fs::path dir = resolve_out_dir(out_dir, cfg.output_dir);
      std::vector<std::uint64_t> seed_list;
      if (!seeds.empty()) seed_list = isl::parse_seed_list(seeds);
      const auto points = isl::run_sweep(text, config_path, dir, seeds.empty() ? nullptr : &seed_list, jobs);
      for (const auto& p : points) std::cout << p.dir << (p.skipped ? " (already complete)" : "") << "\n";
      std::cout << "wrote " << (dir / "index.csv").string() << "\n";
      return 0;
    }
    if (plot->parsed()) {
      const std::string dir = !plot_dir.empty() ? plot_dir : out_dir;
      if (dir.empty()) throw isl::InvalidArgument("plot needs a directory");
      for (const auto& f : isl::plot_directory(dir)) std::cout << "wrote " << f.string() << "\n";
      return 0;
    }
    if (verify->parsed()) {
      isl::VerifyOptions options;
      options.level = level == "full" ? isl::VerifyLevel::kFull : isl::VerifyLevel::kQuick;
      options.only = suite;
      return isl::verify(options, std::cout) ? 0 : kExitFailure;
    }
  } catch (const isl::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
