#ifndef ISL_HARNESS_HPP_
#define ISL_HARNESS_HPP_

// Experiment runner behind the command line tool: JSON configs, per-seed runs,
// CSV records, sweeps, quartile plots and the oracle verification suites.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "isl/approx.hpp"
#include "isl/envs.hpp"
#include "isl/tabular.hpp"

namespace isl {

/// Bad configuration. what() reads "<source>:<line>: <message>".
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& source, int line, const std::string& message)
      : InvalidArgument(source + ":" + std::to_string(line) + ": " + message), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

enum class AgentKind { kTabular, kDeep, kDpSolver };
enum class Metric { kBestReturn, kEpisodesToGoal };

struct EnvSpec {
  std::string name = "deep_sea";  // deep_sea | cartpole
  DeepSeaConfig deep_sea;
  bool fixed_mask = false;  // false: the mask seed is the run seed
  CartpoleConfig cartpole;
};

struct ExperimentConfig {
  EnvSpec env;
  AgentKind agent = AgentKind::kTabular;
  LearnerConfig tabular;
  DeepIslConfig deep;
  double dp_tolerance = 1e-10;
  std::vector<std::uint64_t> seeds{0};
  int episodes = 1000;
  Metric metric = Metric::kBestReturn;
  int goal_visits_target = 10;
  bool stop_at_target = false;  // stop a seed once the goal-visit target is met
  std::string output_dir;       // empty: not set in the file
  int jobs = 1;
  /// Sweep axes, dotted key -> values (raw JSON text of each value).
  std::map<std::string, std::vector<std::string>> grid;
};

/// Parses and validates. `source` only labels error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON of a parsed config (sorted keys, no grid).
std::string config_to_json(const ExperimentConfig& cfg);

/// "0..9" (inclusive) or "1,4,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct EpisodeRow {
  int episode = 0;  // 1-based
  double episode_return = 0.0;
  int length = 0;
  long goal_visits = 0;  // cumulative
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<EpisodeRow> rows;
  double metric = 0.0;
  std::string status = "ok";  // ok | censored | diverged
};

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed);
/// One run per seed on up to cfg.jobs threads; results in seed-list order.
std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg);

/// Shortest round-trip decimal form.
std::string format_number(double x);

/// Writes seed_<k>.csv, summary.csv and config.json into `dir`.
void write_run(const ExperimentConfig& cfg, const std::vector<SeedResult>& results, const std::filesystem::path& dir);

struct SweepPoint {
  std::string dir;
  std::map<std::string, std::string> values;
  bool skipped = false;  // already complete from an earlier invocation
};

/// Runs every grid point not already complete under `dir`/point_<i>, then writes index.csv.
std::vector<SweepPoint> run_sweep(const std::string& config_text, const std::string& source,
                                  const std::filesystem::path& dir, const std::vector<std::uint64_t>* seeds_override,
                                  int jobs_override);

/// Linear interpolation between order statistics: h = (n - 1) p.
double quantile(std::vector<double> values, double p);

/// Writes SVG plots for a run or sweep directory; returns the files written.
std::vector<std::filesystem::path> plot_directory(const std::filesystem::path& dir);

enum class VerifyLevel { kQuick, kFull };

using PolicyFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd& q, const Eigen::VectorXd& ell, double kappa)>;

struct VerifyOptions {
  VerifyLevel level = VerifyLevel::kQuick;
  /// Policy under test; defaults to optimal_policy. Tests swap in broken versions.
  PolicyFunction policy;
  /// Run a single suite by name; empty runs them all.
  std::string only;
};

/// Runs the differential suites, writing a report to `out`. Returns true when
/// every instance passes; failing instances are dumped as JSON.
bool verify(const VerifyOptions& options, std::ostream& out);

}  // namespace isl

#endif  // ISL_HARNESS_HPP_
