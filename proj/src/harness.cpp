#include "isl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "isl/dp.hpp"

namespace isl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config reading with line-anchored errors

class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& message) const {
    throw ConfigError(source_, line_of(path), message);
  }

  // nlohmann keeps no positions, so a key is located by scanning for each
  // quoted path segment in turn; the deepest one found wins.
  int line_of(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    std::size_t found = std::string::npos;
    for (const std::string& key : path) {
      const std::size_t at = text_.find("\"" + key + "\"", pos);
      if (at == std::string::npos) break;
      found = at;
      pos = at + key.size() + 2;
    }
    if (found == std::string::npos) return 1;
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(found), '\n'));
  }

  void allow_keys(const json& obj, const std::vector<std::string>& path, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(path, join(path) + " must be an object");
    for (const auto& item : obj.items()) {
      const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; });
      if (!known) {
        auto at = path;
        at.push_back(item.key());
        fail(at, "unknown key \"" + item.key() + "\" in " + (path.empty() ? std::string("config") : join(path)));
      }
    }
  }

  double number(const json& obj, std::vector<std::string> path, const char* key, double fallback) const {
    if (!obj.contains(key)) return fallback;
    path.push_back(key);
    const json& v = obj.at(key);
    if (!v.is_number()) fail(path, join(path) + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, join(path) + " must be finite");
    return x;
  }

  long integer(const json& obj, std::vector<std::string> path, const char* key, long fallback) const {
    if (!obj.contains(key)) return fallback;
    path.push_back(key);
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(path, join(path) + " must be an integer");
    return v.get<long>();
  }

  bool boolean(const json& obj, std::vector<std::string> path, const char* key, bool fallback) const {
    if (!obj.contains(key)) return fallback;
    path.push_back(key);
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(path, join(path) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const json& obj, std::vector<std::string> path, const char* key, const std::string& fallback) const {
    if (!obj.contains(key)) return fallback;
    path.push_back(key);
    const json& v = obj.at(key);
    if (!v.is_string()) fail(path, join(path) + " must be a string");
    return v.get<std::string>();
  }

  static std::string join(const std::vector<std::string>& path) {
    std::string out;
    for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
    return out;
  }

 private:
  const std::string& text_;
  std::string source_;
};

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n'));
    throw ConfigError(source, line, "malformed JSON");
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw InvalidArgument("cannot write " + path.string());
}

const char* metric_name(Metric m) { return m == Metric::kBestReturn ? "best-return" : "episodes-to-10th-goal-visit"; }

const char* agent_name(AgentKind k) {
  switch (k) {
    case AgentKind::kTabular:
      return "tabular";
    case AgentKind::kDeep:
      return "deep";
    case AgentKind::kDpSolver:
      return "dp";
  }
  return "?";
}

ExperimentConfig parse_document(const json& doc, const Reader& rd) {
  ExperimentConfig cfg;
  rd.allow_keys(doc, {}, {"environment", "agent", "seeds", "episodes", "metric", "goal_visits_target", "stop_at_target",
                          "output_dir", "jobs", "grid"});

  // Environment.
  if (!doc.contains("environment")) rd.fail({}, "missing \"environment\"");
  const json& env = doc.at("environment");
  const std::vector<std::string> env_path{"environment"};
  if (!env.is_object()) rd.fail(env_path, "environment must be an object");
  cfg.env.name = rd.string(env, env_path, "name", "");
  if (cfg.env.name == "deep_sea") {
    rd.allow_keys(env, env_path, {"name", "n", "stochastic", "noise_std", "mask_seed"});
    cfg.env.deep_sea.n = static_cast<int>(rd.integer(env, env_path, "n", 10));
    cfg.env.deep_sea.stochastic = rd.boolean(env, env_path, "stochastic", false);
    cfg.env.deep_sea.noise_std = rd.number(env, env_path, "noise_std", 1.0);
    if (env.contains("mask_seed")) {
      const long seed = rd.integer(env, env_path, "mask_seed", 0);
      if (seed < 0) rd.fail({"environment", "mask_seed"}, "environment.mask_seed must be non-negative");
      cfg.env.deep_sea.mask_seed = static_cast<std::uint64_t>(seed);
      cfg.env.fixed_mask = true;
    }
    try {
      cfg.env.deep_sea.validate();
    } catch (const InvalidArgument& e) {
      rd.fail(env_path, e.what());
    }
  } else if (cfg.env.name == "cartpole") {
    rd.allow_keys(env, env_path, {"name", "n"});
    cfg.env.cartpole.n = static_cast<int>(rd.integer(env, env_path, "n", 0));
    try {
      cfg.env.cartpole.validate();
    } catch (const InvalidArgument& e) {
      rd.fail(env_path, e.what());
    }
  } else {
    rd.fail({"environment", "name"}, "environment.name must be \"deep_sea\" or \"cartpole\"");
  }
  const bool deep_sea = cfg.env.name == "deep_sea";

  // Agent.
  if (!doc.contains("agent")) rd.fail({}, "missing \"agent\"");
  const json& agent = doc.at("agent");
  const std::vector<std::string> agent_path{"agent"};
  if (!agent.is_object()) rd.fail(agent_path, "agent must be an object");
  const std::string type = rd.string(agent, agent_path, "type", "");
  if (type == "tabular" || type == "dp") {
    cfg.agent = type == "tabular" ? AgentKind::kTabular : AgentKind::kDpSolver;
    if (!deep_sea) rd.fail({"agent", "type"}, "agent type \"" + type + "\" needs a discrete environment (deep_sea)");
    rd.allow_keys(agent, agent_path,
                  {"type", "kappa", "eta1", "mu_q", "mu_rho", "mu_ell", "gamma", "ell_init", "ell_floor", "tolerance"});
    LearnerConfig& t = cfg.tabular;
    t.kappa = rd.number(agent, agent_path, "kappa", t.kappa);
    t.eta1 = rd.number(agent, agent_path, "eta1", t.eta1);
    t.mu_q = rd.number(agent, agent_path, "mu_q", t.mu_q);
    t.mu_rho = rd.number(agent, agent_path, "mu_rho", t.mu_rho);
    t.mu_ell = rd.number(agent, agent_path, "mu_ell", t.mu_ell);
    t.gamma = rd.number(agent, agent_path, "gamma", t.gamma);
    t.ell_init = rd.number(agent, agent_path, "ell_init", t.ell_init);
    t.ell_floor = rd.number(agent, agent_path, "ell_floor", t.ell_floor);
    cfg.dp_tolerance = rd.number(agent, agent_path, "tolerance", cfg.dp_tolerance);
    if (!(cfg.dp_tolerance > 0.0)) rd.fail({"agent", "tolerance"}, "agent.tolerance must be positive");
    try {
      t.validate();
    } catch (const InvalidArgument& e) {
      rd.fail(agent_path, e.what());
    }
  } else if (type == "deep") {
    cfg.agent = AgentKind::kDeep;
    rd.allow_keys(agent, agent_path,
                  {"type", "preset", "kappa", "eta1", "eta2", "gamma", "lr_q", "lr_rho", "lr_ell", "batch_size",
                   "target_update_period", "env_steps", "grad_steps", "hidden", "replay_capacity"});
    const std::string fallback =
        deep_sea ? (cfg.env.deep_sea.stochastic ? "deep_sea_stochastic" : "deep_sea") : "cartpole";
    const std::string preset = rd.string(agent, agent_path, "preset", fallback);
    if (preset == "deep_sea") {
      cfg.deep = DeepIslConfig::deep_sea();
    } else if (preset == "deep_sea_stochastic") {
      cfg.deep = DeepIslConfig::deep_sea_stochastic();
    } else if (preset == "cartpole") {
      cfg.deep = DeepIslConfig::cartpole();
    } else {
      rd.fail({"agent", "preset"}, "agent.preset must be deep_sea, deep_sea_stochastic or cartpole");
    }
    DeepIslConfig& d = cfg.deep;
    d.kappa = rd.number(agent, agent_path, "kappa", d.kappa);
    d.eta1 = rd.number(agent, agent_path, "eta1", d.eta1);
    d.eta2 = rd.number(agent, agent_path, "eta2", d.eta2);
    d.gamma = rd.number(agent, agent_path, "gamma", d.gamma);
    d.lr_q = rd.number(agent, agent_path, "lr_q", d.lr_q);
    d.lr_rho = rd.number(agent, agent_path, "lr_rho", d.lr_rho);
    d.lr_ell = rd.number(agent, agent_path, "lr_ell", d.lr_ell);
    d.batch_size = static_cast<int>(rd.integer(agent, agent_path, "batch_size", d.batch_size));
    d.target_update_period = static_cast<int>(rd.integer(agent, agent_path, "target_update_period", d.target_update_period));
    d.env_steps = static_cast<int>(rd.integer(agent, agent_path, "env_steps", d.env_steps));
    d.grad_steps = static_cast<int>(rd.integer(agent, agent_path, "grad_steps", d.grad_steps));
    d.hidden = static_cast<int>(rd.integer(agent, agent_path, "hidden", d.hidden));
    const long capacity = rd.integer(agent, agent_path, "replay_capacity", static_cast<long>(d.replay_capacity));
    if (capacity < 1) rd.fail({"agent", "replay_capacity"}, "agent.replay_capacity must be positive");
    d.replay_capacity = static_cast<std::size_t>(capacity);
    try {
      d.validate();
    } catch (const InvalidArgument& e) {
      rd.fail(agent_path, e.what());
    }
  } else {
    rd.fail({"agent", "type"}, "agent.type must be \"tabular\", \"deep\" or \"dp\"");
  }

  // Seeds.
  if (doc.contains("seeds")) {
    const json& s = doc.at("seeds");
    if (s.is_string()) {
      try {
        cfg.seeds = parse_seed_list(s.get<std::string>());
      } catch (const InvalidArgument& e) {
        rd.fail({"seeds"}, e.what());
      }
    } else if (s.is_array()) {
      cfg.seeds.clear();
      for (const json& v : s) {
        if (!v.is_number_integer() || v.get<long long>() < 0) rd.fail({"seeds"}, "seeds must be non-negative integers");
        cfg.seeds.push_back(v.get<std::uint64_t>());
      }
    } else {
      rd.fail({"seeds"}, "seeds must be a list of integers or a range string such as \"0..9\"");
    }
    if (cfg.seeds.empty()) rd.fail({"seeds"}, "at least one seed is required");
  }

  const long episodes = rd.integer(doc, {}, "episodes", cfg.episodes);
  if (episodes < 1 || episodes > 100000000) rd.fail({"episodes"}, "episodes must lie in [1, 1e8]");
  cfg.episodes = static_cast<int>(episodes);

  const std::string metric = rd.string(doc, {}, "metric", "best-return");
  if (metric == "best-return") {
    cfg.metric = Metric::kBestReturn;
  } else if (metric == "episodes-to-10th-goal-visit") {
    cfg.metric = Metric::kEpisodesToGoal;
    if (!deep_sea) rd.fail({"metric"}, "metric episodes-to-10th-goal-visit is only defined for deep_sea");
  } else {
    rd.fail({"metric"}, "metric must be \"best-return\" or \"episodes-to-10th-goal-visit\"");
  }
  const long target = rd.integer(doc, {}, "goal_visits_target", cfg.goal_visits_target);
  if (target < 1) rd.fail({"goal_visits_target"}, "goal_visits_target must be positive");
  cfg.goal_visits_target = static_cast<int>(target);
  cfg.stop_at_target = rd.boolean(doc, {}, "stop_at_target", false);
  if (cfg.stop_at_target && cfg.metric != Metric::kEpisodesToGoal) {
    rd.fail({"stop_at_target"}, "stop_at_target needs metric episodes-to-10th-goal-visit");
  }
  cfg.output_dir = rd.string(doc, {}, "output_dir", "");
  const long jobs = rd.integer(doc, {}, "jobs", 1);
  if (jobs < 1) rd.fail({"jobs"}, "jobs must be positive");
  cfg.jobs = static_cast<int>(jobs);

  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    if (!g.is_object() || g.empty()) rd.fail({"grid"}, "grid must be a non-empty object of value lists");
    for (const auto& item : g.items()) {
      if (!item.value().is_array() || item.value().empty()) {
        rd.fail({"grid", item.key()}, "grid." + item.key() + " must be a non-empty list");
      }
      if (item.key().find('.') == std::string::npos) {
        rd.fail({"grid", item.key()}, "grid keys are dotted paths such as \"agent.kappa\"");
      }
      for (const json& v : item.value()) {
        if (v.is_structured() || v.is_null()) rd.fail({"grid", item.key()}, "grid values must be scalars");
        cfg.grid[item.key()].push_back(v.dump());
      }
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Running

std::unique_ptr<Environment> make_env(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.env.name == "cartpole") return std::make_unique<Cartpole>(cfg.env.cartpole);
  DeepSeaConfig d = cfg.env.deep_sea;
  if (!cfg.env.fixed_mask) d.mask_seed = seed;
  return std::make_unique<DeepSea>(d);
}

void finish_metric(const ExperimentConfig& cfg, SeedResult& out) {
  if (cfg.metric == Metric::kBestReturn) {
    out.metric = -INFINITY;
    for (const auto& r : out.rows) out.metric = std::max(out.metric, r.episode_return);
    if (out.rows.empty()) out.metric = 0.0;
    return;
  }
  for (const auto& r : out.rows) {
    if (r.goal_visits >= cfg.goal_visits_target) {
      out.metric = r.episode;
      return;
    }
  }
  out.metric = cfg.episodes;
  if (out.status == "ok") out.status = "censored";
}

void write_csv_atomically(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_file(tmp, content);
  fs::rename(tmp, path);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& expected_header) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("missing " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != expected_header) {
    throw InvalidArgument(path.string() + ": expected header \"" + expected_header + "\"");
  }
  const auto columns = static_cast<std::size_t>(std::count(expected_header.begin(), expected_header.end(), ',') + 1);
  std::vector<std::vector<std::string>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) + " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_double(const std::string& s, const fs::path& where) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InvalidArgument(where.string() + ": bad number \"" + s + "\"");
  return x;
}

void set_dotted(json& doc, const std::string& key, const json& value) {
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  const Reader rd(text, source);
  return parse_document(parse_json(text, source), rd);
}

ExperimentConfig load_config(const fs::path& path) { return parse_config(read_file(path), path.string()); }

std::string config_to_json(const ExperimentConfig& cfg) {
  json doc;
  json env{{"name", cfg.env.name}};
  if (cfg.env.name == "deep_sea") {
    env["n"] = cfg.env.deep_sea.n;
    env["stochastic"] = cfg.env.deep_sea.stochastic;
    env["noise_std"] = cfg.env.deep_sea.noise_std;
    if (cfg.env.fixed_mask) env["mask_seed"] = cfg.env.deep_sea.mask_seed;
  } else {
    env["n"] = cfg.env.cartpole.n;
  }
  doc["environment"] = env;
  json agent{{"type", agent_name(cfg.agent)}};
  if (cfg.agent == AgentKind::kDeep) {
    const DeepIslConfig& d = cfg.deep;
    agent.update({{"kappa", d.kappa}, {"eta1", d.eta1}, {"eta2", d.eta2}, {"gamma", d.gamma}, {"lr_q", d.lr_q},
                  {"lr_rho", d.lr_rho}, {"lr_ell", d.lr_ell}, {"batch_size", d.batch_size},
                  {"target_update_period", d.target_update_period}, {"env_steps", d.env_steps},
                  {"grad_steps", d.grad_steps}, {"hidden", d.hidden}, {"replay_capacity", d.replay_capacity}});
  } else {
    const LearnerConfig& t = cfg.tabular;
    agent.update({{"kappa", t.kappa}, {"eta1", t.eta1}, {"mu_q", t.mu_q}, {"mu_rho", t.mu_rho}, {"mu_ell", t.mu_ell},
                  {"gamma", t.gamma}, {"ell_init", t.ell_init}, {"ell_floor", t.ell_floor}});
    if (cfg.agent == AgentKind::kDpSolver) agent["tolerance"] = cfg.dp_tolerance;
  }
  doc["agent"] = agent;
  doc["seeds"] = cfg.seeds;
  doc["episodes"] = cfg.episodes;
  doc["metric"] = metric_name(cfg.metric);
  doc["goal_visits_target"] = cfg.goal_visits_target;
  doc["stop_at_target"] = cfg.stop_at_target;
  return doc.dump(2) + "\n";
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  auto to_int = [&](const std::string& s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw InvalidArgument("bad seed list \"" + text + "\": expected \"a..b\" or \"a,b,c\"");
    }
    return v;
  };
  const std::size_t dots = text.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t lo = to_int(text.substr(0, dots));
    const std::uint64_t hi = to_int(text.substr(dots + 2));
    if (hi < lo || hi - lo >= 100000) throw InvalidArgument("bad seed range \"" + text + "\"");
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  } else {
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) seeds.push_back(to_int(part));
  }
  if (seeds.empty()) throw InvalidArgument("empty seed list");
  return seeds;
}

std::string format_number(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw InternalError("format_number failed");
  return std::string(buf, ptr);
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedResult out;
  out.seed = seed;
  Rng rng(seed);
  auto env = make_env(cfg, seed);
  const int stop = cfg.stop_at_target ? cfg.goal_visits_target : 0;

  if (cfg.agent == AgentKind::kDeep) {
    const TrainingLog log = isl_train(*env, cfg.deep, rng, TrainOptions{cfg.episodes, stop});
    int index = 0;
    for (const auto& e : log.episodes) out.rows.push_back(EpisodeRow{++index, e.episode_return, e.length, e.goal_visits});
    if (log.diverged) out.status = "diverged";
    finish_metric(cfg, out);
    return out;
  }

  LearnerTables tables = LearnerTables::fresh(env->num_states(), env->num_actions(), cfg.tabular);
  bool learn = true;
  if (cfg.agent == AgentKind::kDpSolver) {
    DeepSeaConfig d = cfg.env.deep_sea;
    if (!cfg.env.fixed_mask) d.mask_seed = seed;
    const auto mdp = deep_sea_as_tabular(d, cfg.tabular.gamma);
    UcOptions<double> options;
    options.tol = cfg.dp_tolerance;
    options.ell_floor = cfg.tabular.ell_floor;
    const auto solved = uc_policy_evaluation(mdp, Temperature<double>(cfg.tabular.kappa), options);
    tables.q = solved.q;
    tables.ell = solved.ell.cwiseMax(cfg.tabular.ell_floor);
    learn = false;
  }
  long visits = 0;
  for (int e = 1; e <= cfg.episodes; ++e) {
    const EpisodeRecord rec = run_episode(*env, tables, cfg.tabular, rng, 0, learn);
    visits += rec.goal ? 1 : 0;
    out.rows.push_back(EpisodeRow{e, rec.episode_return, rec.length, visits});
    if (stop > 0 && visits >= stop) break;
  }
  finish_metric(cfg, out);
  return out;
}

std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg) {
  std::vector<SeedResult> results(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      try {
        results[i] = run_seed(cfg, cfg.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto jobs = static_cast<std::size_t>(std::max(1, std::min<int>(cfg.jobs, static_cast<int>(cfg.seeds.size()))));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

void write_run(const ExperimentConfig& cfg, const std::vector<SeedResult>& results, const fs::path& dir) {
  fs::create_directories(dir);
  for (const SeedResult& r : results) {
    std::string csv = "episode,return,length,goal_visits\n";
    for (const EpisodeRow& row : r.rows) {
      csv += std::to_string(row.episode) + "," + format_number(row.episode_return) + "," + std::to_string(row.length) +
             "," + std::to_string(row.goal_visits) + "\n";
    }
    write_csv_atomically(dir / ("seed_" + std::to_string(r.seed) + ".csv"), csv);
  }
  write_file(dir / "config.json", config_to_json(cfg));
  // Written last: its presence marks the run as complete.
  std::string summary = "seed,metric,status\n";
  for (const SeedResult& r : results) summary += std::to_string(r.seed) + "," + format_number(r.metric) + "," + r.status + "\n";
  write_csv_atomically(dir / "summary.csv", summary);
}

std::vector<SweepPoint> run_sweep(const std::string& config_text, const std::string& source, const fs::path& dir,
                                  const std::vector<std::uint64_t>* seeds_override, int jobs_override) {
  const Reader rd(config_text, source);
  const json base = parse_json(config_text, source);
  const ExperimentConfig base_cfg = parse_document(base, rd);
  if (base_cfg.grid.empty()) rd.fail({}, "sweep needs a non-empty \"grid\"");

  // Cartesian product in key order, last key varying fastest.
  std::vector<std::pair<std::string, std::vector<std::string>>> axes(base_cfg.grid.begin(), base_cfg.grid.end());
  std::size_t total = 1;
  for (const auto& axis : axes) total *= axis.second.size();

  std::vector<SweepPoint> points;
  std::vector<ExperimentConfig> configs;
  for (std::size_t index = 0; index < total; ++index) {
    json doc = base;
    doc.erase("grid");
    SweepPoint point;
    std::size_t rest = index;
    for (std::size_t k = axes.size(); k-- > 0;) {
      const auto& [key, values] = axes[k];
      const std::string& raw = values[rest % values.size()];
      rest /= values.size();
      set_dotted(doc, key, json::parse(raw));
      point.values[key] = raw;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "point_%03zu", index);
    point.dir = name;
    const std::string text = doc.dump(2);
    ExperimentConfig cfg;
    try {
      cfg = parse_document(doc, Reader(text, source));
    } catch (const ConfigError& e) {
      std::string axis_list;
      for (const auto& [key, raw] : point.values) axis_list += " " + key + "=" + raw;
      rd.fail({"grid"}, std::string("grid point") + axis_list + " is invalid: " + e.what());
    }
    if (seeds_override != nullptr) cfg.seeds = *seeds_override;
    if (jobs_override > 0) cfg.jobs = jobs_override;
    points.push_back(point);
    configs.push_back(std::move(cfg));
  }

  fs::create_directories(dir);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const fs::path sub = dir / points[i].dir;
    if (fs::exists(sub / "summary.csv")) {
      points[i].skipped = true;
      continue;
    }
    write_run(configs[i], run_experiment(configs[i]), sub);
  }

  std::string index = "point,dir";
  for (const auto& axis : axes) index += "," + axis.first;
  index += "\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    index += std::to_string(i) + "," + points[i].dir;
    for (const auto& axis : axes) index += "," + points[i].values.at(axis.first);
    index += "\n";
  }
  write_csv_atomically(dir / "index.csv", index);
  return points;
}

// ---------------------------------------------------------------------------
// Plots

double quantile(std::vector<double> values, double p) {
  require(!values.empty(), "quantile: no values");
  require(p >= 0.0 && p <= 1.0, "quantile: p must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

struct BandSeries {
  std::vector<double> x;
  std::vector<double> q1;
  std::vector<double> median;
  std::vector<double> q3;
};

BandSeries band_of(const std::vector<double>& xs, const std::vector<std::vector<double>>& samples) {
  BandSeries s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (samples[i].empty()) continue;
    s.x.push_back(xs[i]);
    s.q1.push_back(quantile(samples[i], 0.25));
    s.median.push_back(quantile(samples[i], 0.5));
    s.q3.push_back(quantile(samples[i], 0.75));
  }
  return s;
}

std::string svg_band(const BandSeries& s, const std::string& title, const std::string& x_label, const std::string& y_label) {
  const double width = 640, height = 400, left = 70, right = 20, top = 40, bottom = 50;
  double x_lo = *std::min_element(s.x.begin(), s.x.end());
  double x_hi = *std::max_element(s.x.begin(), s.x.end());
  double y_lo = *std::min_element(s.q1.begin(), s.q1.end());
  double y_hi = *std::max_element(s.q3.begin(), s.q3.end());
  if (x_hi <= x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi <= y_lo) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right); };
  auto py = [&](double y) { return height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom); };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  auto points = [&](const std::vector<double>& ys) {
    std::string out;
    for (std::size_t i = 0; i < s.x.size(); ++i) out += (i ? " " : "") + fmt(px(s.x[i])) + "," + fmt(py(ys[i]));
    return out;
  };
  auto label = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return std::string(buf);
  };

  std::string band;
  for (std::size_t i = 0; i < s.x.size(); ++i) band += (i ? " " : "") + fmt(px(s.x[i])) + "," + fmt(py(s.q3[i]));
  for (std::size_t i = s.x.size(); i-- > 0;) band += " " + fmt(px(s.x[i])) + "," + fmt(py(s.q1[i]));

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" viewBox=\"0 0 "
      << width << " " << height << "\">\n"
      << "<title>" << title << "</title>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
      << "\" stroke=\"black\"/>\n"
      << "<polygon class=\"band\" points=\"" << band << "\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>\n"
      << "<polyline class=\"q1\" points=\"" << points(s.q1) << "\" fill=\"none\" stroke=\"#6baed6\" stroke-width=\"1\"/>\n"
      << "<polyline class=\"q3\" points=\"" << points(s.q3) << "\" fill=\"none\" stroke=\"#6baed6\" stroke-width=\"1\"/>\n"
      << "<polyline class=\"median\" points=\"" << points(s.median)
      << "\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n"
      << "<text x=\"" << width / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label
      << "</text>\n"
      << "<text x=\"16\" y=\"" << height / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << height / 2 << ")\">" << y_label << "</text>\n"
      << "<text x=\"" << left << "\" y=\"" << height - bottom + 16 << "\" font-size=\"10\">" << label(x_lo) << "</text>\n"
      << "<text x=\"" << width - right << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"end\" font-size=\"10\">"
      << label(x_hi) << "</text>\n"
      << "<text x=\"" << left - 4 << "\" y=\"" << height - bottom << "\" text-anchor=\"end\" font-size=\"10\">"
      << label(y_lo) << "</text>\n"
      << "<text x=\"" << left - 4 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << label(y_hi)
      << "</text>\n"
      << "</svg>\n";
  return svg.str();
}

std::vector<double> summary_metrics(const fs::path& dir) {
  const auto path = dir / "summary.csv";
  std::vector<double> out;
  for (const auto& row : read_csv(path, "seed,metric,status")) out.push_back(parse_double(row[1], path));
  if (out.empty()) throw InvalidArgument(path.string() + ": no rows");
  return out;
}

std::vector<fs::path> plot_run(const fs::path& dir) {
  const auto summary_path = dir / "summary.csv";
  std::vector<std::vector<double>> returns;
  std::vector<std::vector<double>> visits;
  for (const auto& row : read_csv(summary_path, "seed,metric,status")) {
    const fs::path seed_path = dir / ("seed_" + row[0] + ".csv");
    const auto rows = read_csv(seed_path, "episode,return,length,goal_visits");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (parse_double(rows[i][0], seed_path) != static_cast<double>(i + 1)) {
        throw InvalidArgument(seed_path.string() + ": episodes must be numbered 1, 2, ...");
      }
      if (returns.size() <= i) {
        returns.resize(i + 1);
        visits.resize(i + 1);
      }
      returns[i].push_back(parse_double(rows[i][1], seed_path));
      visits[i].push_back(parse_double(rows[i][3], seed_path));
    }
  }
  if (returns.empty()) throw InvalidArgument(dir.string() + ": no episode rows to plot");
  std::vector<double> xs(returns.size());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i + 1);
  const fs::path a = dir / "returns.svg";
  const fs::path b = dir / "goal_visits.svg";
  write_file(a, svg_band(band_of(xs, returns), "Episode return across seeds", "episode", "return"));
  write_file(b, svg_band(band_of(xs, visits), "Cumulative goal visits across seeds", "episode", "goal visits"));
  return {a, b};
}

std::vector<fs::path> plot_sweep(const fs::path& dir) {
  const fs::path index_path = dir / "index.csv";
  std::ifstream in(index_path);
  std::string header;
  if (!in || !std::getline(in, header) || header.rfind("point,dir,", 0) != 0) {
    throw InvalidArgument(index_path.string() + ": expected header starting with \"point,dir,\"");
  }
  in.close();
  std::vector<std::string> axes;
  {
    std::stringstream ss(header.substr(10));
    std::string a;
    while (std::getline(ss, a, ',')) axes.push_back(a);
  }
  const auto rows = read_csv(index_path, header);
  const auto x_it = std::find(axes.begin(), axes.end(), "environment.n");
  const std::size_t x_axis = x_it != axes.end() ? static_cast<std::size_t>(x_it - axes.begin()) : 0;

  // Group by the remaining axes; one plot per group.
  std::map<std::string, std::vector<std::pair<double, std::vector<double>>>> groups;
  for (const auto& row : rows) {
    std::string group;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      if (k != x_axis) group += (group.empty() ? "" : ", ") + axes[k] + "=" + row[2 + k];
    }
    const double x = parse_double(row[2 + x_axis], index_path);
    groups[group].emplace_back(x, summary_metrics(dir / row[1]));
  }
  std::vector<fs::path> written;
  std::size_t g = 0;
  for (auto& [group, series] : groups) {
    std::sort(series.begin(), series.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> xs;
    std::vector<std::vector<double>> samples;
    for (auto& [x, m] : series) {
      xs.push_back(x);
      samples.push_back(m);
    }
    const fs::path out = groups.size() == 1 ? dir / "sweep_metric.svg" : dir / ("sweep_metric_" + std::to_string(g) + ".svg");
    const std::string title = group.empty() ? std::string("Metric across seeds") : "Metric across seeds (" + group + ")";
    write_file(out, svg_band(band_of(xs, samples), title, axes[x_axis], "metric"));
    written.push_back(out);
    ++g;
  }
  return written;
}

}  // namespace

std::vector<fs::path> plot_directory(const fs::path& dir) {
  if (fs::exists(dir / "index.csv")) return plot_sweep(dir);
  if (fs::exists(dir / "summary.csv")) return plot_run(dir);
  throw InvalidArgument(dir.string() + ": neither index.csv nor summary.csv found");
}

}  // namespace isl
