// em-ar-lab: verification suite, single adaptation runs, and sweep grids for
// the entropy-minimization lab. Exit codes: 0 success, 1 runtime failure,
// 2 usage or config error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emlab/harness.hpp"
#include "emlab/verify.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct LabConfig {
  std::string method = "em-tok";
  int g = 16;
  int steps = 10;
  double lr = 1e-3;
  std::string optimizer = "adamw";
  emlab::AdamWParams adamw{};
  bool ent_norm_per_candidate = false;
  int episodes = 200;
  double tau = 2.0;
  double sigma = 0.5;
  int content_size = 3;
  int l_max = 6;
  std::uint64_t seed = 0;
  int jobs = 0;  // 0 = all available cores
  emlab::SweepGrid sweep;
};

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

void check_known_keys(const json& j, std::initializer_list<const char*> known,
                      const std::string& scope) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (item.key() == k) ok = true;
    if (!ok) throw ConfigError("unknown config field '" + scope + item.key() + "'");
  }
}

LabConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  check_known_keys(j,
                   {"method", "g", "steps", "lr", "optimizer", "adamw",
                    "ent_norm_per_candidate", "episodes", "tau", "sigma",
                    "content_size", "l_max", "seed", "jobs", "sweep"},
                   "");
  LabConfig cfg;
  read_field(j, "method", cfg.method);
  read_field(j, "g", cfg.g);
  read_field(j, "steps", cfg.steps);
  read_field(j, "lr", cfg.lr);
  read_field(j, "optimizer", cfg.optimizer);
  if (j.contains("adamw")) {
    const json& a = j.at("adamw");
    check_known_keys(a, {"beta1", "beta2", "eps", "weight_decay"}, "adamw.");
    read_field(a, "beta1", cfg.adamw.beta1);
    read_field(a, "beta2", cfg.adamw.beta2);
    read_field(a, "eps", cfg.adamw.eps);
    read_field(a, "weight_decay", cfg.adamw.weight_decay);
  }
  read_field(j, "ent_norm_per_candidate", cfg.ent_norm_per_candidate);
  read_field(j, "episodes", cfg.episodes);
  read_field(j, "tau", cfg.tau);
  read_field(j, "sigma", cfg.sigma);
  read_field(j, "content_size", cfg.content_size);
  read_field(j, "l_max", cfg.l_max);
  read_field(j, "seed", cfg.seed);
  read_field(j, "jobs", cfg.jobs);
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_known_keys(s, {"methods", "g", "steps"}, "sweep.");
    read_field(s, "methods", cfg.sweep.methods);
    read_field(s, "g", cfg.sweep.g);
    read_field(s, "steps", cfg.sweep.steps);
  }
  return cfg;
}

ordered_json config_to_json(const LabConfig& cfg, bool with_sweep) {
  ordered_json j;
  j["method"] = cfg.method;
  j["g"] = cfg.g;
  j["steps"] = cfg.steps;
  j["lr"] = cfg.lr;
  j["optimizer"] = cfg.optimizer;
  j["adamw"] = {{"beta1", cfg.adamw.beta1},
                {"beta2", cfg.adamw.beta2},
                {"eps", cfg.adamw.eps},
                {"weight_decay", cfg.adamw.weight_decay}};
  j["ent_norm_per_candidate"] = cfg.ent_norm_per_candidate;
  j["episodes"] = cfg.episodes;
  j["tau"] = cfg.tau;
  j["sigma"] = cfg.sigma;
  j["content_size"] = cfg.content_size;
  j["l_max"] = cfg.l_max;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  if (with_sweep)
    j["sweep"] = {{"methods", cfg.sweep.methods}, {"g", cfg.sweep.g}, {"steps", cfg.sweep.steps}};
  return j;
}

emlab::AdaptConfig to_adapt_config(const LabConfig& cfg) {
  emlab::AdaptConfig out;
  emlab::ObjectiveSpec method = emlab::make_method(cfg.method, cfg.g);
  method.ent_norm_per_candidate = cfg.ent_norm_per_candidate;
  if (method.g == 1 && method.baseline == emlab::Baseline::Loo)
    method.baseline = emlab::Baseline::None;
  out.method = method;
  out.steps = cfg.steps;
  out.lr = cfg.lr;
  if (cfg.optimizer == "adamw") {
    out.optimizer = emlab::OptimizerKind::AdamW;
  } else if (cfg.optimizer == "sgd") {
    out.optimizer = emlab::OptimizerKind::Sgd;
  } else {
    throw ConfigError("unknown optimizer '" + cfg.optimizer + "' (want adamw or sgd)");
  }
  out.adamw = cfg.adamw;
  out.episodes = cfg.episodes;
  out.tau = cfg.tau;
  out.sigma = cfg.sigma;
  out.content_size = cfg.content_size;
  out.l_max = cfg.l_max;
  out.seed = cfg.seed;
  return out;
}

int effective_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

int run_cells(const LabConfig& cfg, const std::string& out_dir, bool is_sweep) {
  const auto t0 = std::chrono::steady_clock::now();
  const emlab::AdaptConfig base = to_adapt_config(cfg);
  emlab::SweepGrid grid;
  if (is_sweep) grid = cfg.sweep;

  const std::vector<emlab::SuiteRow> rows =
      emlab::run_suite(base, grid, effective_jobs(cfg.jobs));
  const double total_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::filesystem::create_directories(out_dir);
  const std::string csv = emlab::rows_to_csv(rows);
  write_file(std::filesystem::path(out_dir) / "run.csv", csv);

  const ordered_json cfg_json = config_to_json(cfg, is_sweep);
  write_file(std::filesystem::path(out_dir) / "effective_config.json",
             cfg_json.dump(2) + "\n");

  ordered_json summary;
  summary["config"] = cfg_json;
  summary["rows"] = ordered_json::array();
  for (const emlab::SuiteRow& r : rows) {
    ordered_json row;
    row["method"] = r.method;
    row["source"] = r.source;
    row["g"] = r.g;
    row["steps"] = r.steps;
    row["lr"] = r.lr;
    row["tau"] = r.tau;
    row["sigma"] = r.sigma;
    row["episodes"] = r.episodes;
    row["mean_ter"] = r.mean_ter;
    row["std_ter"] = r.std_ter;
    row["mean_exact_match"] = r.mean_exact_match;
    row["mean_entropy_initial"] = r.mean_entropy_initial;
    row["mean_entropy_final"] = r.mean_entropy_final;
    row["mean_runtime_s"] = r.mean_runtime_s;
    row["failures"] = r.failures;
    summary["rows"].push_back(std::move(row));
  }
  summary["total_runtime_s"] = total_s;
  write_file(std::filesystem::path(out_dir) / "summary.json", summary.dump(2) + "\n");

  std::cout << emlab::suite_csv_header() << "\n";
  for (const emlab::SuiteRow& r : rows) std::cout << emlab::suite_row_csv(r) << "\n";
  std::cout << "wrote " << rows.size() << (rows.size() == 1 ? " row" : " rows") << " to "
            << (std::filesystem::path(out_dir) / "run.csv").string() << "\n";
  return 0;
}

int cmd_verify(std::uint64_t seed, const std::vector<std::string>& checks) {
  std::vector<emlab::verify::CheckResult> results;
  try {
    results = emlab::verify::run_checks(seed, checks);
  } catch (const emlab::ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << "available checks:";
    for (const std::string& n : emlab::verify::available_checks()) std::cerr << " " << n;
    std::cerr << "\n";
    return 2;
  }
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("[%s] %-11s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
    if (!r.pass) {
      all_pass = false;
      std::cerr << "check '" << r.name << "' failed: " << r.detail << "\n";
    }
  }
  std::printf("%zu/%zu checks passed\n",
              static_cast<std::size_t>(std::count_if(results.begin(), results.end(),
                                                     [](const auto& r) { return r.pass; })),
              results.size());
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entropy-minimization lab for autoregressive policies"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::string checks_arg;
  std::uint64_t seed_flag = 0;
  std::string method_flag;
  int g_flag = 0, steps_flag = 0, episodes_flag = 0, jobs_flag = 0;
  double lr_flag = 0, tau_flag = 0, sigma_flag = 0;

  CLI::App* verify = app.add_subcommand("verify", "run the oracle-backed property checks");
  verify->add_option("--seed", seed_flag, "base seed for the check policies");
  verify->add_option("--checks", checks_arg, "comma-separated subset of checks");

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed_flag, "episode seed");
    cmd->add_option("--method", method_flag, "adaptation method name");
    cmd->add_option("--g", g_flag, "candidate count per step");
    cmd->add_option("--steps", steps_flag, "adaptation steps per episode");
    cmd->add_option("--lr", lr_flag, "learning rate");
    cmd->add_option("--episodes", episodes_flag, "number of episodes");
    cmd->add_option("--tau", tau_flag, "shift temperature (>= 1)");
    cmd->add_option("--sigma", sigma_flag, "shift noise std (>= 0)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--jobs", jobs_flag, "worker threads (default: all cores)");
  };

  CLI::App* run = app.add_subcommand("run", "adapt one configured cell and write CSV");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "run the configured method/g/steps grid");
  add_common(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (verify->parsed()) {
      std::vector<std::string> checks;
      std::stringstream ss(checks_arg);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) checks.push_back(item);
      return cmd_verify(seed_flag, checks);
    }

    LabConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    CLI::App* cmd = run->parsed() ? run : sweep;
    if (cmd->count("--seed")) cfg.seed = seed_flag;
    if (cmd->count("--method")) cfg.method = method_flag;
    if (cmd->count("--g")) cfg.g = g_flag;
    if (cmd->count("--steps")) cfg.steps = steps_flag;
    if (cmd->count("--lr")) cfg.lr = lr_flag;
    if (cmd->count("--episodes")) cfg.episodes = episodes_flag;
    if (cmd->count("--tau")) cfg.tau = tau_flag;
    if (cmd->count("--sigma")) cfg.sigma = sigma_flag;
    if (cmd->count("--jobs")) cfg.jobs = jobs_flag;

    if (sweep->parsed()) {
      if (cfg.sweep.methods.empty())
        throw ConfigError("sweep needs a non-empty sweep.methods list in the config");
      for (const std::string& m : cfg.sweep.methods)
        emlab::make_method(m, 2);  // name check only
    }
    return run_cells(cfg, out_dir, sweep->parsed());
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const emlab::ContractViolation& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
