#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "aqmsim/cli/runner.hpp"
#include "aqmsim/cli/scenario.hpp"
#include "aqmsim/topology/config_error.hpp"

#ifndef AQMSIM_SCENARIO_DIR
#define AQMSIM_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace aqmsim;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

int cmd_run(const std::string& path, const cli::Overrides& o, const std::string& out_dir,
            unsigned jobs) {
  cli::ScenarioConfig cfg;
  try {
    cfg = cli::apply_overrides(cli::load_scenario(path), o);
  } catch (const ConfigError& e) {
    std::cerr << path << ": " << e.what() << '\n';
    return kInvalid;
  }
  try {
    const auto report = cli::run_experiment(cfg, jobs);
    const fs::path dir = out_dir.empty() ? fs::path("out") / cfg.name : fs::path(out_dir);
    cli::write_outputs(report, dir);
    int failed = 0;
    for (const auto& s : report.samples) {
      if (!s.ok) {
        ++failed;
        std::cerr << "sample " << s.index << " (seed " << s.seed << "): " << s.error << '\n';
      }
    }
    std::cout << cfg.name << " " << cli::scenario_digest(cfg) << ": " << report.samples.size()
              << " samples, " << failed << " failed -> " << dir.string() << '\n';
    return failed ? kRuntime : kOk;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kRuntime;
  }
}

int cmd_validate(const std::string& path) {
  try {
    const auto cfg = cli::load_scenario(path);
    std::cout << cfg.name << ": ok (" << cli::scenario_digest(cfg) << ")\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << path << ": " << e.what() << '\n';
    return kInvalid;
  }
}

int cmd_list(const std::string& dir) {
  std::error_code ec;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".yaml" || ext == ".yml")) files.push_back(e.path());
  }
  if (ec) {
    std::cerr << "cannot list " << dir << ": " << ec.message() << '\n';
    return kRuntime;
  }
  std::sort(files.begin(), files.end());
  int rc = kOk;
  for (const auto& f : files) {
    try {
      const auto cfg = cli::load_scenario(f.string());
      std::cout << cfg.name << "\t" << f.string() << "\t" << cfg.description << '\n';
    } catch (const ConfigError& e) {
      std::cout << f.stem().string() << "\t" << f.string() << "\tINVALID: " << e.what() << '\n';
      rc = kInvalid;
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packet-level AQM and adaptive streaming simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::string qdisc;
  std::optional<double> target_ms;
  std::optional<std::uint32_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> horizon_s;
  std::string out_dir;
  unsigned jobs = 1;
  auto* run = app.add_subcommand("run", "run every sample of a scenario");
  run->add_option("--scenario", scenario, "scenario file")->required();
  run->add_option("--qdisc", qdisc, "AQM kind")
      ->check(CLI::IsMember({"droptail", "pie", "fq_pie"}));
  run->add_option("--target-ms", target_ms, "PIE target delay in ms");
  run->add_option("--samples", samples, "number of samples");
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out_dir, "output directory (default out/<name>)");
  run->add_option("--horizon-s", horizon_s, "simulated seconds per sample");
  run->add_option("--jobs", jobs, "samples run in parallel")->check(CLI::PositiveNumber);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a scenario file");
  validate->add_option("--scenario", validate_path, "scenario file")->required();

  const char* env_dir = std::getenv("AQMSIM_SCENARIO_DIR");
  std::string list_dir = env_dir ? env_dir : AQMSIM_SCENARIO_DIR;
  auto* list = app.add_subcommand("list-scenarios", "list bundled scenarios");
  list->add_option("--dir", list_dir, "scenario directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  if (*run) {
    cli::Overrides o;
    if (!qdisc.empty()) o.qdisc = topology::parse_qdisc_kind(qdisc);
    o.target_ms = target_ms;
    o.samples = samples;
    o.seed = seed;
    o.horizon_s = horizon_s;
    return cmd_run(scenario, o, out_dir, jobs);
  }
  if (*validate) return cmd_validate(validate_path);
  return cmd_list(list_dir);
}
