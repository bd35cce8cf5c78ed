// Command-line runner: conelab run|validate|list-experiments.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "conelab/config.hpp"
#include "conelab/experiments.hpp"

namespace sc = conelab::scenario;

namespace {

void print_issues(const sc::ConfigErrors& e, const std::string& path) {
  for (const auto& i : e.issues()) {
    std::cerr << path;
    if (i.line) std::cerr << ':' << i.line;
    std::cerr << ": error: " << i.message << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conelab: relativistic locality experiments on lattices"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "run the experiment described by a scenario file");
  run->add_option("config", config_path, "scenario file")->required();
  run->add_option("--out-dir", out_dir, "directory for report.json and tables");
  run->add_option("--seed-override", seed, "replace solver.seeds with this single seed");

  auto* validate = app.add_subcommand("validate", "check a scenario file and list every problem");
  validate->add_option("config", config_path, "scenario file")->required();

  bool show_keys = false;
  auto* list = app.add_subcommand("list-experiments", "print the available experiments");
  list->add_flag("--keys", show_keys, "also print accepted keys with their defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    for (auto e : sc::all_experiments()) {
      std::cout << sc::to_string(e) << "\t" << sc::summary(e) << '\n';
      if (show_keys)
        for (const auto& k : sc::documented_keys(e)) std::cout << "    " << k << '\n';
    }
    return 0;
  }

  sc::ScenarioConfig cfg;
  try {
    cfg = sc::load_config(config_path);
  } catch (const sc::ConfigErrors& e) {
    print_issues(e, config_path);
    return 2;
  }

  if (validate->parsed()) {
    std::cout << config_path << ": ok (" << sc::to_string(cfg.experiment) << ")\n";
    return 0;
  }

  if (seed) cfg.override_seed(*seed);
  sc::RunOptions opt;
  opt.out_dir = out_dir;
  sc::RunReport report;
  try {
    report = sc::run(cfg, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  for (const auto& c : report.checks)
    std::printf("%s  %s: %.6g %s %.6g\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                sc::to_string(c.relation).c_str(), c.bound);
  if (!report.error.empty())
    std::cerr << report.error_kind << " error: " << report.error << '\n';
  std::printf("%s (%.2f s)\n", report.pass ? "overall PASS" : "overall FAIL", report.wall_clock_s);
  return report.exit_code();
}
