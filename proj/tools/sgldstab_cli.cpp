// sgldstab bounds|simulate|couple|verify|experiment --config <path>
//          [--seed N] [--out DIR] [--format json|csv]
//
// Exit codes: 0 all verdicts pass, 2 a verdict fails, 1 usage or config error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sgldstab/harness.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerdict = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SGLD stability and generalization experiments"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::optional<std::string> format;

  for (const char* name : {"bounds", "simulate", "couple", "verify", "experiment"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  sgldstab::ExperimentConfig config;
  try {
    config = sgldstab::load_config(config_path);
    if (seed) config.seed = *seed;
    if (format) config.format = *format;
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  }

  sgldstab::ExperimentReport report;
  try {
    if (command == "bounds") {
      report = sgldstab::run_bounds(config);
    } else if (command == "simulate") {
      report = sgldstab::run_simulate(config);
    } else if (command == "couple") {
      report = sgldstab::run_couple(config);
    } else if (command == "verify") {
      report = sgldstab::run_verify(config);
    } else {
      report = sgldstab::run_experiment(config);
    }
    sgldstab::write_report(report, out_dir, config.format);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  for (const auto& v : report.verdicts)
    std::cout << (v.passed ? "PASS " : "FAIL ") << v.name << " measured=" << sgldstab::format_number(v.measured)
              << " threshold=" << sgldstab::format_number(v.threshold) << '\n';
  std::cout << "report: " << out_dir << "/report.json\n";
  return report.passed() ? kExitPass : kExitVerdict;
}
