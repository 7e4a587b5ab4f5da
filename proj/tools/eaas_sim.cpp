// eaas-sim: deterministic fleet simulation on simulated time.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "eaas/config.hpp"
#include "eaas/error.hpp"
#include "eaas/fleet.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Entropy-as-a-service fleet simulator"};
  app.require_subcommand(1);
  std::string scenario_path, report_path;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run a scenario and write its report");
  run->add_option("--scenario", scenario_path, "key = value scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "simulation seed")->required();
  run->add_option("--report", report_path, "report output path ('-' for stdout)")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    auto file = eaas::KeyValueFile::load(scenario_path);
    auto report = eaas::sim::run_scenario(eaas::sim::parse_scenario(file), eaas::sim::parse_actions(file), seed);
    const auto text = report.to_text();
    if (report_path == "-") {
      std::cout << text;
    } else {
      std::ofstream out(report_path, std::ios::trunc);
      out << text;
      if (!out) throw eaas::Error(eaas::Errc::Io, "cannot write " + report_path);
      std::cout << report.successes() << "/" << report.outcomes.size() << " requests succeeded\n";
    }
  } catch (const eaas::Error& e) {
    std::cerr << "eaas-sim: " << e.what() << '\n';
    return e.code() == eaas::Errc::ConfigError ? 2 : 1;
  }
  return 0;
}
