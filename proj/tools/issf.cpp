// issf: sampling and simulation checks for two-subsystem safety barriers.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "issf/commands.hpp"

namespace {

struct Flags {
  std::string scenario;
  issf::CommandOptions options;
};

void add_overrides(CLI::App* cmd, Flags& flags) {
  auto& o = flags.options;
  cmd->add_option("--seed", o.seed, "Sampling and input seed");
  cmd->add_option("--samples", o.samples, "Samples per implication check");
  cmd->add_option("--trajectories", o.trajectories, "Trajectories for the invariance check");
  cmd->add_option("--dt", o.dt, "RK4 step");
  cmd->add_option("--horizon", o.horizon, "Simulation horizon");
  cmd->add_option("--out", o.out, "Output directory for reports and CSV files");
  cmd->add_option("--phi-override", o.phi_override, "Explicit phi(r) used instead of the constructed one");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-gain safety barrier checks for interconnected systems"};
  app.require_subcommand(1);

  Flags flags;
  auto* check = app.add_subcommand("check-subsystems", "Check both subsystem barrier implications");
  auto* compose = app.add_subcommand("compose", "Small-gain check, rho/phi construction and composed barrier");
  auto* invariance = app.add_subcommand("verify-invariance", "Simulate trajectories from the composed set");
  auto* example = app.add_subcommand("example1", "Run the full pipeline on the bundled example");
  for (auto* cmd : {check, compose, invariance}) {
    cmd->add_option("--scenario", flags.scenario, "Scenario file")->required();
    add_overrides(cmd, flags);
  }
  add_overrides(example, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : issf::kExitUsage;
  }

  try {
    if (example->parsed()) return issf::run_example1(flags.options, std::cout).exit_code;

    issf::Scenario sc = issf::load_scenario(flags.scenario);
    issf::apply_overrides(sc, flags.options);
    issf::CommandResult result;
    if (check->parsed()) {
      result = issf::run_check_subsystems(sc, std::cout);
    } else if (compose->parsed()) {
      result = issf::run_compose(sc, std::cout);
    } else {
      result = issf::run_verify_invariance(sc, std::cout);
    }
    for (const auto& p : result.written) std::cout << "wrote " << p.string() << "\n";
    return result.exit_code;
  } catch (const issf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return issf::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return issf::kExitUsage;
  }
}
