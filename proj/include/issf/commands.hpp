#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "issf/report.hpp"
#include "issf/scenario.hpp"

namespace issf {

/// Process exit codes; the only machine contract of the tool.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitInconclusive = 2;
inline constexpr int kExitUsage = 3;

int exit_code(Verdict v);

/// Command-line values that take precedence over the scenario file.
struct CommandOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> trajectories;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<std::string> out;
  std::optional<std::string> phi_override;
};

/// Throws PreconditionError for out-of-range values.
void apply_overrides(Scenario& scenario, const CommandOptions& options);

struct CommandResult {
  int exit_code = kExitPass;
  Json report;
  std::vector<std::filesystem::path> written;
};

/// Each command writes its JSON report (and CSV files) below
/// scenario.output_dir and prints a short summary to `log`.
CommandResult run_check_subsystems(const Scenario& scenario, std::ostream& log);
CommandResult run_compose(const Scenario& scenario, std::ostream& log);
CommandResult run_verify_invariance(const Scenario& scenario, std::ostream& log);

/// Full pipeline on the bundled scenario, one line per checked outcome.
CommandResult run_example1(const CommandOptions& options, std::ostream& log);

}  // namespace issf
