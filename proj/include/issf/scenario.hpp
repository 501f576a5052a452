#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "issf/error.hpp"
#include "issf/field.hpp"
#include "issf/gains.hpp"
#include "issf/verify.hpp"

namespace issf {

/// Problem in a scenario file. what() is "<source>:<line>:<column>: <message>".
class ScenarioError : public Error {
 public:
  ScenarioError(const std::string& source, std::size_t line, std::size_t column, const std::string& message)
      : Error(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct GainSpec {
  std::string role;  // "phi", "gamma" or "alpha"
  std::string source;
  GainFn gain = GainFn::identity(GainClass::K, 1.0);
  /// Absent for the trivial zero gain, which skips certification.
  std::optional<ClassCertificate> certificate;
};

struct SubsystemSpec {
  int index = 1;
  std::vector<std::string> states;
  std::vector<std::string> inputs;
  std::vector<std::string> dynamics;  // one per own state
  std::string barrier;
  ScalarField h{parse("0", {})};
  GainSpec phi;
  GainSpec gamma;
  GainSpec alpha;
};

struct Scenario {
  std::string name;
  VariablePartition partition;
  VectorField f{{}, {}};
  std::array<SubsystemSpec, 2> subsystems;
  SamplingPlan plan;
  InvarianceOptions simulation;
  double window = 10.0;
  std::size_t grid = kDefaultGainGrid;
  std::optional<std::string> phi_override;
  std::string output_dir = "issf-out";

  Subsystem subsystem(std::size_t i) const;
};

/// Parses and fully validates a scenario. `source_name` is used in error
/// locations. Gains are certified against their claimed classes here.
Scenario parse_scenario(std::string_view text, const std::string& source_name);
Scenario load_scenario(const std::filesystem::path& path);

/// Text of the bundled Example 1 scenario.
std::string_view bundled_example1();

}  // namespace issf
