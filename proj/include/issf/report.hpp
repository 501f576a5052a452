#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "issf/construct.hpp"
#include "issf/gains.hpp"
#include "issf/scenario.hpp"
#include "issf/verify.hpp"

namespace issf {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kReportSchema = "issf-report/1";

Json to_json(const ClassCertificate& cert);
Json to_json(const InvariantReport& report);
Json to_json(const VerificationReport& report);
Json to_json(const SamplingPlan& plan, const std::vector<std::string>& state_names);
Json to_json(const InvarianceOptions& options);

/// Echo of everything a run depends on, so a report is self-describing.
Json scenario_echo(const Scenario& scenario);

/// Top-level object with schema, command and scenario echo filled in.
Json report_header(std::string_view command, const Scenario& scenario);

/// Pretty-printed JSON with a trailing newline.
std::string dump(const Json& j);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace issf
