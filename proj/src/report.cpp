#include "issf/report.hpp"

#include <fstream>

namespace issf {
namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json named(const std::vector<std::pair<std::string, double>>& values) {
  Json j = Json::object();
  for (const auto& [k, v] : values) j[k] = v;
  return j;
}

Json gain_echo(const GainSpec& g) {
  Json j;
  j["source"] = g.source;
  j["class"] = to_string(g.gain.claimed());
  j["window"] = g.gain.radius();
  j["certificate"] = g.certificate ? to_json(*g.certificate) : Json("trivial zero gain, not certified");
  return j;
}

}  // namespace

Json to_json(const ClassCertificate& cert) {
  Json j;
  j["verdict"] = to_string(cert.verdict);
  j["subject"] = cert.subject;
  j["claimed_class"] = cert.claimed_class;
  j["window"] = {cert.window_lo, cert.window_hi};
  j["grid_size"] = cert.grid_size;
  j["worst_margin"] = cert.worst_monotonicity_margin;
  j["worst_margin_point"] = cert.worst_margin_point;
  j["failure_point"] = optional_number(cert.failure_point);
  j["unbounded_probe"] = optional_number(cert.unbounded_probe);
  j["reason"] = cert.reason;
  j["note"] = cert.note;
  return j;
}

Json to_json(const InvariantReport& report) {
  Json j;
  j["verdict"] = report.passed ? "PASS" : "FAIL";
  j["points"] = report.points;
  j["worst_margin"] = report.worst_margin;
  j["worst_margin_point"] = report.worst_margin_point;
  j["max_slope"] = report.max_slope;
  j["failure_point"] = optional_number(report.failure_point);
  j["reason"] = report.reason;
  return j;
}

Json to_json(const VerificationReport& report) {
  Json j;
  j["name"] = report.name;
  j["verdict"] = to_string(report.verdict);
  j["samples"] = report.samples;
  j["triggered"] = report.triggered;
  j["vacuous"] = report.vacuous;
  j["violations"] = report.violations;
  j["flagged"] = report.flagged;
  j["worst_margin"] = report.worst_margin;
  Json worst = Json::object();
  for (std::size_t i = 0; i < report.worst_point.size() && i < report.variables.size(); ++i) {
    worst[report.variables[i]] = report.worst_point[i];
  }
  j["worst_point"] = worst;
  const MarginDistribution& d = report.distribution;
  j["margin_distribution"] = {{"min", d.min}, {"p01", d.p01}, {"median", d.median}, {"p99", d.p99}, {"max", d.max}};

  Json ces = Json::array();
  for (const auto& c : report.counterexamples) {
    ces.push_back({{"point", named(c.point)}, {"values", named(c.values)}, {"margin", c.margin},
                   {"rechecked", c.rechecked}});
  }
  j["counterexamples"] = ces;

  if (!report.trajectories.empty()) {
    Json trajs = Json::array();
    for (const auto& t : report.trajectories) {
      trajs.push_back({{"index", t.index},
                       {"x0", t.x0},
                       {"input", t.input},
                       {"boundary_seeded", t.boundary_seeded},
                       {"initial_margin", t.initial_margin},
                       {"min_margin", t.min_margin},
                       {"t_min", t.t_min},
                       {"violated", t.violated},
                       {"aborted", t.aborted}});
    }
    j["trajectories"] = trajs;
  }
  j["notes"] = report.notes;
  return j;
}

Json to_json(const SamplingPlan& plan, const std::vector<std::string>& state_names) {
  Json box = Json::object();
  for (std::size_t i = 0; i < plan.state_box.size() && i < state_names.size(); ++i) {
    box[state_names[i]] = {plan.state_box[i].lo, plan.state_box[i].hi};
  }
  Json j;
  j["box"] = box;
  j["u_max"] = plan.u_max;
  j["samples"] = plan.samples;
  j["strategy"] = to_string(plan.strategy);
  j["seed"] = plan.seed;
  return j;
}

Json to_json(const InvarianceOptions& options) {
  Json j;
  j["trajectories"] = options.trajectories;
  j["dt"] = options.dt;
  j["horizon"] = options.horizon;
  j["boundary_fraction"] = options.boundary_fraction;
  j["hold"] = options.hold;
  return j;
}

Json scenario_echo(const Scenario& scenario) {
  Json j;
  j["name"] = scenario.name;
  Json subs = Json::array();
  for (const auto& s : scenario.subsystems) {
    Json dyn = Json::object();
    for (std::size_t i = 0; i < s.states.size(); ++i) dyn[s.states[i]] = s.dynamics[i];
    subs.push_back({{"index", s.index},
                    {"states", s.states},
                    {"inputs", s.inputs},
                    {"dynamics", dyn},
                    {"barrier", s.barrier},
                    {"phi", gain_echo(s.phi)},
                    {"gamma", gain_echo(s.gamma)},
                    {"alpha", gain_echo(s.alpha)}});
  }
  j["subsystems"] = subs;
  std::vector<std::string> states = scenario.partition.x1;
  states.insert(states.end(), scenario.partition.x2.begin(), scenario.partition.x2.end());
  j["sampling"] = to_json(scenario.plan, states);
  j["simulation"] = to_json(scenario.simulation);
  j["compose"] = {{"window", scenario.window},
                  {"grid", scenario.grid},
                  {"phi_override", scenario.phi_override ? Json(*scenario.phi_override) : Json(nullptr)}};
  return j;
}

Json report_header(std::string_view command, const Scenario& scenario) {
  Json j;
  j["schema"] = kReportSchema;
  j["command"] = command;
  j["scenario"] = scenario_echo(scenario);
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace issf
