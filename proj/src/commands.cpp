#include "issf/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "issf/numerics.hpp"

namespace issf {
namespace {

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<std::string> state_names(const Scenario& sc) {
  std::vector<std::string> out = sc.partition.x1;
  out.insert(out.end(), sc.partition.x2.begin(), sc.partition.x2.end());
  return out;
}

SubsystemGains gains_of(const SubsystemSpec& s) { return SubsystemGains{s.phi.gain, s.gamma.gain, s.alpha.gain}; }

struct LinearFit {
  double slope = 0.0;
  double max_abs_deviation = 0.0;
  double worst_point = 0.0;
};

struct Composition {
  ClassCertificate small_gain;
  std::optional<GainFn> composite;
  std::optional<LinearFit> linear;
  std::vector<double> grid;
  std::vector<double> composite_values;
  std::string composite_error;

  std::optional<RhoFn> rho;
  std::optional<InvariantReport> rho_check;
  std::optional<PhiFn> phi;
  std::string construction_error;

  std::optional<ComposedBarrier> barrier;
  std::string barrier_error;
};

Composition compose_scenario(const Scenario& sc) {
  Composition c;
  const GainFn& phi1 = sc.subsystems[0].phi.gain;
  const GainFn& phi2 = sc.subsystems[1].phi.gain;
  c.small_gain = check_small_gain(phi1, phi2, sc.grid);

  try {
    c.composite = compose(phi1, phi2);
    const double R = std::min(phi1.radius(), phi2.radius());
    c.grid = uniform_grid(-R, R, sc.grid);
    c.composite_values.resize(c.grid.size());
    LinearFit fit;
    fit.slope = (*c.composite)(1.0);
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      c.composite_values[i] = (*c.composite)(c.grid[i]);
      const double dev = std::fabs(c.composite_values[i] - fit.slope * c.grid[i]);
      if (dev > fit.max_abs_deviation) {
        fit.max_abs_deviation = dev;
        fit.worst_point = c.grid[i];
      }
    }
    c.linear = fit;
  } catch (const Error& e) {
    c.composite_error = e.what();
  }

  if (c.small_gain.passed()) {
    try {
      c.rho = build_rho(phi1, phi2, sc.window, sc.grid);
      c.rho_check = check_rho_invariants(*c.rho);
      c.phi = build_phi(*c.rho, sc.grid);
    } catch (const Error& e) {
      c.construction_error = e.what();
    }
  } else {
    c.construction_error = "skipped: small-gain condition fails";
  }

  std::optional<ComposedBarrier::Phi> phi;
  if (sc.phi_override) {
    phi = GainFn::parse(*sc.phi_override, GainClass::ExtendedKInfinity, sc.window);
  } else if (c.phi) {
    phi = *c.phi;
  }
  if (!phi) {
    c.barrier_error = "no phi available: " + c.construction_error;
    return c;
  }
  try {
    c.barrier = compose_barrier(sc.subsystems[0].h, sc.subsystems[1].h, *phi, gains_of(sc.subsystems[0]),
                                gains_of(sc.subsystems[1]), sc.window, sc.grid);
  } catch (const Error& e) {
    c.barrier_error = e.what();
  }
  return c;
}

Json composition_json(const Composition& c, const Scenario& sc) {
  Json j;
  j["small_gain"] = to_json(c.small_gain);

  Json comp;
  if (c.composite) {
    comp["expression"] = c.composite->description();
    comp["grid_size"] = c.grid.size();
    comp["window"] = {c.grid.front(), c.grid.back()};
    comp["value_at_1"] = c.linear->slope;
    comp["max_abs_deviation_from_linear"] = c.linear->max_abs_deviation;
    comp["worst_deviation_point"] = c.linear->worst_point;
  } else {
    comp["error"] = c.composite_error;
  }
  j["composition"] = comp;

  Json rho;
  if (c.rho) {
    rho["radius"] = c.rho->radius();
    rho["grid_size"] = c.rho->grid().size();
    rho["rescaled_points"] = c.rho->rescaled_count();
    rho["unconverged_cells"] = c.rho->unconverged_cells();
    rho["invariants"] = to_json(*c.rho_check);
  }
  if (!c.construction_error.empty()) rho["error"] = c.construction_error;
  j["rho"] = rho;

  Json phi;
  if (c.phi) {
    phi["radius"] = c.phi->radius();
    phi["grid_size"] = c.phi->grid().size();
    phi["invariants"] = to_json(c.phi->invariants());
  }
  phi["used"] = sc.phi_override ? "override" : (c.phi ? "constructed" : "none");
  if (sc.phi_override) phi["override"] = *sc.phi_override;
  if (c.barrier && c.barrier->override_check()) phi["override_sandwich"] = to_json(*c.barrier->override_check());
  j["phi"] = phi;

  Json composed;
  if (c.barrier) {
    composed["set"] = c.barrier->set_description();
    composed["gamma"] = c.barrier->gamma().description();
    composed["gamma_window"] = c.barrier->gamma().radius();
    composed["gamma_certificate"] = to_json(c.barrier->gamma_certificate());
    composed["alpha"] = c.barrier->alpha().description();
  } else {
    composed["error"] = c.barrier_error;
  }
  j["composed"] = composed;
  return j;
}

bool composition_ok(const Composition& c, const Scenario& sc) {
  if (!c.small_gain.passed() || !c.barrier) return false;
  if (!c.barrier->gamma_certificate().passed()) return false;
  if (sc.phi_override) return true;
  return c.rho_check && c.rho_check->passed && c.phi;
}

std::filesystem::path out_path(const Scenario& sc, const std::string& file) {
  return std::filesystem::path(sc.output_dir) / file;
}

void emit(CommandResult& result, const std::filesystem::path& path, std::string_view text) {
  write_text(path, text);
  result.written.push_back(path);
}

std::string gamma_csv(const GainFn& gamma, std::size_t n) {
  const std::vector<double> r = uniform_grid(0.0, gamma.radius(), n);
  std::vector<double> v(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) v[i] = gamma(r[i]);
  return tabulation_csv(r, v, "gamma");
}

}  // namespace

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return kExitPass;
    case Verdict::Fail:
      return kExitFail;
    case Verdict::Inconclusive:
      return kExitInconclusive;
  }
  return kExitUsage;
}

void apply_overrides(Scenario& scenario, const CommandOptions& options) {
  if (options.seed) scenario.plan.seed = *options.seed;
  if (options.samples) {
    if (*options.samples == 0) throw PreconditionError("--samples must be at least 1");
    scenario.plan.samples = *options.samples;
  }
  if (options.trajectories) {
    if (*options.trajectories == 0) throw PreconditionError("--trajectories must be at least 1");
    scenario.simulation.trajectories = *options.trajectories;
  }
  if (options.dt) {
    if (!(*options.dt > 0.0)) throw PreconditionError("--dt must be positive");
    scenario.simulation.dt = *options.dt;
  }
  if (options.horizon) scenario.simulation.horizon = *options.horizon;
  if (!(scenario.simulation.horizon >= scenario.simulation.dt)) {
    throw PreconditionError("horizon must be at least dt");
  }
  if (options.out) {
    if (options.out->empty()) throw PreconditionError("--out must not be empty");
    scenario.output_dir = *options.out;
  }
  if (options.phi_override) {
    try {
      GainFn::parse(*options.phi_override, GainClass::ExtendedKInfinity, scenario.window);
    } catch (const ParseError& e) {
      throw PreconditionError("--phi-override: " + std::string(e.what()));
    }
    scenario.phi_override = *options.phi_override;
  }
}

CommandResult run_check_subsystems(const Scenario& sc, std::ostream& log) {
  CommandResult result;
  const InterconnectionReport rep = check_interconnection_hypotheses(sc.subsystem(0), sc.subsystem(1), sc.plan);

  result.report = report_header("check-subsystems", sc);
  result.report["verdict"] = to_string(rep.verdict);
  result.report["subsystems"] = {to_json(rep.first), to_json(rep.second)};
  result.exit_code = exit_code(rep.verdict);

  for (const auto* r : {&rep.first, &rep.second}) {
    log << r->name << ": " << to_string(r->verdict) << " (" << r->triggered << " non-vacuous of " << r->samples
        << ", worst margin " << short_num(r->worst_margin) << ", " << r->violations << " violations)\n";
  }
  emit(result, out_path(sc, "check-subsystems.json"), dump(result.report));
  return result;
}

CommandResult run_compose(const Scenario& sc, std::ostream& log) {
  CommandResult result;
  const Composition c = compose_scenario(sc);
  const bool ok = composition_ok(c, sc);

  result.report = report_header("compose", sc);
  result.report["verdict"] = ok ? "PASS" : "FAIL";
  Json body = composition_json(c, sc);
  for (auto it = body.begin(); it != body.end(); ++it) result.report[it.key()] = it.value();

  Json csv = Json::object();
  if (c.composite) csv["composition.csv"] = {"r", "phi1_phi2"};
  if (c.rho) csv["rho.csv"] = {"r", "rho"};
  if (c.phi) csv["phi.csv"] = {"r", "phi"};
  if (c.barrier) csv["gamma.csv"] = {"r", "gamma"};
  result.report["csv"] = csv;
  result.exit_code = ok ? kExitPass : kExitFail;

  log << "small-gain: " << to_string(c.small_gain.verdict) << " (worst relative margin "
      << short_num(c.small_gain.worst_monotonicity_margin) << " at r = " << short_num(c.small_gain.worst_margin_point)
      << ")\n";
  if (c.linear) {
    log << "phi1 o phi2: value at 1 = " << short_num(c.linear->slope) << ", max deviation from linear "
        << short_num(c.linear->max_abs_deviation) << "\n";
  }
  if (c.rho_check) {
    log << "rho: invariants " << (c.rho_check->passed ? "PASS" : "FAIL") << " (margin "
        << short_num(c.rho_check->worst_margin) << ", max slope " << short_num(c.rho_check->max_slope) << ")\n";
  }
  if (!c.construction_error.empty()) log << "construction: " << c.construction_error << "\n";
  if (c.barrier) {
    log << "composed set: " << c.barrier->set_description() << "\n";
    log << "gamma certificate: " << to_string(c.barrier->gamma_certificate().verdict) << "\n";
  } else {
    log << "composition failed: " << c.barrier_error << "\n";
  }

  emit(result, out_path(sc, "compose.json"), dump(result.report));
  if (c.composite) emit(result, out_path(sc, "composition.csv"), tabulation_csv(c.grid, c.composite_values, "phi1_phi2"));
  if (c.rho) emit(result, out_path(sc, "rho.csv"), tabulation_csv(c.rho->grid(), c.rho->values(), "rho"));
  if (c.phi) emit(result, out_path(sc, "phi.csv"), tabulation_csv(c.phi->grid(), c.phi->values(), "phi"));
  if (c.barrier) emit(result, out_path(sc, "gamma.csv"), gamma_csv(c.barrier->gamma(), sc.grid));
  return result;
}

CommandResult run_verify_invariance(const Scenario& sc, std::ostream& log) {
  CommandResult result;
  result.report = report_header("verify-invariance", sc);
  const Composition c = compose_scenario(sc);
  if (!c.barrier) {
    result.report["verdict"] = "FAIL";
    result.report["error"] = c.barrier_error;
    result.exit_code = kExitFail;
    log << "no composed barrier: " << c.barrier_error << "\n";
    emit(result, out_path(sc, "verify-invariance.json"), dump(result.report));
    return result;
  }

  const VerificationReport rep = check_forward_invariance(*c.barrier, sc.f, sc.plan, sc.simulation);
  result.report["verdict"] = to_string(rep.verdict);
  result.report["set"] = c.barrier->set_description();
  result.report["offset"] = c.barrier->gamma()(sc.plan.u_max);
  result.report["invariance"] = to_json(rep);

  std::vector<std::string> columns = {"t"};
  const auto names = state_names(sc);
  columns.insert(columns.end(), names.begin(), names.end());
  columns.push_back("h");
  columns.push_back("margin");
  Json files = Json::array();
  for (const auto& [index, traj] : rep.recorded) files.push_back("trajectory_" + std::to_string(index) + ".csv");
  result.report["csv"] = {{"files", files}, {"columns", columns}};
  result.exit_code = exit_code(rep.verdict);

  log << "set: " << c.barrier->set_description() << "\n";
  log << "invariance: " << to_string(rep.verdict) << " (" << rep.trajectories.size() << " trajectories, worst margin "
      << short_num(rep.worst_margin) << ", " << rep.violations << " violations)\n";

  emit(result, out_path(sc, "verify-invariance.json"), dump(result.report));
  for (const auto& [index, traj] : rep.recorded) {
    emit(result, out_path(sc, "trajectory_" + std::to_string(index) + ".csv"), trajectory_csv(traj, names));
  }
  return result;
}

CommandResult run_example1(const CommandOptions& options, std::ostream& log) {
  Scenario sc = parse_scenario(bundled_example1(), "example1.scn");
  apply_overrides(sc, options);

  CommandResult result;
  result.report = report_header("example1", sc);
  Json criteria = Json::array();
  bool all = true;
  auto record = [&](const std::string& name, bool pass, const std::string& detail) {
    log << (pass ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    criteria.push_back({{"criterion", name}, {"verdict", pass ? "PASS" : "FAIL"}, {"detail", detail}});
    all = all && pass;
  };

  std::ostringstream quiet;
  const CommandResult compose_result = run_compose(sc, quiet);
  const Composition c = compose_scenario(sc);
  {
    const bool linear = c.linear && std::fabs(c.linear->slope - 0.6144) <= 1e-12 &&
                        c.linear->max_abs_deviation <= 1e-12;
    record("small-gain", c.small_gain.passed() && linear,
           "phi1 o phi2(r) = " + (c.linear ? short_num(c.linear->slope) : std::string("?")) + "*r, max deviation " +
               (c.linear ? short_num(c.linear->max_abs_deviation) : std::string("?")) + ", check " +
               std::string(to_string(c.small_gain.verdict)));
  }

  const InterconnectionReport hyp = check_interconnection_hypotheses(sc.subsystem(0), sc.subsystem(1), sc.plan);
  for (const auto* r : {&hyp.first, &hyp.second}) {
    const bool pass = r->verdict == Verdict::Pass && r->worst_margin >= -kImplicationTolerance && r->triggered >= 1000;
    record(r->name, pass,
           std::to_string(r->triggered) + " non-vacuous samples, worst margin " + short_num(r->worst_margin));
  }

  Json implication = nullptr;
  Json invariance = nullptr;
  if (c.barrier) {
    log << "composed set: " << c.barrier->set_description() << "\n";
    result.report["set"] = c.barrier->set_description();
    const VerificationReport imp = check_composed_implication(*c.barrier, sc.f, sc.plan);
    implication = to_json(imp);
    record("composed implication", imp.verdict == Verdict::Pass,
           std::to_string(imp.violations) + " violations among " + std::to_string(imp.triggered) +
               " non-vacuous samples, worst margin " + short_num(imp.worst_margin));

    const VerificationReport inv = check_forward_invariance(*c.barrier, sc.f, sc.plan, sc.simulation);
    invariance = to_json(inv);
    record("forward invariance", inv.verdict == Verdict::Pass,
           std::to_string(inv.trajectories.size()) + " trajectories, worst margin " + short_num(inv.worst_margin));
  } else {
    record("composed implication", false, c.barrier_error);
    record("forward invariance", false, c.barrier_error);
  }

  result.report["criteria"] = criteria;
  result.report["compose"] = compose_result.report;
  result.report["hypotheses"] = {to_json(hyp.first), to_json(hyp.second)};
  result.report["composed_implication"] = implication;
  result.report["invariance"] = invariance;
  result.report["verdict"] = all ? "PASS" : "FAIL";
  result.exit_code = all ? kExitPass : kExitFail;
  result.written = compose_result.written;
  emit(result, out_path(sc, "example1.json"), dump(result.report));
  return result;
}

}  // namespace issf
