#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "qladder/bifurcation.hpp"
#include "qladder/cli/config.hpp"
#include "qladder/cli/io.hpp"
#include "qladder/equilibrium.hpp"
#include "qladder/migration.hpp"
#include "qladder/parallel.hpp"
#include "qladder/quality.hpp"
#include "qladder/scenario.hpp"

namespace qladder::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kConsistencyError = 2,
  kFilesystemError = 3,
  kScenarioMismatch = 4,
};

inline const char* kToolVersion = "1.0.0";

namespace detail {

inline json opt_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

inline json equilibrium_json(const Equilibrium& e) {
  return {{"z_star", e.z_star},       {"kind", to_string(e.kind)},  {"stability", to_string(e.stability)},
          {"regular", e.regular},     {"residual", e.residual},     {"derivative", e.derivative}};
}

inline json params_json(const ModelParams& p) {
  return {{"lambda", p.lambda}, {"gamma", p.gamma}, {"sigma", p.sigma}, {"b", p.b},         {"mu", p.mu},
          {"delta", p.delta},   {"alpha", p.alpha}, {"psi", p.psi},     {"kappa", p.kappa}, {"omega", p.omega()}};
}

inline double require_phi(const RunConfig& c) {
  if (!c.phi) throw ConfigError("config: phi: required by this command");
  return *c.phi;
}

inline std::string tuple_key(const ModelParams& p, double phi) {
  return "lambda=" + format_real(p.lambda) + ",gamma=" + format_real(p.gamma) + ",sigma=" + format_real(p.sigma) +
         ",b=" + format_real(p.b) + ",psi=" + format_real(p.psi) + ",phi=" + format_real(phi);
}

inline json threshold_json(const ThresholdSet& t) {
  return {{"b_s", opt_json(t.b_s)},
          {"b_d", opt_json(t.b_d)},
          {"b_hat", opt_json(t.b_hat)},
          {"b_tilde", opt_json(t.b_tilde)},
          {"b_under", opt_json(t.b_under)},
          {"b_c", opt_json(t.b_c)},
          {"b_star", opt_json(t.b_star)},
          {"b_1", opt_json(t.b_1)},
          {"b_2", opt_json(t.b_2)},
          {"gamma_1", opt_json(t.gamma_1)},
          {"phi_b1", opt_json(t.phi_b1)},
          {"phi_b2", opt_json(t.phi_b2)},
          {"phi_s1", opt_json(t.phi_s1)},
          {"phi_s2", opt_json(t.phi_s2)},
          {"phi_b1_G", opt_json(t.phi_b1_G)},
          {"phi_b2_G", opt_json(t.phi_b2_G)},
          {"F_b1", opt_json(t.F_b1)},
          {"F_b2", opt_json(t.F_b2)},
          {"phi_b_g", opt_json(t.phi_b_g)},
          {"phi_b_g_numeric", opt_json(t.phi_b_g_numeric)},
          {"phi_s_g", opt_json(t.phi_s_g)}};
}

inline json event_json(const BifurcationEvent& e) {
  json j = {{"kind", to_string(e.kind)}, {"phi", e.phi}, {"z_star", e.z_star}};
  j["criticality"] = e.criticality ? json(to_string(*e.criticality)) : json(nullptr);
  j["varsigma"] = std::isnan(e.varsigma) ? json(nullptr) : json(e.varsigma);
  return j;
}

inline void write_events(const fs::path& file, const std::vector<BifurcationEvent>& events) {
  Csv csv{"kind", "phi", "z_star", "criticality", "varsigma"};
  for (const auto& e : events)
    csv.row(cells(to_string(e.kind), e.phi, e.z_star, e.criticality ? to_string(*e.criticality) : "",
                  std::isnan(e.varsigma) ? std::string() : format_real(e.varsigma)));
  csv.save(file);
}

// Closed-form thresholds of random linear parameter draws checked against the
// conditions they solve.
inline Csv random_threshold_checks(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Csv csv{"draw", "lambda", "gamma", "sigma", "b", "quantity", "value", "residual", "ok"};
  for (int k = 0; k < n; ++k) {
    ModelParams p;
    p.lambda = 0.2 + 7.8 * U(rng);
    p.gamma = 0.2 + 2.8 * U(rng);
    p.sigma = 1.2 + 13.8 * U(rng);
    p.b = 0.02 + 0.96 * U(rng);
    auto emit = [&](const char* name, std::optional<double> v, double residual) {
      if (!v) return;
      csv.row(cells(k, p.lambda, p.gamma, p.sigma, p.b, name, *v, residual, residual < 1e-8));
    };
    const auto bp = break_points_closed(p);
    const double scale = p.gamma * (p.sigma - 1.0) * (p.lambda + 1.0) + p.sigma;
    if (bp.phi_b1) emit("phi_b1", bp.phi_b1, std::abs(symmetric_break_condition(p, *bp.phi_b1)) / scale);
    if (bp.phi_b2) emit("phi_b2", bp.phi_b2, std::abs(symmetric_break_condition(p, *bp.phi_b2)) / scale);
    const auto sp = sustain_points(p);
    const SpilloverSpec lin = LinearLocalGlobal{};
    for (auto s : {sp.phi_s1, sp.phi_s2})
      if (s) emit(s == sp.phi_s1 ? "phi_s1" : "phi_s2", s, std::abs(delta_v(1.0, TradeFreeness(*s), p, lin)));
  }
  return csv;
}

}  // namespace detail

inline int cmd_equilibria(const RunConfig& c, const fs::path& out, std::ostream& log) {
  const double phi = detail::require_phi(c);
  const auto spec = c.regime.spec();
  const auto eqs = find_equilibria(c.params, TradeFreeness(phi), spec);
  json report = {{"regime", c.regime.kind}, {"phi", phi}, {"params", detail::params_json(c.params)}};
  report["equilibria"] = json::array();
  report["warnings"] = json::array();
  for (const auto& e : eqs) {
    report["equilibria"].push_back(detail::equilibrium_json(e));
    if (!e.regular) report["warnings"].push_back("irregular equilibrium at z = " + format_real(e.z_star));
  }
  write_json(out / "equilibria.json", report);
  for (const auto& e : eqs) log << format_real(e.z_star) << ' ' << to_string(e.kind) << ' ' << to_string(e.stability) << '\n';
  return kOk;
}

inline int cmd_thresholds(const RunConfig& c, const fs::path& out, std::ostream& log) {
  std::vector<double> phis = c.phis;
  if (phis.empty()) phis.push_back(c.phi.value_or(0.5));
  const auto spec = c.regime.spec();
  json records = json::object();
  for (double phi : phis)
    records[detail::tuple_key(c.params, phi)] = detail::threshold_json(compute_thresholds(c.params, spec, phi, c.z_probe));
  write_json(out / "thresholds.json", {{"regime", c.regime.kind}, {"z_probe", c.z_probe}, {"records", records}});
  if (c.random_checks > 0) {
    const auto csv = detail::random_threshold_checks(c.random_checks, c.seed);
    csv.save(out / "threshold_checks.csv");
  }
  log << records.size() << " threshold record(s)\n";
  return kOk;
}

inline int cmd_bifurcate(const RunConfig& c, const fs::path& out, std::ostream& log) {
  const auto spec = c.regime.spec();
  const auto diagram = trace_branches(c.params, spec, c.phi_lo, c.phi_hi, c.step);
  json index = json::array();
  for (const auto& b : diagram.branches) {
    Csv csv{"phi", "z_star", "stable", "tangent"};
    for (const auto& pt : b.points) csv.row(cells(pt.phi, pt.z_star, pt.stable, pt.tangent_dz_dphi));
    const std::string name = "branch_" + std::to_string(b.id) + ".csv";
    csv.save(out / name);
    index.push_back({{"id", b.id}, {"kind", to_string(b.kind)}, {"points", b.points.size()}, {"file", name}});
  }
  detail::write_events(out / "events.csv", diagram.events);
  json events = json::array();
  for (const auto& e : diagram.events) events.push_back(detail::event_json(e));
  write_json(out / "bifurcation.json",
             {{"branches", index}, {"events", events}, {"warnings", diagram.warnings}});
  log << diagram.branches.size() << " branch(es), " << diagram.events.size() << " event(s)\n";
  return kOk;
}

inline int cmd_regions(const RunConfig& c, const fs::path& out, std::ostream& log) {
  const auto spec = c.regime.spec();
  const auto raster = stability_regions(c.params, c.region_phi.centres(), c.region_b.centres(), spec, c.threads);
  Csv csv{"phi", "b", "labelmask"};
  for (std::size_t j = 0; j < raster.bs.size(); ++j)
    for (std::size_t i = 0; i < raster.phis.size(); ++i)
      csv.row(cells(raster.phis[i], raster.bs[j], static_cast<int>(raster.at(i, j))));
  csv.save(out / "regions.csv");
  json legend = {
      {"bits", {{"1", "agglomeration stable"}, {"2", "symmetric dispersion stable"}, {"4", "asymmetric dispersion stable"}}},
      {"regions",
       {{"A", {{"mask", 1}, {"cells", raster.count(kAgglomerationStable)}}},
        {"B", {{"mask", 2}, {"cells", raster.count(kSymmetricStable)}}},
        {"C", {{"mask", 4}, {"cells", raster.count(kAsymmetricStable)}}},
        {"D", {{"mask", 3}, {"cells", raster.count(kAgglomerationStable | kSymmetricStable)}}}}}};
  write_json(out / "regions_legend.json", legend);
  log << "region D cells: " << raster.count(kAgglomerationStable | kSymmetricStable) << '\n';
  return kOk;
}

inline int cmd_simulate(const RunConfig& c, const fs::path& out, std::ostream& log) {
  const double phi = detail::require_phi(c);
  const TradeFreeness tf(phi);
  const auto spec = c.regime.spec();
  MigrationOptions mo;
  mo.tol = c.tol;
  const auto run = simulate(c.z0, c.params, tf, spec, c.horizon, mo);
  Csv traj{"t", "z", "delta_v"};
  for (const auto& s : run.samples) traj.row(cells(s.t, s.z, s.delta_v));
  traj.save(out / "trajectory.csv");
  json summary = {{"phi", phi}, {"z0", c.z0}, {"converged", run.converged}, {"absorbed", run.absorbed}};
  summary["terminal"] = run.terminal ? detail::equilibrium_json(*run.terminal) : json(nullptr);

  if (c.quality) {
    const auto q = integrate_quality({c.quality->a1, c.quality->a2, 0.0}, c.z0, tf, c.params, spec, c.quality->horizon);
    Csv csv{"t", "a1", "a2", "V"};
    for (const auto& s : q.samples) csv.row(cells(s.t, s.a1, s.a2, s.V));
    csv.save(out / "quality.csv");
    const auto ss = steady_state(c.z0, tf, c.params, spec);
    summary["quality"] = {{"converged", q.converged}, {"a_bar", ss.a_bar}, {"g", ss.g},
                          {"theta", ss.theta},        {"guard_triggers", q.guard_triggers}};
  }
  if (c.coupled) {
    const auto cr = simulate_coupled(c.z0, {c.coupled->a1, c.coupled->a2, 0.0}, c.params, tf, spec,
                                     c.coupled->horizon, c.coupled->epsilon);
    Csv csv{"t", "z", "a1", "a2", "delta_v", "V"};
    for (const auto& s : cr.samples) csv.row(cells(s.t, s.z, s.a1, s.a2, s.delta_v, s.V));
    csv.save(out / "coupled.csv");
  }
  if (c.basins > 0) {
    const auto m = basins(c.params, tf, spec, static_cast<std::size_t>(c.basins), 1e6, c.threads);
    Csv csv{"z0", "terminal_id"};
    for (std::size_t i = 0; i < m.z0.size(); ++i) csv.row(cells(m.z0[i], m.terminal_id[i]));
    csv.save(out / "basins.csv");
    summary["equilibria"] = json::array();
    for (const auto& e : m.equilibria) summary["equilibria"].push_back(detail::equilibrium_json(e));
  }
  write_json(out / "simulate.json", summary);
  log << "terminal z = " << format_real(run.samples.back().z) << (run.converged ? "" : " (not converged)") << '\n';
  return kOk;
}

inline int cmd_sweep(const RunConfig& c, const fs::path& out, std::ostream& log) {
  if (c.sweep.empty()) throw ConfigError("config: sweep.axes: at least one axis is required");
  if (!c.sweep.count("phi")) detail::require_phi(c);
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
  for (const auto& [k, a] : c.sweep) {
    names.push_back(k);
    values.push_back(a.points());
  }
  std::size_t total = 1;
  for (const auto& v : values) total *= v.size();
  const auto spec = c.regime.spec();
  std::vector<std::vector<std::string>> rows(total);
  parallel_for(total, c.threads, [&](std::size_t idx) {
    ModelParams p = c.params;
    double phi = c.phi.value_or(0.5);
    std::vector<std::string> row;
    std::size_t rest = idx;
    std::vector<double> point(names.size());
    for (std::size_t a = names.size(); a-- > 0;) {
      point[a] = values[a][rest % values[a].size()];
      rest /= values[a].size();
    }
    for (std::size_t a = 0; a < names.size(); ++a) {
      if (names[a] == "phi") phi = point[a];
      else param_ref(p, names[a]) = point[a];
      row.push_back(format_real(point[a]));
    }
    try {
      p.validate();
      const TradeFreeness tf(phi);
      const auto eqs = find_equilibria(p, tf, spec);
      int n_stable = 0;
      double max_stable = NAN;
      for (const auto& e : eqs)
        if (e.stable()) {
          ++n_stable;
          if (e.z_star >= 0.5 && !(e.z_star <= max_stable)) max_stable = e.z_star;
        }
      row.push_back(cell(static_cast<int>(region_label(p, phi, spec))));
      row.push_back(cell(eqs.size()));
      row.push_back(cell(n_stable));
      row.push_back(format_real(max_stable));
    } catch (const DomainError& e) {
      throw ConfigError(std::string("config: sweep: point ") + std::to_string(idx) + ": " + e.what());
    }
    rows[idx] = std::move(row);
  });
  std::vector<std::string> header = names;
  for (const char* h : {"labelmask", "n_equilibria", "n_stable", "max_stable_z"}) header.push_back(h);
  Csv csv(header);
  for (const auto& r : rows) csv.row(r);
  csv.save(out / "sweep.csv");
  log << total << " sweep row(s)\n";
  return kOk;
}

inline int cmd_scenario(const RunConfig& c, const fs::path& out, std::ostream& log) {
  const auto report = scenario_runner(c.scenario);
  Csv path{"phi", "z"};
  for (const auto& pt : report.path.points) path.row(cells(pt.phi, pt.z));
  path.save(out / ("scenario_" + c.scenario + "_path.csv"));
  detail::write_events(out / ("scenario_" + c.scenario + "_events.csv"), report.diagram.events);
  json j = {{"id", report.id}, {"params", detail::params_json(report.params)}, {"passed", report.passed()}};
  j["break_points"] = {{"phi_b1", detail::opt_json(report.breaks.phi_b1)}, {"phi_b2", detail::opt_json(report.breaks.phi_b2)}};
  j["sustain_points"] = {{"phi_s1", detail::opt_json(report.sustains.phi_s1)},
                         {"phi_s2", detail::opt_json(report.sustains.phi_s2)}};
  j["events"] = json::array();
  for (const auto& e : report.diagram.events) j["events"].push_back(detail::event_json(e));
  j["jumps"] = json::array();
  for (const auto& jp : report.path.jumps) j["jumps"].push_back({{"phi", jp.phi}, {"z_from", jp.z_from}, {"z_to", jp.z_to}});
  j["assertions"] = json::array();
  for (const auto& a : report.assertions)
    j["assertions"].push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  write_json(out / ("scenario_" + c.scenario + ".json"), j);
  for (const auto& a : report.assertions) log << (a.passed ? "ok   " : "FAIL ") << a.name << '\n';
  if (!report.passed()) {
    log << "scenario " << c.scenario << " mismatch: " << *report.first_failure() << '\n';
    return kScenarioMismatch;
  }
  return kOk;
}

inline const std::map<std::string, std::function<int(const RunConfig&, const fs::path&, std::ostream&)>>& commands() {
  static const std::map<std::string, std::function<int(const RunConfig&, const fs::path&, std::ostream&)>> table{
      {"equilibria", cmd_equilibria}, {"thresholds", cmd_thresholds}, {"bifurcate", cmd_bifurcate},
      {"regions", cmd_regions},       {"simulate", cmd_simulate},     {"sweep", cmd_sweep},
      {"scenario", cmd_scenario}};
  return table;
}

inline void write_manifest(const std::string& command, const RunConfig& c, const fs::path& out) {
  const json resolved = to_json(c);
  write_json(out / "manifest.json", {{"tool", "qladder"},
                                     {"version", kToolVersion},
                                     {"command", command},
                                     {"config_hash", "fnv1a64:" + hex64(fnv1a64(resolved.dump()))},
                                     {"resolved_config", resolved}});
}

/// Runs one command and maps failures onto the exit-code contract.
inline int run_command(const std::string& command, const RunConfig& c, const fs::path& out, std::ostream& log,
                       std::ostream& err) {
  const auto it = commands().find(command);
  if (it == commands().end()) {
    err << "unknown command '" << command << "'\n";
    return kConfigError;
  }
  try {
    ensure_directory(out);
    write_manifest(command, c, out);
    return it->second(c, out, log);
  } catch (const FilesystemError& e) {
    err << "filesystem: " << e.what() << '\n';
    return kFilesystemError;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kConfigError;
  } catch (const ConsistencyError& e) {
    err << "consistency: " << e.what() << '\n';
    return kConsistencyError;
  } catch (const ContinuationError& e) {
    err << "continuation: " << e.what() << '\n';
    return kConsistencyError;
  } catch (const std::exception& e) {
    // Domain and precondition failures trace back to the configuration.
    err << "config: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace qladder::cli
