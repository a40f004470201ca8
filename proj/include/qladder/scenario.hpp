#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "qladder/bifurcation.hpp"
#include "qladder/equilibrium.hpp"
#include "qladder/errors.hpp"
#include "qladder/params.hpp"

namespace qladder {

inline const std::array<const char*, 6>& scenario_ids() {
  static const std::array<const char*, 6> ids{"i", "ii", "iii", "iv", "v", "vi"};
  return ids;
}

/// The six reference parametrisations (lambda, gamma, sigma, b).
inline ModelParams scenario_params(const std::string& id) {
  struct Row {
    const char* id;
    double lambda, gamma, sigma, b;
  };
  static const Row rows[] = {{"i", 2, 0.9, 8, 0.33},  {"ii", 2, 0.9, 8, 0.338}, {"iii", 2, 0.9, 8, 0.339},
                             {"iv", 2, 0.9, 8, 0.35}, {"v", 2, 0.9, 8, 0.55},   {"vi", 4, 0.9, 8, 0.55}};
  for (const auto& r : rows)
    if (id == r.id) {
      ModelParams p;
      p.lambda = r.lambda;
      p.gamma = r.gamma;
      p.sigma = r.sigma;
      p.b = r.b;
      return p;
    }
  throw DomainError("unknown scenario '" + id + "' (expected one of i, ii, iii, iv, v, vi)");
}

struct ScenarioAssertion {
  std::string name;
  bool passed;
  std::string detail;
};

struct ScenarioReport {
  std::string id;
  ModelParams params;
  BreakPoints breaks;
  SustainPoints sustains;
  BifurcationDiagram diagram;
  StablePath path;
  std::vector<ScenarioAssertion> assertions;

  bool passed() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.passed; });
  }
  std::optional<std::string> first_failure() const {
    for (const auto& a : assertions)
      if (!a.passed) return a.name + ": " + a.detail;
    return std::nullopt;
  }
};

struct ScenarioOptions {
  double phi_lo = 0.01;
  double phi_hi = 0.99;
  int path_points = 981;
  double step = 1e-3;
};

namespace detail {

inline bool at_half(double z) { return std::abs(z - 0.5) < 1e-9; }
inline bool at_corner(double z) { return z >= 1.0 - 1e-12; }

struct PathFacts {
  double max_z = 0.5;
  bool agglomerates = false;
  bool returns_to_half = false;  // back at 1/2 after having left it
  bool monotone = true;
  double final_z = 0.5;
  std::optional<double> first_corner_phi, last_corner_phi;
  bool leaves_corner = false;
};

inline PathFacts path_facts(const StablePath& path) {
  PathFacts f;
  bool left = false;
  double prev = 0.5;
  for (const auto& pt : path.points) {
    f.max_z = std::max(f.max_z, pt.z);
    if (!at_half(pt.z)) left = true;
    if (left && at_half(pt.z)) f.returns_to_half = true;
    if (pt.z < prev - 1e-12) f.monotone = false;
    if (at_corner(pt.z)) {
      f.agglomerates = true;
      if (!f.first_corner_phi) f.first_corner_phi = pt.phi;
      f.last_corner_phi = pt.phi;
    } else if (f.agglomerates) {
      f.leaves_corner = true;
    }
    prev = pt.z;
  }
  if (!path.points.empty()) f.final_z = path.points.back().z;
  return f;
}

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace detail

/// Traces the scenario's bifurcation diagram and stable path and checks the
/// qualitative structure expected for it.
inline ScenarioReport scenario_runner(const std::string& id, const ScenarioOptions& opt = {}) {
  ScenarioReport r;
  r.id = id;
  r.params = scenario_params(id);
  const SpilloverSpec spec = LinearLocalGlobal{};
  r.breaks = break_points_closed(r.params);
  r.sustains = sustain_points(r.params);
  r.diagram = trace_branches(r.params, spec, opt.phi_lo, opt.phi_hi, opt.step);
  r.path = follow_stable_path(r.params, spec, opt.phi_lo, opt.phi_hi, opt.path_points);
  const auto facts = detail::path_facts(r.path);

  std::vector<BifurcationEvent> forks, folds;
  for (const auto& e : r.diagram.events) (e.kind == EventKind::Pitchfork ? forks : folds).push_back(e);
  auto check = [&](std::string name, bool ok, std::string detail) {
    r.assertions.push_back({std::move(name), ok, std::move(detail)});
  };
  auto jump_between = [&](auto from_ok, auto to_ok) {
    return std::any_of(r.path.jumps.begin(), r.path.jumps.end(),
                       [&](const PathJump& j) { return from_ok(j.z_from) && to_ok(j.z_to); });
  };
  const auto interior = [](double z) { return z > 0.5 + 1e-3 && z < 1.0 - 1e-9; };

  if (id == "i") {
    const bool two_super = forks.size() == 2 && std::all_of(forks.begin(), forks.end(), [](const auto& e) {
                             return e.criticality == Criticality::Supercritical;
                           });
    check("two supercritical pitchforks", two_super, std::to_string(forks.size()) + " pitchfork(s)");
    check("no fold", folds.empty(), std::to_string(folds.size()) + " fold(s)");
    check("smooth path", r.path.jumps.empty(), std::to_string(r.path.jumps.size()) + " jump(s)");
    check("turning point before agglomeration", facts.max_z > 0.5 + 1e-3 && facts.max_z < 1.0,
          "max z = " + detail::fmt(facts.max_z));
    check("complete re-dispersion", detail::at_half(facts.final_z), "final z = " + detail::fmt(facts.final_z));
  } else if (id == "ii") {
    const bool fold_after =
        r.breaks.phi_b2 && std::any_of(folds.begin(), folds.end(), [&](const auto& e) {
          return e.phi > *r.breaks.phi_b2 && e.phi < 1.0;
        });
    check("fold beyond the second break point", fold_after, std::to_string(folds.size()) + " fold(s)");
    check("second pitchfork subcritical",
          forks.size() == 2 && forks[1].criticality == Criticality::Subcritical,
          std::to_string(forks.size()) + " pitchfork(s)");
    check("sudden re-dispersion from an asymmetric state", jump_between(interior, detail::at_half),
          std::to_string(r.path.jumps.size()) + " jump(s)");
  } else if (id == "iii") {
    const bool window = r.sustains.phi_s1 && r.sustains.phi_s2 && facts.agglomerates && facts.leaves_corner &&
                        *facts.first_corner_phi > opt.phi_lo && *facts.last_corner_phi < opt.phi_hi;
    check("agglomeration stable on an intermediate window", window,
          facts.agglomerates ? "corner held on [" + detail::fmt(*facts.first_corner_phi) + ", " +
                                   detail::fmt(*facts.last_corner_phi) + "]"
                             : "never agglomerates");
    check("fold present", !folds.empty(), std::to_string(folds.size()) + " fold(s)");
    check("re-dispersion at high integration", detail::at_half(facts.final_z),
          "final z = " + detail::fmt(facts.final_z));
  } else if (id == "iv") {
    check("direct jump from agglomeration to symmetric dispersion",
          jump_between(detail::at_corner, detail::at_half), std::to_string(r.path.jumps.size()) + " jump(s)");
    check("agglomeration reached first", facts.agglomerates, "max z = " + detail::fmt(facts.max_z));
  } else if (id == "v") {
    bool always_unstable = true;
    for (const auto& pt : r.path.points)
      always_unstable = always_unstable && symmetric_break_condition(r.params, pt.phi) > 0.0;
    check("symmetric dispersion never stable", always_unstable && !r.breaks.phi_b1 && !r.breaks.phi_b2, "");
    check("no re-dispersion", !facts.returns_to_half, "");
    check("agglomeration at high integration", detail::at_corner(facts.final_z),
          "final z = " + detail::fmt(facts.final_z));
  } else if (id == "vi") {
    check("single supercritical pitchfork",
          forks.size() == 1 && forks[0].criticality == Criticality::Supercritical,
          std::to_string(forks.size()) + " pitchfork(s)");
    check("smooth path", r.path.jumps.empty(), std::to_string(r.path.jumps.size()) + " jump(s)");
    check("monotone path to agglomeration", facts.monotone && detail::at_corner(facts.final_z),
          "final z = " + detail::fmt(facts.final_z));
  }
  return r;
}

}  // namespace qladder
