#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "qladder/equilibrium.hpp"
#include "qladder/errors.hpp"
#include "qladder/model.hpp"
#include "qladder/ode.hpp"
#include "qladder/parallel.hpp"
#include "qladder/params.hpp"
#include "qladder/quality.hpp"

namespace qladder {

struct MigrationState {
  double z = 0.5;
  double t = 0.0;
};

struct MigrationSample {
  double t, z, delta_v;
};

struct MigrationResult {
  std::vector<MigrationSample> samples;
  bool converged = false;  ///< settled at a rest point before the horizon
  bool absorbed = false;   ///< stopped on a boundary with outward drift
  std::optional<Equilibrium> terminal;
};

struct MigrationOptions {
  double tol = 1e-10;          ///< |delta_v| at an interior rest point
  double newton_tol = 1e-9;    ///< |delta_v / delta_v'| at an interior rest point
  OdeOptions ode{};
};

namespace detail {

inline std::optional<Equilibrium> match_equilibrium(double z, const ModelParams& p, TradeFreeness phi,
                                                    const SpilloverSpec& spec, double tol = 1e-8) {
  std::optional<Equilibrium> best;
  for (const auto& e : find_equilibria(p, phi, spec))
    if (std::abs(e.z_star - z) <= tol && (!best || std::abs(e.z_star - z) < std::abs(best->z_star - z))) best = e;
  return best;
}

inline double derivative_in_z(double z, TradeFreeness phi, const ModelParams& p, const SpilloverSpec& spec) {
  const double zc = std::clamp(z, 1e-9, 1.0 - 1e-9);
  return delta_v_prime(zc, phi, p, spec);
}

}  // namespace detail

/// Integrates z' = kappa * delta_v(z) with projection onto [0, 1]. A boundary
/// absorbs only when the drift there points outward.
inline MigrationResult simulate(double z0, const ModelParams& p, TradeFreeness phi, const SpilloverSpec& spec,
                                double horizon, const MigrationOptions& opt = {}) {
  if (!(z0 >= 0.0 && z0 <= 1.0)) throw DomainError("initial share must lie in [0, 1]");
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  p.validate();
  MigrationResult res;
  auto dv = [&](double z) { return delta_v(std::clamp(z, 0.0, 1.0), phi, p, spec); };

  auto settled = [&](double z) {
    const double d = dv(z);
    if ((z >= 1.0 && d >= 0.0) || (z <= 0.0 && d <= 0.0)) {
      res.absorbed = true;
      return true;
    }
    if (z <= 0.0 || z >= 1.0) return false;
    if (std::abs(d) >= opt.tol) return false;
    const double slope = detail::derivative_in_z(z, phi, p, spec);
    return d == 0.0 || std::abs(d / slope) < opt.newton_tol;
  };

  res.samples.push_back({0.0, z0, dv(z0)});
  if (settled(z0)) {
    res.converged = true;
  } else {
    Vec<1> y{z0};
    auto rhs = [&](double, const Vec<1>& v) { return Vec<1>{p.kappa * dv(v[0])}; };
    auto project = [](Vec<1>& v) { v[0] = std::clamp(v[0], 0.0, 1.0); };
    auto observe = [&](double t, const Vec<1>& v) {
      res.samples.push_back({t, v[0], dv(v[0])});
      if (settled(v[0])) {
        res.converged = true;
        return false;
      }
      return true;
    };
    // Steps below 1 / (kappa max|delta_v'|) keep the approach to a rest point
    // monotone; larger ones let the explicit scheme ring around it.
    double stiffness = 0.0;
    for (int i = 0; i <= 200; ++i)
      stiffness = std::max(stiffness, std::abs(detail::derivative_in_z(i / 200.0, phi, p, spec)));
    OdeOptions ode = opt.ode;
    if (stiffness > 0.0) {
      const double cap = 1.0 / (p.kappa * stiffness);
      ode.max_step = ode.max_step > 0.0 ? std::min(ode.max_step, cap) : cap;
    }
    integrate_dopri<1>(rhs, y, 0.0, horizon, ode, project, observe);
  }
  if (res.converged) res.terminal = detail::match_equilibrium(res.samples.back().z, p, phi, spec);
  return res;
}

// ---------------------------------------------------------------------------
// Joint quality-migration dynamics

struct CoupledSample {
  double t, z, a1, a2, delta_v, V;
};

struct CoupledResult {
  std::vector<CoupledSample> samples;
  std::size_t guard_triggers = 0;
};

/// Quality dynamics at full speed with migration slowed to kappa * epsilon.
/// The differential uses the current regional qualities.
inline CoupledResult simulate_coupled(double z0, const QualityState& quality0, const ModelParams& p,
                                      TradeFreeness phi, const SpilloverSpec& spec, double horizon,
                                      double epsilon_ratio, const OdeOptions& ode = {}) {
  if (!(z0 >= 0.0 && z0 <= 1.0)) throw DomainError("initial share must lie in [0, 1]");
  if (!(epsilon_ratio > 0.0 && epsilon_ratio < 1.0)) throw DomainError("epsilon_ratio must lie in (0, 1)");
  if (!(quality0.a1 > 0.0 && quality0.a1 < 1.0 && quality0.a2 > 0.0 && quality0.a2 < 1.0))
    throw DomainError("initial qualities must be interior to (0, 1)");
  p.validate();
  const double speed = epsilon_ratio * p.kappa;
  CoupledResult res;
  auto dvq = [&](const Vec<3>& s) {
    return delta_v_with_quality(std::clamp(s[0], 0.0, 1.0), phi, p, spec, s[1], s[2]);
  };
  auto rhs = [&](double, const Vec<3>& s) {
    const double z = std::clamp(s[0], 0.0, 1.0);
    double drift = speed * dvq(s);
    if ((z >= 1.0 && drift > 0.0) || (z <= 0.0 && drift < 0.0)) drift = 0.0;
    const auto q = quality_rhs({s[1], s[2]}, z, phi, p, spec);
    return Vec<3>{drift, q[0], q[1]};
  };
  auto project = [&](Vec<3>& s) {
    s[0] = std::clamp(s[0], 0.0, 1.0);
    for (int i = 1; i < 3; ++i)
      if (s[i] < 1e-12 || s[i] > 1.0 - 1e-12) {
        s[i] = std::clamp(s[i], 1e-12, 1.0 - 1e-12);
        ++res.guard_triggers;
      }
  };
  Vec<3> y{z0, quality0.a1, quality0.a2};
  auto record = [&](double t, const Vec<3>& s) {
    res.samples.push_back({t, s[0], s[1], s[2], dvq(s), ratio_lyapunov(s[1], s[2])});
    return true;
  };
  record(0.0, y);
  integrate_dopri<3>(rhs, y, 0.0, horizon, ode, project, record);
  return res;
}

/// Largest |z_coupled(t) - z_reduced(epsilon t)| over the coupled samples, with
/// the reduced path interpolated linearly in its own time.
inline double reduced_path_gap(const MigrationResult& reduced, const CoupledResult& coupled, double epsilon_ratio) {
  const auto& r = reduced.samples;
  double gap = 0.0;
  std::size_t k = 0;
  for (const auto& s : coupled.samples) {
    const double slow = s.t * epsilon_ratio;
    while (k + 1 < r.size() && r[k + 1].t < slow) ++k;
    double zr;
    if (k + 1 >= r.size() || slow <= r[k].t) {
      zr = slow <= r.front().t ? r.front().z : r.back().z;
    } else {
      const double w = (slow - r[k].t) / (r[k + 1].t - r[k].t);
      zr = (1.0 - w) * r[k].z + w * r[k + 1].z;
    }
    gap = std::max(gap, std::abs(s.z - zr));
  }
  return gap;
}

// ---------------------------------------------------------------------------
// Basins of attraction

struct BasinMap {
  std::vector<double> z0;
  std::vector<int> terminal_id;  ///< index into `equilibria`, -1 if unresolved
  std::vector<Equilibrium> equilibria;
};

inline BasinMap basins(const ModelParams& p, TradeFreeness phi, const SpilloverSpec& spec, std::size_t n_grid,
                       double horizon = 1e6, unsigned threads = 1) {
  if (n_grid < 2) throw DomainError("basin grid needs at least two points");
  BasinMap m;
  m.equilibria = find_equilibria(p, phi, spec);
  m.z0.resize(n_grid);
  m.terminal_id.assign(n_grid, -1);
  for (std::size_t i = 0; i < n_grid; ++i) m.z0[i] = static_cast<double>(i) / static_cast<double>(n_grid - 1);
  parallel_for(n_grid, threads, [&](std::size_t i) {
    const auto run = simulate(m.z0[i], p, phi, spec, horizon);
    const double zt = run.samples.back().z;
    if (!run.converged) {
      // A one-dimensional flow is monotone, so a run still moving at the
      // horizon ends at the first equilibrium ahead of it.
      const double drift = delta_v(zt, phi, p, spec);
      if (drift == 0.0) return;
      int ahead = -1;
      for (std::size_t k = 0; k < m.equilibria.size(); ++k) {
        const double z = m.equilibria[k].z_star;
        if (drift > 0.0 ? z > zt && (ahead < 0 || z < m.equilibria[ahead].z_star)
                        : z < zt && (ahead < 0 || z > m.equilibria[ahead].z_star))
          ahead = static_cast<int>(k);
      }
      m.terminal_id[i] = ahead;
      return;
    }
    double best = 1e-8;
    for (std::size_t k = 0; k < m.equilibria.size(); ++k) {
      const double d = std::abs(m.equilibria[k].z_star - zt);
      if (d <= best) {
        best = d;
        m.terminal_id[i] = static_cast<int>(k);
      }
    }
  });
  return m;
}

}  // namespace qladder
