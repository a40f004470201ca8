#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qladder/errors.hpp"
#include "qladder/model.hpp"
#include "qladder/ode.hpp"
#include "qladder/params.hpp"

namespace qladder {

/// Average relative qualities of the two regions' varieties.
struct QualityState {
  double a1 = 0.5;
  double a2 = 0.5;
  double t = 0.0;
};

struct QualitySteadyState {
  double a_bar;    ///< common relative quality
  double g;        ///< frontier growth rate
  double theta;    ///< power-law exponent upsilon / g
  double upsilon;  ///< effective reset hazard
};

namespace detail {

struct QualityRates {
  double upsilon;  // reset hazard
  double g;        // frontier growth
};

// Innovation flows at common quality scale a_scale. Both rates are linear in
// a_scale, so their ratio and the rest point do not depend on it.
inline QualityRates quality_rates(double z, TradeFreeness phi, const ModelParams& p,
                                  const SpilloverSpec& spec, double a_scale) {
  const double F1 = spillover_F(spec, z, phi, p);
  const double F2 = spillover_F(spec, 1.0 - z, phi, p);
  return {0.5 * a_scale * (F1 + F2), p.omega() * a_scale * (z * F1 + (1.0 - z) * F2)};
}

}  // namespace detail

/// Drift of (a1, a2): each region is reset toward the frontier at the shared
/// hazard and falls behind at the frontier growth rate.
inline std::array<double, 2> quality_rhs(const QualityState& s, double z, TradeFreeness phi,
                                         const ModelParams& p, const SpilloverSpec& spec) {
  detail::require_share(z);
  const auto r = detail::quality_rates(z, phi, p, spec, 0.5 * (s.a1 + s.a2));
  return {r.upsilon * (1.0 - s.a1) - r.g * s.a1, r.upsilon * (1.0 - s.a2) - r.g * s.a2};
}

/// b(1-2z)^2 + 2z(1-z): the spillover mass that drives growth in the linear case.
inline double spillover_balance(double z, double b) {
  return b * (1.0 - 2.0 * z) * (1.0 - 2.0 * z) + 2.0 * z * (1.0 - z);
}

inline QualitySteadyState steady_state(double z, TradeFreeness phi, const ModelParams& p,
                                       const SpilloverSpec& spec) {
  detail::require_share(z);
  const double F1 = spillover_F(spec, z, phi, p);
  const double F2 = spillover_F(spec, 1.0 - z, phi, p);
  const double reach = z * F1 + (1.0 - z) * F2;
  const double w = p.omega();
  QualitySteadyState ss{};
  ss.a_bar = (F1 + F2) / (F1 + F2 + 2.0 * w * reach);
  ss.g = w * ss.a_bar * reach;
  ss.upsilon = 0.5 * ss.a_bar * (F1 + F2);
  ss.theta = ss.g > 0.0 ? ss.upsilon / ss.g : INFINITY;
  return ss;
}

/// V(x) = (x - 1)^2 / 2 with x = a1 / a2.
inline double ratio_lyapunov(double a1, double a2) {
  const double x = a1 / a2;
  return 0.5 * (x - 1.0) * (x - 1.0);
}

struct QualitySample {
  double t, a1, a2, V;
};

struct QualityTrajectory {
  std::vector<QualitySample> samples;
  bool converged = false;         ///< terminal state within tol of the rest point
  std::size_t guard_triggers = 0;  ///< clamp activations; zero in a healthy run
  std::size_t rejected_steps = 0;
  QualityState terminal() const {
    const auto& s = samples.back();
    return {s.a1, s.a2, s.t};
  }
};

/// Integrates the quality ODE at fixed z. Stops at `horizon` or once both
/// qualities sit within tol/100 of the rest point.
inline QualityTrajectory integrate_quality(const QualityState& initial, double z, TradeFreeness phi,
                                           const ModelParams& p, const SpilloverSpec& spec,
                                           double horizon, double tol = 1e-8,
                                           const OdeOptions& opt = {}) {
  if (!(initial.a1 > 0.0 && initial.a1 < 1.0 && initial.a2 > 0.0 && initial.a2 < 1.0))
    throw DomainError("initial qualities must be interior to (0, 1)");
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  const double target = steady_state(z, phi, p, spec).a_bar;

  QualityTrajectory traj;
  traj.samples.push_back({initial.t, initial.a1, initial.a2, ratio_lyapunov(initial.a1, initial.a2)});
  Vec<2> y{initial.a1, initial.a2};
  auto rhs = [&](double, const Vec<2>& v) { return quality_rhs({v[0], v[1]}, z, phi, p, spec); };
  auto clamp = [&](Vec<2>& v) {
    for (double& a : v) {
      if (a < 1e-12 || a > 1.0 - 1e-12) {
        a = std::clamp(a, 1e-12, 1.0 - 1e-12);
        ++traj.guard_triggers;
      }
    }
  };
  auto observe = [&](double t, const Vec<2>& v) {
    traj.samples.push_back({t, v[0], v[1], ratio_lyapunov(v[0], v[1])});
    return std::max(std::abs(v[0] - target), std::abs(v[1] - target)) > 1e-2 * tol;
  };
  // The gap a1 - a2 decays at upsilon + g, at most the unit-scale rate. Steps
  // below its inverse keep the explicit scheme's decay factor in (0, 1), so
  // the quality ratio approaches one monotonically instead of ringing.
  const auto unit = detail::quality_rates(z, phi, p, spec, 1.0);
  OdeOptions capped = opt;
  const double cap = 1.0 / (unit.upsilon + unit.g);
  capped.max_step = capped.max_step > 0.0 ? std::min(capped.max_step, cap) : cap;
  const auto stats = integrate_dopri<2>(rhs, y, initial.t, initial.t + horizon, capped, clamp, observe);
  traj.rejected_steps = stats.rejected;
  traj.converged = std::max(std::abs(y[0] - target), std::abs(y[1] - target)) <= tol;
  return traj;
}

/// Stationary distribution of relative qualities, H(a) = a^theta on [0, 1].
struct PowerLawDistribution {
  double theta;
  double cdf(double a) const { return a <= 0.0 ? 0.0 : (a >= 1.0 ? 1.0 : std::pow(a, theta)); }
  double mean() const { return theta / (theta + 1.0); }
};

inline PowerLawDistribution stationary_distribution(const QualitySteadyState& ss) {
  if (!(ss.g > 0.0)) throw DomainError("degenerate frontier: growth rate must be positive");
  return {ss.upsilon / ss.g};
}

struct FrontierSample {
  double t, a_max;
};

/// Frontier quality a_max(t) = a_max_0 exp(g t) sampled at n+1 equally spaced times.
inline std::vector<FrontierSample> frontier_path(double g, double a_max_0, double horizon,
                                                 std::size_t n = 100) {
  if (!(a_max_0 > 0.0)) throw DomainError("initial frontier must be positive");
  if (n == 0) n = 1;
  std::vector<FrontierSample> out;
  out.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = horizon * static_cast<double>(i) / static_cast<double>(n);
    out.push_back({t, a_max_0 * std::exp(g * t)});
  }
  return out;
}

}  // namespace qladder
