#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qladder/errors.hpp"
#include "qladder/model.hpp"
#include "qladder/params.hpp"
#include "qladder/roots.hpp"

namespace qladder {

enum class EquilibriumKind { SymmetricDispersion, AsymmetricDispersion, Agglomeration };
enum class Stability { Stable, Unstable, Undetermined };

inline const char* to_string(EquilibriumKind k) {
  switch (k) {
    case EquilibriumKind::SymmetricDispersion: return "symmetric_dispersion";
    case EquilibriumKind::AsymmetricDispersion: return "asymmetric_dispersion";
    default: return "agglomeration";
  }
}
inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    default: return "undetermined";
  }
}

struct Equilibrium {
  double z_star = 0.5;
  EquilibriumKind kind = EquilibriumKind::SymmetricDispersion;
  Stability stability = Stability::Undetermined;
  bool regular = true;
  double residual = 0.0;    ///< |delta_v(z*)|, or |delta_v(1)| at a corner
  double derivative = 0.0;  ///< delta_v'(z*) for interior points, delta_v(1) at a corner
  bool stable() const { return stability == Stability::Stable; }
};

/// Tolerance separating a signed stability test from an irregular case.
inline constexpr double kStabilityTol = 1e-10;

/// Labels an equilibrium from the sign of the migration drift around it.
inline Equilibrium classify_stability(Equilibrium eq, const ModelParams& p, TradeFreeness phi,
                                      const SpilloverSpec& spec) {
  if (eq.z_star <= 0.0 || eq.z_star >= 1.0) {
    // Corner: the outward pull of the occupied region, delta_v(1) = -delta_v(0).
    const double pull = eq.z_star >= 1.0 ? delta_v(1.0, phi, p, spec) : -delta_v(0.0, phi, p, spec);
    eq.residual = std::abs(pull);
    eq.derivative = pull;
    eq.regular = std::abs(pull) > kStabilityTol;
    eq.stability = !eq.regular ? Stability::Undetermined
                               : (pull > 0.0 ? Stability::Stable : Stability::Unstable);
    return eq;
  }
  eq.residual = std::abs(delta_v(eq.z_star, phi, p, spec));
  eq.derivative = delta_v_prime(eq.z_star, phi, p, spec);
  eq.regular = std::abs(eq.derivative) > kStabilityTol;
  eq.stability = !eq.regular ? Stability::Undetermined
                             : (eq.derivative < 0.0 ? Stability::Stable : Stability::Unstable);
  return eq;
}

struct RootScan {
  int cells = 2048;
  double edge = 1e-9;       ///< scan [1/2 + edge, 1 - edge]
  double xtol = 1e-12;
  double merge_tol = 1e-9;
};

/// All long-run equilibria on [0, 1], sorted by location. The symmetric point
/// is always present; interior roots on (1/2, 1) come from a sign scan and are
/// mirrored; corners are included when delta_v(1) >= 0.
inline std::vector<Equilibrium> find_equilibria(const ModelParams& p, TradeFreeness phi,
                                                const SpilloverSpec& spec, const RootScan& scan = {}) {
  p.validate();
  auto dv = [&](double z) { return delta_v(z, phi, p, spec); };
  std::vector<double> upper = scan_roots(dv, 0.5 + scan.edge, 1.0 - scan.edge, scan.cells, scan.xtol);
  std::sort(upper.begin(), upper.end());
  std::vector<double> merged;
  for (double r : upper)
    if (merged.empty() || r - merged.back() > scan.merge_tol) merged.push_back(r);

  const bool corner = dv(1.0) >= 0.0;
  const std::size_t count = merged.size() + (corner ? 1 : 0);
  if (count > 2 && is_linear(spec))
    throw ConsistencyError("found " + std::to_string(count) +
                           " equilibria on (1/2, 1]; the linear spillover model admits at most two");

  std::vector<Equilibrium> out;
  auto push = [&](double z, EquilibriumKind kind) {
    Equilibrium e;
    e.z_star = z;
    e.kind = kind;
    out.push_back(classify_stability(e, p, phi, spec));
  };
  push(0.5, EquilibriumKind::SymmetricDispersion);
  for (double r : merged) {
    push(r, EquilibriumKind::AsymmetricDispersion);
    push(1.0 - r, EquilibriumKind::AsymmetricDispersion);
  }
  if (corner) {
    push(1.0, EquilibriumKind::Agglomeration);
    push(0.0, EquilibriumKind::Agglomeration);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.z_star < b.z_star; });
  return out;
}

// ---------------------------------------------------------------------------
// Symmetric dispersion (linear spillover)

/// Sign condition for symmetric dispersion: negative means stable.
inline double symmetric_break_condition(const ModelParams& p, double phi) {
  const double l = p.lambda, s = p.sigma;
  return p.gamma * (s - 1.0) * (2.0 * p.b * (l + 1.0) * (phi + 1.0) * (phi + 1.0) -
                                (2.0 * l + 3.0) * phi * phi - 2.0 * l - 1.0) +
         2.0 * s * (1.0 - phi * phi);
}

/// delta_v'(1/2) from the closed form (linear) or a five-point stencil.
inline double symmetric_slope(TradeFreeness phi, const ModelParams& p, const SpilloverSpec& spec) {
  const double f = phi.value();
  if (is_linear(spec))
    return 2.0 * p.mu * symmetric_break_condition(p, f) / (p.sigma * (p.sigma - 1.0) * (1.0 + f) * (1.0 + f));
  const double h = 1e-4;
  auto dv = [&](double z) { return delta_v(z, phi, p, spec); };
  return (dv(0.5 - 2 * h) - 8.0 * dv(0.5 - h) + 8.0 * dv(0.5 + h) - dv(0.5 + 2 * h)) / (12.0 * h);
}

struct BreakPoints {
  std::optional<double> phi_b1, phi_b2;
  double gamma_1;  ///< spillover intensity needed for the first break point
  double b_1, b_2;  ///< bracket on b for the first break point
  /// The textbook existence conditions, kept separately from the actual
  /// presence of each root in (0, 1).
  bool b1_condition;
  bool b2_condition;
};

inline double break_gamma_1(const ModelParams& p) {
  return 2.0 * p.sigma / ((2.0 * p.lambda + 1.0) * (p.sigma - 1.0));
}

inline BreakPoints break_points_closed(const ModelParams& p) {
  const double l = p.lambda, g = p.gamma, s = p.sigma, b = p.b;
  const double gs = g * (s - 1.0);
  BreakPoints out{};
  out.gamma_1 = break_gamma_1(p);
  const double lead = g * (2.0 * l + 1.0) * (s - 1.0) - 2.0 * s;
  out.b_1 = lead * (g * (2.0 * l + 3.0) * (s - 1.0) + 2.0 * s) / (8.0 * gs * gs * (l + 1.0) * (l + 1.0));
  out.b_2 = lead / (2.0 * g * (l + 1.0) * (s - 1.0));
  out.b1_condition = g > out.gamma_1 && b >= out.b_1 && b < out.b_2;
  out.b2_condition = out.b1_condition && b < 0.5;

  const double disc = gs * gs * (8.0 * b * (l + 1.0) * (l + 1.0) - 4.0 * l * l - 8.0 * l - 3.0) +
                      4.0 * g * s * (s - 1.0) + 4.0 * s * s;
  if (disc < 0.0) return out;
  const double root = std::sqrt(disc);
  const double den = gs * (2.0 * b * (l + 1.0) - 2.0 * l - 3.0) - 2.0 * s;
  const double lift = 2.0 * b * g * (l + 1.0) * (s - 1.0);
  const double p1 = (root - lift) / den;
  const double p2 = -(root + lift) / den;
  if (p1 > 0.0 && p1 < 1.0) out.phi_b1 = p1;
  if (p2 > 0.0 && p2 < 1.0 && p2 != p1) out.phi_b2 = p2;
  return out;
}

/// Weight of local spillovers above which symmetric dispersion is unstable
/// regardless of the immobile mass correction.
inline double b_d(const ModelParams& p, double phi) {
  const double l = p.lambda;
  return ((2.0 * l + 3.0) * phi * phi + 2.0 * l + 1.0) / (2.0 * (l + 1.0) * (phi + 1.0) * (phi + 1.0));
}

/// Weight of local spillovers at which delta_v'(1/2) vanishes.
inline double b_b(const ModelParams& p, double phi) {
  const double l = p.lambda, g = p.gamma, s = p.sigma;
  return (g * (s - 1.0) * ((2.0 * l + 3.0) * phi * phi + 2.0 * l + 1.0) + 2.0 * s * (phi * phi - 1.0)) /
         (2.0 * g * (l + 1.0) * (s - 1.0) * (phi + 1.0) * (phi + 1.0));
}

// ---------------------------------------------------------------------------
// Agglomeration

/// delta_v(1) / mu for the linear spillover: positive means agglomeration is stable.
inline double agglomeration_condition(const ModelParams& p, double phi) {
  const double l = p.lambda, b = p.b;
  return p.gamma * ((b - 1.0) * (l + 2.0) * phi * phi + 2.0 * b * (l + 1.0) * phi + (b - 1.0) * l) /
             (2.0 * p.sigma * phi) -
         std::log(phi) / (p.sigma - 1.0);
}

/// Maximiser of the agglomeration condition over phi (may exceed one).
inline double agglomeration_peak(const ModelParams& p) {
  const double l = p.lambda, g = p.gamma, s = p.sigma, b = p.b;
  const double inv = 1.0 / (s - 1.0);
  return s * (inv - std::sqrt(g * g * (b - 1.0) * (b - 1.0) * l * (l + 2.0) / (s * s) + inv * inv)) /
         (g * (b - 1.0) * (l + 2.0));
}

inline double b_s(const ModelParams& p, double phi) {
  const double l = p.lambda;
  return ((l + 2.0) * phi * phi + l) / ((phi + 1.0) * ((l + 2.0) * phi + l));
}

struct SustainPoints {
  std::optional<double> phi_s1, phi_s2;
  double phi_peak;
};

inline SustainPoints sustain_points(const ModelParams& p) {
  SustainPoints out{};
  auto omega = [&](double f) { return agglomeration_condition(p, f); };
  const double hi_edge = 1.0 - 1e-12;
  out.phi_peak = std::min(agglomeration_peak(p), hi_edge);
  const double peak = out.phi_peak;
  if (!(omega(peak) > 0.0)) return out;
  double lo = peak;
  while (omega(lo) >= 0.0 && lo > 1e-300) lo *= 1e-2;
  out.phi_s1 = refine_root(omega, lo, peak);
  if (peak < hi_edge && omega(hi_edge) < 0.0) out.phi_s2 = refine_root(omega, peak, hi_edge);
  return out;
}

// ---------------------------------------------------------------------------
// Asymmetric dispersion

inline double b_hat(double phi) { return (1.0 + phi * phi) / ((1.0 + phi) * (1.0 + phi)); }

namespace detail {
inline double log_access_ratio(double z, double phi) {
  return std::log((z * (phi - 1.0) + 1.0) / (z * (1.0 - phi) + phi));
}
}  // namespace detail

/// Immobile mass lambda for which z is an interior equilibrium at phi.
inline double lambda_star(double z, double phi, const ModelParams& p) {
  if (!(z > 0.5 && z <= 1.0)) throw DomainError("lambda_star needs z in (1/2, 1]");
  const double g = p.gamma, s = p.sigma, b = p.b, f = phi;
  const double c1 = g * (s - 1.0) * (2.0 * z - 1.0);
  const double c2 = f * f * (2.0 * b * (z - 1.0) * z + b - z * z + z - 1.0) +
                    (1.0 - 2.0 * b) * (z - 1.0) * z + b * f;
  const double c3 = s * (z * (f - 1.0) + 1.0) * (z * (f - 1.0) - f);
  const double tilt = b * (f + 1.0) * (f + 1.0) - f * f - 1.0;
  // b = b_hat(phi) up to rounding in b_hat itself.
  if (std::abs(tilt) <= 8.0 * std::numeric_limits<double>::epsilon() * (f * f + 1.0))
    throw PoleError("lambda_star is singular at b = b_hat(phi)");
  const double c4 = g * (s - 1.0) * (2.0 * z - 1.0) * tilt;
  return -2.0 * (c1 * c2 + c3 * detail::log_access_ratio(z, f)) / c4;
}

/// Lower bound on b for a positive lambda_star.
inline double b_tilde(double z, double phi, const ModelParams& p) {
  const double g = p.gamma, s = p.sigma, f = phi;
  const double mix = (z - 1.0) * z * (f * f - 1.0) + f * f;
  const double num = g * (s - 1.0) * (2.0 * z - 1.0) * mix -
                     s * (z * (f - 1.0) + 1.0) * (z * (f - 1.0) - f) * detail::log_access_ratio(z, f);
  const double den = g * (s - 1.0) * (2.0 * z - 1.0) * (f + 1.0) * (2.0 * (z - 1.0) * z * (f - 1.0) + f);
  return num / den;
}

/// Value of b where the spillover part of lambda_star changes sign.
inline double b_under(double z, double phi) {
  const double q = (z - 1.0) * z * (phi * phi - 1.0);
  return (q + phi * phi) / (2.0 * q + phi * (phi + 1.0));
}

/// Spillover intensity at which b_tilde crosses zero.
inline double gamma_c(double z, double phi, const ModelParams& p) {
  const double s = p.sigma, f = phi;
  return s * (z * (1.0 - f) - 1.0) * (z * (1.0 - f) + f) * detail::log_access_ratio(z, f) /
         ((s - 1.0) * (2.0 * z - 1.0) * ((z - 1.0) * z * (f * f - 1.0) + f * f));
}

namespace detail {
inline double curvature_mass(double z, double phi) {
  return 2.0 * z * z * (phi - 1.0) * (phi - 1.0) - 2.0 * z * (phi - 1.0) * (phi - 1.0) + phi * phi + 1.0;
}
}  // namespace detail

/// Stability condition at an asymmetric equilibrium with lambda = lambda_star(z):
/// negative means stable.
inline double asymmetric_condition(double z, double phi, const ModelParams& p) {
  const double g = p.gamma, s = p.sigma, b = p.b, f = phi;
  const double w = 1.0 - 2.0 * z;
  return (2.0 * z - 1.0) * (f * f - 1.0) * ((2.0 * b - 1.0) * g * (s - 1.0) * w * w - s) +
         s * detail::curvature_mass(z, f) * detail::log_access_ratio(z, f);
}

/// The asymmetric equilibrium at (z, phi) is stable iff b > b_c.
inline double b_c(double z, double phi, const ModelParams& p) {
  const double g = p.gamma, s = p.sigma, f = phi;
  const double u = 2.0 * z - 1.0;
  return (u * (1.0 - f * f) * (s + g * (s - 1.0) * u * u) +
          s * detail::curvature_mass(z, f) * detail::log_access_ratio(z, f)) /
         (2.0 * g * (s - 1.0) * u * u * u * (1.0 - f * f));
}

inline bool asymmetric_stability(double z, double phi, const ModelParams& p) {
  if (!(z > 0.5 && z < 1.0)) throw DomainError("asymmetric_stability needs z in (1/2, 1)");
  return asymmetric_condition(z, phi, p) < 0.0;
}

// ---------------------------------------------------------------------------
// General spillover function

struct GeneralBreakPoints {
  std::optional<double> phi_b1, phi_b2;
  std::optional<double> F_b1, F_b2;  ///< degenerate-bifurcation level of F(1/2) at each point
};

/// Spillover level F(1/2) at which the cross derivative in (phi, z) vanishes.
inline double degenerate_spillover_level(double phi_b, const ModelParams& p) {
  return -p.sigma * (phi_b + 1.0) / ((p.sigma - 1.0) * (2.0 * p.lambda * (phi_b - 1.0) + 3.0 * phi_b - 1.0));
}

inline GeneralBreakPoints general_break_points(double F_half, double Fprime_half, const ModelParams& p) {
  if (!(F_half > 0.0)) throw DomainError("F(1/2) must be positive");
  const double l = p.lambda, s = p.sigma;
  GeneralBreakPoints out;
  const double inner = 2.0 * F_half * (l + 1.0) * (l + 1.0) * (s - 1.0) * (s - 1.0) * Fprime_half +
                       std::pow(F_half * (s - 1.0) + s, 2);
  if (inner < 0.0) return out;
  const double spread = 2.0 * std::sqrt(inner);
  const double base = (l + 1.0) * (s - 1.0) * (Fprime_half + 2.0 * F_half);
  const double den = 2.0 * (F_half * (l + 2.0) * (s - 1.0) + s) - (l + 1.0) * (s - 1.0) * Fprime_half;
  const double p1 = (base - spread) / den, p2 = (base + spread) / den;
  if (p1 > 0.0 && p1 < 1.0) {
    out.phi_b1 = p1;
    out.F_b1 = degenerate_spillover_level(p1, p);
  }
  if (p2 > 0.0 && p2 < 1.0) {
    out.phi_b2 = p2;
    out.F_b2 = degenerate_spillover_level(p2, p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trade-coupled spillovers

/// delta_v(1) for the trade-coupled spillover: positive means agglomeration is stable.
inline double trade_coupled_agglomeration_condition(const ModelParams& p, double phi) {
  const double l = p.lambda, b = p.b, s = p.sigma, psi = p.psi;
  return p.mu * (p.gamma * (2.0 * b * (l + 1.0) - psi * (1.0 - b) * l - psi * (1.0 - b) * (l + 2.0) * phi * phi) /
                     (2.0 * s) -
                 std::log(phi) / (s - 1.0));
}

struct TradeCoupledThresholds {
  double phi_b_g;                         ///< closed-form break point
  std::optional<double> phi_b_g_numeric;  ///< root of delta_v'(1/2) in phi
  std::optional<double> phi_s_g;          ///< sustain point
};

/// Root(s) in phi of a function sampled on a uniform grid over (0, 1).
template <class F>
std::vector<double> phi_roots(F&& f, int cells = 4000, double edge = 1e-6) {
  return scan_roots(f, edge, 1.0 - edge, cells, 1e-15);
}

inline TradeCoupledThresholds trade_coupled_thresholds(const ModelParams& p) {
  p.validate();
  const double l = p.lambda, s = p.sigma;
  if (!(l > s / (s - 1.0)))
    throw PreconditionError("trade-coupled thresholds assume the no-black-hole condition lambda > sigma/(sigma-1)");
  if (!(p.b < 0.5)) throw PreconditionError("trade-coupled thresholds assume b < 1/2");
  TradeCoupledThresholds out{};
  out.phi_b_g = (2.0 * (l + 1.0) * (s - 1.0) - 2.0 * (2.0 * s - 1.0)) / ((2.0 * l + 4.0) * (s - 1.0) + 2.0 * s);

  const SpilloverSpec spec = TradeCoupled{};
  const auto slope_roots = phi_roots([&](double f) { return symmetric_slope(TradeFreeness(f), p, spec); });
  if (!slope_roots.empty()) out.phi_b_g_numeric = slope_roots.front();

  const double lo = p.b / (1.0 - p.b);
  auto omega = [&](double f) { return trade_coupled_agglomeration_condition(p, f); };
  const double hi = 1.0 - 1e-12;
  if (lo < hi && (omega(lo) > 0.0) != (omega(hi) > 0.0)) out.phi_s_g = refine_root(omega, lo, hi);
  return out;
}

// ---------------------------------------------------------------------------
// Threshold report

struct ThresholdSet {
  std::optional<double> b_s, b_d, b_hat, b_tilde, b_under, b_c, b_star, b_1, b_2, gamma_1;
  std::optional<double> phi_b1, phi_b2, phi_s1, phi_s2;
  std::optional<double> phi_b1_G, phi_b2_G, F_b1, F_b2;
  std::optional<double> phi_b_g, phi_b_g_numeric, phi_s_g;
};

/// Pitchfork-criticality threshold on b at a break point phi_b.
inline double b_star(const ModelParams& p, double phi_b) {
  const double m = p.lambda * (phi_b - 1.0) + 2.0 * phi_b;
  return (p.sigma * (phi_b + 1.0) * (phi_b - 1.0) * (phi_b - 1.0) / (p.gamma * (p.sigma - 1.0) * m) +
          3.0 * (phi_b * phi_b + 1.0)) /
         (3.0 * (phi_b + 1.0) * (phi_b + 1.0));
}

/// Every threshold that applies to the active regime. phi-dependent b levels
/// are evaluated at `phi`, z-dependent ones at `z_probe`.
inline ThresholdSet compute_thresholds(const ModelParams& p, const SpilloverSpec& spec, double phi,
                                       double z_probe = 0.75) {
  p.validate();
  ThresholdSet t;
  if (is_linear(spec)) {
    const auto bp = break_points_closed(p);
    const auto sp = sustain_points(p);
    t.phi_b1 = bp.phi_b1;
    t.phi_b2 = bp.phi_b2;
    t.phi_s1 = sp.phi_s1;
    t.phi_s2 = sp.phi_s2;
    t.gamma_1 = bp.gamma_1;
    t.b_1 = bp.b_1;
    t.b_2 = bp.b_2;
    t.b_s = b_s(p, phi);
    t.b_d = b_d(p, phi);
    t.b_hat = b_hat(phi);
    t.b_tilde = b_tilde(z_probe, phi, p);
    t.b_under = b_under(z_probe, phi);
    t.b_c = b_c(z_probe, phi, p);
    t.b_star = b_star(p, phi);
    const auto gb = general_break_points(0.5 * p.gamma, p.gamma * (2.0 * p.b - 1.0), p);
    t.phi_b1_G = gb.phi_b1;
    t.phi_b2_G = gb.phi_b2;
    t.F_b1 = gb.F_b1;
    t.F_b2 = gb.F_b2;
  } else if (is_trade_coupled(spec)) {
    const auto tc = trade_coupled_thresholds(p);
    t.phi_b_g = tc.phi_b_g;
    t.phi_b_g_numeric = tc.phi_b_g_numeric;
    t.phi_s_g = tc.phi_s_g;
  } else {
    const auto& c = std::get<CustomSpillover>(spec);
    const auto gb = general_break_points(c.F_half, c.Fprime_half, p);
    t.phi_b1_G = gb.phi_b1;
    t.phi_b2_G = gb.phi_b2;
    t.F_b1 = gb.F_b1;
    t.F_b2 = gb.F_b2;
  }
  return t;
}

}  // namespace qladder
