#pragma once

#include <cmath>

#include "qladder/errors.hpp"
#include "qladder/params.hpp"

namespace qladder {

namespace detail {

// Market-access bracket shared by both regions' wage terms:
// (lambda/2 + z)/(z + phi(1-z)) + phi (lambda/2 + 1 - z)/(phi z + 1 - z)
inline double market_bracket(double z, double phi, double lambda) {
  const double w = 1.0 - z;
  return (0.5 * lambda + z) / (z + phi * w) + phi * (0.5 * lambda + w) / (w + phi * z);
}

inline void require_share(double z) {
  if (!(z >= 0.0 && z <= 1.0)) throw DomainError("share z must lie in [0, 1]");
}

inline void require_linear(const SpilloverSpec& spec, const char* what) {
  if (!is_linear(spec))
    throw PreconditionError(std::string(what) + " requires the linear local/global spillover");
}

}  // namespace detail

/// Utility differential v1 - v2 between the two regions at researcher share z.
inline double delta_v(double z, TradeFreeness phi, const ModelParams& p, const SpilloverSpec& spec) {
  detail::require_share(z);
  const double f = phi.value();
  const double w = 1.0 - z;
  const double F1 = spillover_F(spec, z, phi, p);
  const double F2 = spillover_F(spec, w, phi, p);
  const double wages = F1 * detail::market_bracket(z, f, p.lambda) - F2 * detail::market_bracket(w, f, p.lambda);
  // Written so that both access terms round identically at z = 1/2.
  const double prices = std::log((z + f * w) / (w + f * z));
  return p.mu * (wages / p.sigma + prices / (p.sigma - 1.0));
}

/// Central difference of delta_v in z, step shrunk near the boundary.
inline double delta_v_prime_numeric(double z, TradeFreeness phi, const ModelParams& p,
                                    const SpilloverSpec& spec, double h = 1e-6) {
  h = std::min({h, 0.5 * z, 0.5 * (1.0 - z)});
  return (delta_v(z + h, phi, p, spec) - delta_v(z - h, phi, p, spec)) / (2.0 * h);
}

/// d(delta_v)/dz. Closed form (quartic numerator) for the linear spillover,
/// central difference otherwise.
inline double delta_v_prime(double z, TradeFreeness phi, const ModelParams& p,
                            const SpilloverSpec& spec) {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("delta_v_prime needs z in (0, 1)");
  if (!is_linear(spec)) return delta_v_prime_numeric(z, phi, p, spec);

  const double f = phi.value(), l = p.lambda, g = p.gamma, s = p.sigma, b = p.b;
  const double gs = g * (s - 1.0);
  const double fm1 = f - 1.0, fp1 = f + 1.0;
  const double cubic = fm1 * fm1 * fm1 * fp1;
  const double mass = s * fp1 * fm1 * fm1;
  const double tilt = b * fp1 * fp1 - f * f - 1.0;  // recurring b(1+phi)^2 - phi^2 - 1

  // Numerator P(z) = a1 z^4 + a2 z^3 - 2(1-phi) a3 z^2 + 2(1-phi) a4 z + a5
  const double a1 = 4.0 * (1.0 - 2.0 * b) * gs * cubic;
  const double a2 = 8.0 * (2.0 * b - 1.0) * gs * cubic;
  const double a3 = gs * (b * fp1 * ((l - 2.0) * f * f - l + 18.0 * f - 4.0) -
                          f * (l * fm1 * f + l + 6.0 * f) + l - 8.0 * f + 2.0) +
                    mass;
  const double a4 = gs * (l * fm1 * tilt + 2.0 * f * (b * fp1 * (f + 5.0) - f * (f + 2.0) - 3.0)) +
                    mass;
  const double a5 = gs * (l * (f * f + 1.0) * tilt +
                          2.0 * f * (b * (f * f * f + 3.0 * f * f + f - 1.0) - f * (f * f + f + 1.0) + 1.0)) -
                    2.0 * s * f * (f * f - 1.0);

  const double z2 = z * z;
  const double P = a1 * z2 * z2 + a2 * z2 * z - 2.0 * (1.0 - f) * a3 * z2 + 2.0 * (1.0 - f) * a4 * z + a5;
  const double d1 = z * fm1 + 1.0;
  const double d2 = z * (1.0 - f) + f;
  return p.mu * P / (2.0 * (s - 1.0) * s * d1 * d1 * d2 * d2);
}

/// Sensitivity of delta_v to the local-spillover weight (linear spillover).
inline double d_delta_v_db(double z, TradeFreeness phi, const ModelParams& p) {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("d_delta_v_db needs z in (0, 1)");
  const double f = phi.value(), l = p.lambda;
  const double shape = l - 4.0 * z * z + f * (l + 4.0 * (z - 1.0) * z + 2.0) + 4.0 * z;
  return p.gamma * p.mu * (2.0 * z - 1.0) * (f + 1.0) * shape /
         (2.0 * p.sigma * (z * (f - 1.0) + 1.0) * (z * (1.0 - f) + f));
}

/// Third z-derivative of delta_v at z = 1/2 by a five-point central stencil.
inline double delta_v_third_at_half(TradeFreeness phi, const ModelParams& p,
                                    const SpilloverSpec& spec, double h = 1e-3) {
  auto dv = [&](double z) { return delta_v(z, phi, p, spec); };
  return (dv(0.5 + 2 * h) - 2.0 * dv(0.5 + h) + 2.0 * dv(0.5 - h) - dv(0.5 - 2 * h)) /
         (2.0 * h * h * h);
}

/// Utility differential with region-specific average qualities a1, a2.
/// Wage terms carry Phi_i delta = a_mean F_i; reduces to delta_v when a1 == a2.
inline double delta_v_with_quality(double z, TradeFreeness phi, const ModelParams& p,
                                   const SpilloverSpec& spec, double a1, double a2) {
  detail::require_share(z);
  const double f = phi.value();
  const double a_mean = 0.5 * (a1 + a2);
  const double F1 = spillover_F(spec, z, phi, p);
  const double F2 = spillover_F(spec, 1.0 - z, phi, p);
  const double h = 0.5 * p.lambda;
  const double q1 = z * a1, q2 = (1.0 - z) * a2;
  const double w1 = a_mean * F1 * ((h + z) / (q1 + f * q2) + f * (h + 1.0 - z) / (f * q1 + q2));
  const double w2 = a_mean * F2 * ((h + 1.0 - z) / (q2 + f * q1) + f * (h + z) / (f * q2 + q1));
  return p.mu * ((w1 - w2) / p.sigma + std::log((q1 + f * q2) / (q2 + f * q1)) / (p.sigma - 1.0));
}

/// Short-run block at a common steady-state quality a_bar (diagnostics).
struct ShortRunQuantities {
  double price_index_1, price_index_2;
  double wage_1, wage_2;
  double v_1, v_2;  ///< indirect utilities including the shared constant
  double profit_tilde_1, profit_tilde_2;
};

/// Assembles prices, wages, quality-zero profits and utilities region by
/// region. The quality frontier is normalised to one, so research effort per
/// variety equals alpha.
inline ShortRunQuantities short_run_quantities(double z, TradeFreeness phi, const ModelParams& p,
                                               const SpilloverSpec& spec, double a_bar) {
  detail::require_share(z);
  if (!(a_bar > 0.0 && a_bar < 1.0)) throw DomainError("a_bar must lie in (0, 1)");
  const double f = phi.value();
  const double effort = p.alpha;
  const double z1 = z, z2 = 1.0 - z;
  const double A1 = z1 * a_bar / effort, A2 = z2 * a_bar / effort;
  const double hl = 0.5 * p.lambda;
  const double markup = p.beta * p.sigma / (p.sigma - 1.0);
  const double expo = 1.0 / (1.0 - p.sigma);

  ShortRunQuantities q{};
  q.price_index_1 = markup * std::pow(A1 + f * A2, expo);
  q.price_index_2 = markup * std::pow(A2 + f * A1, expo);
  q.profit_tilde_1 = p.mu / p.sigma * ((hl + z1) / (A1 + f * A2) + f * (hl + z2) / (f * A1 + A2));
  q.profit_tilde_2 = p.mu / p.sigma * ((hl + z2) / (A2 + f * A1) + f * (hl + z1) / (f * A2 + A1));

  const double Phi1 = a_bar / p.delta * spillover_F(spec, z1, phi, p);
  const double Phi2 = a_bar / p.delta * spillover_F(spec, z2, phi, p);
  const double s1 = z1 * a_bar, s2 = z2 * a_bar;
  q.wage_1 = p.mu / p.sigma * Phi1 * p.delta * ((hl + z1) / (s1 + f * s2) + f * (hl + z2) / (f * s1 + s2));
  q.wage_2 = p.mu / p.sigma * Phi2 * p.delta * ((hl + z2) / (s2 + f * s1) + f * (hl + z1) / (f * s2 + s1));

  const double endow = p.endowment_or_default();
  q.v_1 = q.wage_1 - p.mu * std::log(q.price_index_1) - p.mu + endow;
  q.v_2 = q.wage_2 - p.mu * std::log(q.price_index_2) - p.mu + endow;
  return q;
}

}  // namespace qladder
