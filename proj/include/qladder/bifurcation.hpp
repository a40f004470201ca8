#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qladder/equilibrium.hpp"
#include "qladder/errors.hpp"
#include "qladder/model.hpp"
#include "qladder/parallel.hpp"
#include "qladder/params.hpp"
#include "qladder/quality.hpp"
#include "qladder/roots.hpp"

namespace qladder {

enum class Criticality { Supercritical, Subcritical, Degenerate };
enum class EventKind { Pitchfork, Fold };

inline const char* to_string(Criticality c) {
  switch (c) {
    case Criticality::Supercritical: return "supercritical";
    case Criticality::Subcritical: return "subcritical";
    default: return "degenerate";
  }
}
inline const char* to_string(EventKind k) { return k == EventKind::Pitchfork ? "pitchfork" : "fold"; }

inline constexpr double kCriticalityTol = 1e-10;

inline Criticality criticality_from(double value) {
  if (value < -kCriticalityTol) return Criticality::Supercritical;
  if (value > kCriticalityTol) return Criticality::Subcritical;
  return Criticality::Degenerate;
}

// ---------------------------------------------------------------------------
// Pitchfork criticality (linear spillover)

/// Cubic coefficient of the symmetric pitchfork up to a positive factor:
/// negative means supercritical.
inline double criticality_value(const ModelParams& p, double phi_b) {
  const double f = phi_b;
  return p.sigma * (f - 1.0) * (f - 1.0) * (f + 1.0) -
         3.0 * p.gamma * (p.sigma - 1.0) * (p.b * (f + 1.0) * (f + 1.0) - f * f - 1.0) *
             (p.lambda * (f - 1.0) + 2.0 * f);
}

struct CriticalityReport {
  double varsigma;
  Criticality criticality;
  double b_star;
  double gamma_tilde;
  /// Jointly equivalent to a supercritical pitchfork when b < b_hat(phi_b).
  bool lambda_condition;
  bool gamma_condition;
  bool b_condition;
};

inline CriticalityReport criticality_sigma(const ModelParams& p, double phi_b) {
  if (!(phi_b > 0.0 && phi_b < 1.0)) throw DomainError("break point must lie in (0, 1)");
  if (std::abs(symmetric_break_condition(p, phi_b)) > 1e-6)
    throw PreconditionError("phi = " + std::to_string(phi_b) + " is not a break point");
  const double f = phi_b;
  CriticalityReport r{};
  r.varsigma = criticality_value(p, f);
  r.criticality = criticality_from(r.varsigma);
  r.b_star = b_star(p, f);
  const double m = p.lambda * (f - 1.0) + 2.0 * f;
  r.gamma_tilde = -p.sigma * (f - 1.0) * (f - 1.0) * (f + 1.0) / (3.0 * (p.sigma - 1.0) * (f * f + 1.0) * m);
  r.lambda_condition = p.lambda > 2.0 * f / (1.0 - f);
  r.gamma_condition = p.gamma > r.gamma_tilde;
  r.b_condition = p.b < r.b_star;
  return r;
}

// ---------------------------------------------------------------------------
// Branch tracing

struct BranchPoint {
  double phi;
  double z_star;
  bool stable;
  double tangent_dz_dphi;
};

struct Branch {
  int id = 0;
  EquilibriumKind kind = EquilibriumKind::AsymmetricDispersion;
  std::vector<BranchPoint> points;
};

struct BifurcationEvent {
  EventKind kind;
  double phi;
  double z_star;
  std::optional<Criticality> criticality;  ///< pitchforks only
  double varsigma = std::numeric_limits<double>::quiet_NaN();  ///< linear spillover only
  double third_derivative = std::numeric_limits<double>::quiet_NaN();
  double dphi_ds = std::numeric_limits<double>::quiet_NaN();  ///< folds only
};

struct BifurcationDiagram {
  std::vector<Branch> branches;
  std::vector<BifurcationEvent> events;
  std::vector<std::string> warnings;
};

class ContinuationError : public std::runtime_error {
 public:
  ContinuationError(const std::string& what, std::vector<BranchPoint> partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const std::vector<BranchPoint>& partial() const noexcept { return partial_; }

 private:
  std::vector<BranchPoint> partial_;
};

struct TraceOptions {
  double ds_initial = 1e-3;
  double ds_min = 1e-9;
  int seed_grid = 200;           ///< phi lines scanned for branch seeds
  int scan_cells = 2048;         ///< z cells per seed line
  double z_margin = 1e-4;        ///< closest approach to z = 1/2 before snapping to the pitchfork
  std::size_t max_points = 500000;
};

namespace detail {

// Interior equilibria satisfy delta_v(z) = 0 with z != 1/2. Dividing out the
// trivial factor removes the symmetric line from the zero set so that the
// continuation cannot slide onto it.
class ReducedField {
 public:
  ReducedField(const ModelParams& p, const SpilloverSpec& spec) : p_(p), spec_(spec) {}

  double dv(double z, double phi) const { return delta_v(z, TradeFreeness(phi), p_, spec_); }
  double operator()(double z, double phi) const { return dv(z, phi) / (z - 0.5); }

  std::array<double, 2> grad(double z, double phi) const {
    const double hz = 1e-6, hp = std::min({1e-6, 0.5 * phi, 0.5 * (1.0 - phi)});
    double gz;
    if (z + hz <= 1.0) {
      gz = ((*this)(z + hz, phi) - (*this)(z - hz, phi)) / (2.0 * hz);
    } else {
      gz = (3.0 * (*this)(z, phi) - 4.0 * (*this)(z - hz, phi) + (*this)(z - 2.0 * hz, phi)) / (2.0 * hz);
    }
    const double gp = ((*this)(z, phi + hp) - (*this)(z, phi - hp)) / (2.0 * hp);
    return {gz, gp};
  }

  /// d(delta_v)/dz: closed form for the linear spillover, stencil otherwise.
  double slope(double z, double phi) const {
    if (is_linear(spec_)) return delta_v_prime(z, TradeFreeness(phi), p_, spec_);
    const double h = std::min({1e-4, 0.25 * z, 0.25 * (1.0 - z)});
    if (h < 1e-4) return delta_v_prime_numeric(z, TradeFreeness(phi), p_, spec_);
    return (dv(z - 2 * h, phi) - 8.0 * dv(z - h, phi) + 8.0 * dv(z + h, phi) - dv(z + 2 * h, phi)) / (12.0 * h);
  }

 private:
  const ModelParams& p_;
  const SpilloverSpec& spec_;
};

struct ArcPoint {
  double z, phi;
  double tz, tphi;  // unit tangent
};

inline std::array<double, 2> unit_tangent(const std::array<double, 2>& g) {
  const double n = std::hypot(g[0], g[1]);
  return {-g[1] / n, g[0] / n};
}

// Newton on {R = 0, t . (X - Xp) = 0}.
inline std::optional<ArcPoint> correct(const ReducedField& R, double zp, double pp, double tz, double tp,
                                       double phi_lo, double phi_hi) {
  double z = zp, f = pp;
  for (int it = 0; it < 15; ++it) {
    if (!(z > 0.5 && z <= 1.0 && f > 0.0 && f < 1.0)) return std::nullopt;
    const double r = R(z, f);
    const auto g = R.grad(z, f);
    const double c = tz * (z - zp) + tp * (f - pp);
    const double det = g[0] * tp - g[1] * tz;
    if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
    const double dz = (r * tp - g[1] * c) / det;
    const double df = (g[0] * c - r * tz) / det;
    z -= dz;
    f -= df;
    if (std::hypot(dz, df) < 1e-11 || (std::hypot(dz, df) < 1e-8 && std::abs(R.dv(z, f)) < 1e-14)) {
      if (!(z > 0.5 && z <= 1.0 && f >= phi_lo - 1e-12 && f <= phi_hi + 1e-12)) return std::nullopt;
      const auto t = unit_tangent(R.grad(z, f));
      return ArcPoint{z, f, t[0], t[1]};
    }
  }
  return std::nullopt;
}

template <class F>
std::optional<double> newton_1d(F&& f, double x, double lo, double hi, double h = 1e-7) {
  for (int it = 0; it < 60; ++it) {
    const double fx = f(x);
    const double xa = std::max(lo, x - h), xb = std::min(hi, x + h);
    const double d = (f(xb) - f(xa)) / (xb - xa);
    if (d == 0.0 || !std::isfinite(d)) return std::nullopt;
    const double step = fx / d;
    x = std::clamp(x - step, lo, hi);
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(x))) return x;
  }
  return std::abs(f(x)) < 1e-12 ? std::optional<double>(x) : std::nullopt;
}

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

}  // namespace detail

/// Pitchforks of the symmetric equilibrium on [phi_lo, phi_hi]: sign changes
/// of delta_v'(1/2) in phi. For the linear spillover every root must coincide
/// with a closed-form break point to 1e-8.
inline std::vector<BifurcationEvent> detect_pitchforks(const ModelParams& p, const SpilloverSpec& spec,
                                                       double phi_lo, double phi_hi) {
  auto slope = [&](double f) { return symmetric_slope(TradeFreeness(f), p, spec); };
  std::vector<double> roots = scan_roots(slope, phi_lo, phi_hi, 4000, 1e-15);
  std::vector<BifurcationEvent> out;
  const BreakPoints closed = is_linear(spec) ? break_points_closed(p) : BreakPoints{};
  for (double r : roots) {
    BifurcationEvent e{EventKind::Pitchfork, r, 0.5, std::nullopt};
    e.third_derivative = delta_v_third_at_half(TradeFreeness(r), p, spec);
    if (is_linear(spec)) {
      std::optional<double> match;
      for (auto c : {closed.phi_b1, closed.phi_b2})
        if (c && std::abs(*c - r) < 1e-8) match = c;
      if (!match)
        throw ConsistencyError("numeric break point " + std::to_string(r) + " has no closed-form counterpart");
      e.phi = *match;
      const auto crit = criticality_sigma(p, e.phi);
      e.varsigma = crit.varsigma;
      e.criticality = crit.criticality;
    } else {
      e.criticality = criticality_from(e.third_derivative);
    }
    out.push_back(e);
  }
  return out;
}

/// Roots in phi of delta_v(1; phi): where agglomeration gains or loses stability.
inline std::vector<double> detect_sustain_points(const ModelParams& p, const SpilloverSpec& spec, double phi_lo,
                                                 double phi_hi) {
  auto pull = [&](double f) { return delta_v(1.0, TradeFreeness(f), p, spec); };
  return scan_roots(pull, phi_lo, phi_hi, 4000, 1e-15);
}

namespace detail {

struct TraceContext {
  const ModelParams& p;
  const SpilloverSpec& spec;
  ReducedField R;
  double lo, hi, step;
  const TraceOptions& opt;
  const std::vector<BifurcationEvent>& pitchforks;
  std::vector<BifurcationEvent> folds;
};

inline BranchPoint make_point(const TraceContext& c, double z, double phi, double tz, double tp) {
  const double d = c.R.slope(std::min(z, 1.0 - 1e-12), phi);
  return {phi, z, d < -kStabilityTol, tp != 0.0 ? tz / tp : std::copysign(INFINITY, tz)};
}

// Locates the fold between two accepted arc points by bisecting the arc
// length on the sign of the tangent's phi component.
inline void locate_fold(TraceContext& c, const ArcPoint& a, double ds_ab) {
  double lo = 0.0, hi = ds_ab;
  std::optional<ArcPoint> best;
  for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto q = correct(c.R, a.z + mid * a.tz, a.phi + mid * a.tphi, a.tz, a.tphi, 0.0, 1.0);
    if (!q) break;
    if (q->tz * a.tz + q->tphi * a.tphi < 0.0) {
      q->tz = -q->tz;
      q->tphi = -q->tphi;
    }
    best = q;
    if ((q->tphi > 0.0) == (a.tphi > 0.0)) lo = mid; else hi = mid;
  }
  if (!best) return;
  // Inside the snapping band around the pitchfork the reduced field is
  // dominated by round-off; a turn there is the pitchfork itself.
  if (best->z < 0.5 + 10.0 * c.opt.z_margin) return;
  BifurcationEvent e{EventKind::Fold, best->phi, best->z, std::nullopt};
  e.dphi_ds = best->tphi;
  c.folds.push_back(e);
}

enum class Stop { Pitchfork, Sustain, RangeEdge };

// Finishes a half-branch on the boundary that the predictor keeps crossing.
inline std::optional<BranchPoint> close_branch(const TraceContext& c, const ArcPoint& x, Stop why,
                                               bool last_stable) {
  switch (why) {
    case Stop::Pitchfork: {
      double best = std::numeric_limits<double>::quiet_NaN(), dist = 1e-3;
      for (const auto& e : c.pitchforks)
        if (std::abs(e.phi - x.phi) < dist) {
          dist = std::abs(e.phi - x.phi);
          best = e.phi;
        }
      if (std::isnan(best)) return std::nullopt;
      return BranchPoint{best, 0.5, last_stable, 0.0};
    }
    case Stop::Sustain: {
      auto pull = [&](double f) { return c.R.dv(1.0, f); };
      auto f = newton_1d(pull, x.phi, std::max(c.lo, 1e-12), std::min(c.hi, 1.0 - 1e-12));
      if (!f) return std::nullopt;
      return BranchPoint{*f, 1.0, last_stable, x.tphi != 0.0 ? x.tz / x.tphi : INFINITY};
    }
    case Stop::RangeEdge: {
      const double edge = (x.phi - c.lo < c.hi - x.phi) ? c.lo : c.hi;
      auto g = [&](double z) { return c.R(z, edge); };
      auto z = newton_1d(g, x.z, 0.5 + 1e-9, 1.0);
      if (!z) return std::nullopt;
      auto pt = make_point(c, *z, edge, x.tz, x.tphi);
      return pt;
    }
  }
  return std::nullopt;
}

// Follows the zero curve of the reduced field from x in the direction of its
// tangent until it leaves the admissible box.
inline std::vector<BranchPoint> trace_half(TraceContext& c, ArcPoint x) {
  std::vector<BranchPoint> pts;
  double ds = c.opt.ds_initial;
  const double z_floor = 0.5 + c.opt.z_margin;
  while (true) {
    if (pts.size() > c.opt.max_points) throw ContinuationError("branch exceeded the point budget", pts);
    const double zp = x.z + ds * x.tz, pp = x.phi + ds * x.tphi;
    std::optional<Stop> leaving;
    if (zp < z_floor) leaving = Stop::Pitchfork;
    else if (zp > 1.0) leaving = Stop::Sustain;
    else if (pp < c.lo || pp > c.hi) leaving = Stop::RangeEdge;
    if (leaving) {
      if (ds > 1e-8) {
        ds *= 0.5;
        continue;
      }
      const bool last = pts.empty() ? make_point(c, x.z, x.phi, x.tz, x.tphi).stable : pts.back().stable;
      if (auto end = close_branch(c, x, *leaving, last)) pts.push_back(*end);
      return pts;
    }
    auto q = correct(c.R, zp, pp, x.tz, x.tphi, c.lo, c.hi);
    if (q) {
      if (q->tz * x.tz + q->tphi * x.tphi < 0.0) {
        q->tz = -q->tz;
        q->tphi = -q->tphi;
      }
      // Reject corrector jumps onto a neighbouring curve.
      if (q->tz * x.tz + q->tphi * x.tphi < 0.9 || std::hypot(q->z - zp, q->phi - pp) > ds) q.reset();
    }
    if (!q) {
      ds *= 0.5;
      if (ds < c.opt.ds_min) throw ContinuationError("continuation stagnated near phi = " + std::to_string(x.phi) +
                                                         ", z = " + std::to_string(x.z), pts);
      continue;
    }
    if ((q->tphi > 0.0) != (x.tphi > 0.0) && x.tphi != 0.0) locate_fold(c, x, ds);
    x = *q;
    pts.push_back(make_point(c, x.z, x.phi, x.tz, x.tphi));
    ds = std::min(ds * 1.5, c.step);
  }
}

inline std::vector<BranchPoint> trace_curve(TraceContext& c, double z0, double phi0) {
  const auto t = unit_tangent(c.R.grad(z0, phi0));
  ArcPoint start{z0, phi0, t[0], t[1]};
  auto fwd = trace_half(c, start);
  ArcPoint back = start;
  back.tz = -back.tz;
  back.tphi = -back.tphi;
  auto bwd = trace_half(c, back);
  std::vector<BranchPoint> curve(bwd.rbegin(), bwd.rend());
  curve.push_back(make_point(c, z0, phi0, t[0], t[1]));
  curve.insert(curve.end(), fwd.begin(), fwd.end());
  // Orient by increasing phi at the start for readability.
  if (curve.size() > 1 && curve.front().phi > curve.back().phi) std::reverse(curve.begin(), curve.end());
  return curve;
}

inline bool on_curve(const std::vector<BranchPoint>& curve, double phi, double z, double tol) {
  for (std::size_t i = 0; i + 1 < curve.size(); ++i)
    if (segment_distance(phi, z, curve[i].phi, curve[i].z_star, curve[i + 1].phi, curve[i + 1].z_star) < tol)
      return true;
  return curve.size() == 1 && std::hypot(phi - curve[0].phi, z - curve[0].z_star) < tol;
}

}  // namespace detail

/// Equilibrium branches over phi in [phi_lo, phi_hi] with pitchfork and fold
/// events. Asymmetric branches are continued in arc length on the reduced
/// field delta_v / (z - 1/2), so they pass through folds; `step` caps the arc
/// step and sets the sampling of the symmetric and agglomeration branches.
inline BifurcationDiagram trace_branches(const ModelParams& p, const SpilloverSpec& spec, double phi_lo,
                                         double phi_hi, double step = 1e-3, const TraceOptions& opt = {}) {
  p.validate();
  if (!(phi_lo > 0.0 && phi_hi < 1.0 && phi_lo < phi_hi)) throw DomainError("phi range must lie inside (0, 1)");
  if (!(step > 0.0)) throw DomainError("step must be positive");

  BifurcationDiagram out;
  const auto pitchforks = detect_pitchforks(p, spec, phi_lo, phi_hi);
  const auto sustains = detect_sustain_points(p, spec, phi_lo, phi_hi);
  detail::TraceContext ctx{p, spec, detail::ReducedField(p, spec), phi_lo, phi_hi, step, opt, pitchforks, {}};

  // Seeds: next to each pitchfork, next to each sustain point, then a grid.
  std::vector<std::pair<double, double>> seeds;  // (z, phi)
  for (const auto& e : pitchforks) {
    const double z = 0.5 + 1e-3;
    auto f = detail::newton_1d([&](double ph) { return ctx.R(z, ph); }, e.phi, phi_lo, phi_hi);
    if (f) seeds.emplace_back(z, *f);
  }
  for (double s : sustains) {
    const double z = 1.0 - 1e-4;
    auto f = detail::newton_1d([&](double ph) { return ctx.R(z, ph); }, s, phi_lo, phi_hi);
    if (f) seeds.emplace_back(z, *f);
  }
  for (int k = 0; k < opt.seed_grid; ++k) {
    const double f = phi_lo + (phi_hi - phi_lo) * (k + 0.5) / opt.seed_grid;
    auto dv = [&](double z) { return ctx.R.dv(z, f); };
    for (double z : scan_roots(dv, 0.5 + 1e-6, 1.0 - 1e-9, opt.scan_cells, 1e-13)) seeds.emplace_back(z, f);
  }

  std::vector<std::vector<BranchPoint>> curves;
  for (const auto& [z, f] : seeds) {
    bool known = false;
    for (const auto& c : curves) known = known || detail::on_curve(c, f, z, 1e-3);
    if (known) continue;
    curves.push_back(detail::trace_curve(ctx, z, f));
  }

  int id = 0;
  // Symmetric branch sampled on the step grid plus the pitchfork locations.
  {
    Branch b{id++, EquilibriumKind::SymmetricDispersion, {}};
    std::vector<double> phis;
    for (double f = phi_lo; f <= phi_hi + 1e-12; f += step) phis.push_back(std::min(f, phi_hi));
    for (const auto& e : pitchforks) phis.push_back(e.phi);
    std::sort(phis.begin(), phis.end());
    phis.erase(std::unique(phis.begin(), phis.end()), phis.end());
    for (double f : phis)
      b.points.push_back({f, 0.5, symmetric_slope(TradeFreeness(f), p, spec) < -kStabilityTol, 0.0});
    out.branches.push_back(std::move(b));
  }
  // Agglomeration: contiguous phi intervals where delta_v(1) >= 0, at z = 1 and z = 0.
  {
    std::vector<double> phis;
    for (double f = phi_lo; f <= phi_hi + 1e-12; f += step) phis.push_back(std::min(f, phi_hi));
    phis.insert(phis.end(), sustains.begin(), sustains.end());
    std::sort(phis.begin(), phis.end());
    std::vector<std::vector<BranchPoint>> segments;
    bool open = false;
    for (double f : phis) {
      const double pull = ctx.R.dv(1.0, f);
      const bool on_sustain = std::find(sustains.begin(), sustains.end(), f) != sustains.end();
      if (pull >= 0.0 || on_sustain) {
        if (!open) segments.emplace_back();
        open = true;
        segments.back().push_back({f, 1.0, pull > kStabilityTol, 0.0});
        if (on_sustain && segments.back().size() > 1) open = false;
      } else {
        open = false;
      }
    }
    for (auto& seg : segments) {
      Branch up{id++, EquilibriumKind::Agglomeration, seg};
      Branch down{id++, EquilibriumKind::Agglomeration, seg};
      for (auto& pt : down.points) pt.z_star = 0.0;
      out.branches.push_back(std::move(up));
      out.branches.push_back(std::move(down));
    }
  }
  for (auto& c : curves) {
    Branch up{id++, EquilibriumKind::AsymmetricDispersion, c};
    Branch down{id++, EquilibriumKind::AsymmetricDispersion, c};
    for (auto& pt : down.points) {
      pt.z_star = 1.0 - pt.z_star;
      pt.tangent_dz_dphi = -pt.tangent_dz_dphi;
    }
    out.branches.push_back(std::move(up));
    out.branches.push_back(std::move(down));
  }

  out.events = pitchforks;
  out.events.insert(out.events.end(), ctx.folds.begin(), ctx.folds.end());
  std::sort(out.events.begin(), out.events.end(), [](const auto& a, const auto& b) { return a.phi < b.phi; });
  for (const auto& e : out.events)
    if (e.criticality == Criticality::Degenerate)
      out.warnings.push_back("degenerate pitchfork at phi = " + std::to_string(e.phi));
  return out;
}

// ---------------------------------------------------------------------------
// Quasi-static path of the economy as phi rises

struct PathPoint {
  double phi;
  double z;
};

struct PathJump {
  double phi;
  double z_from, z_to;
};

struct StablePath {
  std::vector<PathPoint> points;
  std::vector<PathJump> jumps;
};

/// Where the migration flow started at z settles, given the equilibria at phi.
/// An unstable starting equilibrium is nudged toward the upper region.
inline double settle(double z, TradeFreeness phi, const ModelParams& p, const SpilloverSpec& spec) {
  const auto eqs = find_equilibria(p, phi, spec);
  for (const auto& e : eqs)
    if (std::abs(e.z_star - z) < 1e-12) {
      if (e.stability != Stability::Unstable) return e.z_star;
      z = (z >= 1.0) ? z - 1e-7 : z + 1e-7;
      break;
    }
  auto dv = [&](double x) { return delta_v(x, phi, p, spec); };
  const double drift = dv(z);
  // Roots within round-off of 1/2 can be misplaced by the scan; fall back to
  // a bracketed root whenever the listed target is inconsistent with the drift.
  if (drift > 0.0) {
    for (const auto& e : eqs)
      if (e.z_star > z) return e.z_star;
    return dv(1.0) >= 0.0 ? 1.0 : refine_root(dv, z, 1.0);
  }
  for (auto it = eqs.rbegin(); it != eqs.rend(); ++it)
    if (it->z_star < z) return it->z_star;
  return dv(0.0) <= 0.0 ? 0.0 : refine_root(dv, 0.0, z);
}

/// Follows the stable state from symmetric dispersion along n equally spaced
/// phi values. Transitions wider than 1e-2 are bisected in phi down to a
/// width of 1e-7 (the square-root opening of a pitchfork is then below 1e-3);
/// those that do not close up are reported as jumps.
inline StablePath follow_stable_path(const ModelParams& p, const SpilloverSpec& spec, double phi_lo, double phi_hi,
                                     int n) {
  StablePath path;
  double z = 0.5;
  for (int k = 0; k < n; ++k) {
    const double f = n == 1 ? phi_lo : phi_lo + (phi_hi - phi_lo) * k / (n - 1);
    const double z_new = settle(z, TradeFreeness(f), p, spec);
    if (!path.points.empty() && std::abs(z_new - z) > 1e-2) {
      double a = path.points.back().phi, b = f, za = z, zb = z_new;
      for (int it = 0; it < 60 && b - a > 1e-7; ++it) {
        const double m = 0.5 * (a + b);
        const double zm = settle(za, TradeFreeness(m), p, spec);
        if (std::abs(zm - za) < std::abs(zb - zm)) {
          a = m;
          za = zm;
        } else {
          b = m;
          zb = zm;
        }
      }
      if (std::abs(zb - za) > 1e-3) path.jumps.push_back({0.5 * (a + b), za, zb});
    }
    z = z_new;
    path.points.push_back({f, z});
  }
  return path;
}

// ---------------------------------------------------------------------------
// Stability regions in (phi, b)

enum RegionBit : std::uint8_t {
  kAgglomerationStable = 1,
  kSymmetricStable = 2,
  kAsymmetricStable = 4,
};

/// Stability label of one (phi, b) cell. Corner and symmetric stability use
/// the closed-form conditions for the linear spillover; asymmetric stability
/// always comes from located equilibria.
inline std::uint8_t region_label(const ModelParams& p, double phi, const SpilloverSpec& spec) {
  std::uint8_t mask = 0;
  const TradeFreeness tf(phi);
  const auto eqs = find_equilibria(p, tf, spec);
  if (is_linear(spec)) {
    if (agglomeration_condition(p, phi) > kStabilityTol) mask |= kAgglomerationStable;
    if (symmetric_break_condition(p, phi) < 0.0) mask |= kSymmetricStable;
  } else {
    for (const auto& e : eqs) {
      if (!e.stable()) continue;
      if (e.kind == EquilibriumKind::Agglomeration) mask |= kAgglomerationStable;
      if (e.kind == EquilibriumKind::SymmetricDispersion) mask |= kSymmetricStable;
    }
  }
  for (const auto& e : eqs)
    if (e.kind == EquilibriumKind::AsymmetricDispersion && e.stable()) mask |= kAsymmetricStable;
  return mask;
}

struct RegionRaster {
  std::vector<double> phis;
  std::vector<double> bs;
  std::vector<std::uint8_t> mask;  ///< row-major, index = j * phis.size() + i for (phis[i], bs[j])

  std::uint8_t at(std::size_t i, std::size_t j) const { return mask[j * phis.size() + i]; }
  /// Cells whose label contains every bit of `bits`.
  std::size_t count(std::uint8_t bits) const {
    return static_cast<std::size_t>(
        std::count_if(mask.begin(), mask.end(), [bits](std::uint8_t m) { return (m & bits) == bits; }));
  }
};

/// Cell centres of n equal cells on [lo, hi].
inline std::vector<double> cell_centres(std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return v;
}

inline RegionRaster stability_regions(const ModelParams& base, const std::vector<double>& grid_phi,
                                      const std::vector<double>& grid_b, const SpilloverSpec& spec,
                                      unsigned threads = 1) {
  RegionRaster r{grid_phi, grid_b, std::vector<std::uint8_t>(grid_phi.size() * grid_b.size(), 0)};
  parallel_for(r.mask.size(), threads, [&](std::size_t k) {
    ModelParams p = base;
    p.b = grid_b[k / grid_phi.size()];
    r.mask[k] = region_label(p, grid_phi[k % grid_phi.size()], spec);
  });
  return r;
}

// ---------------------------------------------------------------------------
// Growth across equilibria

struct GrowthEntry {
  Equilibrium eq;
  double g;
  double a_bar;
};

struct GrowthReport {
  std::vector<GrowthEntry> entries;
  double max_g, min_a_bar;
  bool stable_attains_max_g;
  bool stable_attains_min_a_bar;
};

inline GrowthReport growth_at_stable(const ModelParams& p, TradeFreeness phi, const SpilloverSpec& spec) {
  GrowthReport r{};
  for (const auto& e : find_equilibria(p, phi, spec)) {
    const auto ss = steady_state(e.z_star, phi, p, spec);
    r.entries.push_back({e, ss.g, ss.a_bar});
  }
  r.max_g = -INFINITY;
  r.min_a_bar = INFINITY;
  double stable_max_g = -INFINITY, stable_min_a = INFINITY;
  for (const auto& x : r.entries) {
    r.max_g = std::max(r.max_g, x.g);
    r.min_a_bar = std::min(r.min_a_bar, x.a_bar);
    if (x.eq.stable()) {
      stable_max_g = std::max(stable_max_g, x.g);
      stable_min_a = std::min(stable_min_a, x.a_bar);
    }
  }
  r.stable_attains_max_g = stable_max_g == r.max_g;
  r.stable_attains_min_a_bar = stable_min_a == r.min_a_bar;
  return r;
}

}  // namespace qladder
