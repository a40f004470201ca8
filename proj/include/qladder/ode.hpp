#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace qladder {

template <std::size_t N>
using Vec = std::array<double, N>;

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double initial_step = 0.0;  ///< 0 picks a step from the span
  double max_step = 0.0;      ///< 0 means unbounded
  std::size_t max_steps = 2'000'000;
};

/// Thrown when the adaptive step collapses below round-off. Carries the last
/// accepted state so callers can inspect or resume.
template <std::size_t N>
class StepSizeUnderflow : public std::runtime_error {
 public:
  StepSizeUnderflow(double t, const Vec<N>& y)
      : std::runtime_error("integrator step size underflow at t = " + std::to_string(t)),
        t_(t),
        y_(y) {}
  double time() const noexcept { return t_; }
  const Vec<N>& state() const noexcept { return y_; }

 private:
  double t_;
  Vec<N> y_;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double t_end = 0.0;
  bool stopped_early = false;
};

/// Dormand-Prince 5(4) with FSAL and local extrapolation.
///
/// `rhs(t, y) -> Vec<N>`; `project(y)` may modify the state after each
/// accepted step (used for clamping); `observe(t, y) -> bool` is called on
/// every accepted step and stops the integration when it returns false.
template <std::size_t N, class Rhs, class Project, class Observe>
OdeStats integrate_dopri(Rhs&& rhs, Vec<N>& y, double t0, double t1, const OdeOptions& opt,
                         Project&& project, Observe&& observe) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  OdeStats stats;
  double t = t0;
  const double span = t1 - t0;
  if (!(span > 0.0)) {
    stats.t_end = t;
    return stats;
  }
  double h = opt.initial_step > 0.0 ? opt.initial_step : 1e-3 * span;
  if (opt.max_step > 0.0) h = std::min(h, opt.max_step);

  auto axpy = [](const Vec<N>& base, double hh, std::initializer_list<std::pair<double, const Vec<N>*>> terms) {
    Vec<N> out = base;
    for (std::size_t i = 0; i < N; ++i) {
      double acc = 0.0;
      for (const auto& [c, k] : terms) acc += c * (*k)[i];
      out[i] += hh * acc;
    }
    return out;
  };

  Vec<N> k1 = rhs(t, y);
  while (t < t1) {
    if (stats.accepted + stats.rejected >= opt.max_steps)
      throw std::runtime_error("integrator exceeded the maximum number of steps");
    if (t + h > t1) h = t1 - t;
    const double h_floor = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < h_floor) throw StepSizeUnderflow<N>(t, y);

    const Vec<N> k2 = rhs(t + c2 * h, axpy(y, h, {{a21, &k1}}));
    const Vec<N> k3 = rhs(t + c3 * h, axpy(y, h, {{a31, &k1}, {a32, &k2}}));
    const Vec<N> k4 = rhs(t + c4 * h, axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const Vec<N> k5 =
        rhs(t + c5 * h, axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const Vec<N> k6 = rhs(t + h, axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    const Vec<N> y_new = axpy(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const Vec<N> k7 = rhs(t + h, y_new);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double ei =
          h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      err += (ei / sc) * (ei / sc);
    }
    err = std::sqrt(err / static_cast<double>(N));

    if (!std::isfinite(err)) {
      ++stats.rejected;
      h *= 0.2;
      continue;
    }
    if (err <= 1.0) {
      t = (t1 - (t + h) < 1e-15 * std::max(1.0, std::abs(t1))) ? t1 : t + h;
      y = y_new;
      const Vec<N> before = y;
      project(y);
      k1 = (y == before) ? k7 : rhs(t, y);
      ++stats.accepted;
      if (!observe(t, y)) {
        stats.stopped_early = true;
        break;
      }
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= fac;
    } else {
      ++stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
    if (opt.max_step > 0.0) h = std::min(h, opt.max_step);
  }
  stats.t_end = t;
  return stats;
}

}  // namespace qladder
