#pragma once

#include <cmath>
#include <optional>
#include <vector>

namespace qladder {

/// Bisection on a bracket [lo, hi] with f(lo) and f(hi) of opposite sign
/// (or one of them zero). Stops once the bracket is narrower than xtol.
template <class F>
double bisect(F&& f, double lo, double hi, double xtol = 1e-13) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  double fhi = f(hi);
  if (fhi == 0.0) return hi;
  for (int it = 0; it < 400 && std::abs(hi - lo) > xtol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Bisection followed by a few secant polish steps kept inside the bracket.
/// Converges to the limiting accuracy of f even when xtol is generous.
template <class F>
double refine_root(F&& f, double lo, double hi, double xtol = 1e-14) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  for (int it = 0; it < 200; ++it) {
    // Illinois-style regula falsi with a bisection fallback every other step.
    double x = (it % 2 == 0) ? lo - flo * (hi - lo) / (fhi - flo) : 0.5 * (lo + hi);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    const double fx = f(x);
    if (fx == 0.0) return x;
    if ((fx < 0.0) == (flo < 0.0)) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
      fhi = fx;
    }
    if (hi - lo <= xtol * std::max(1.0, std::abs(x))) break;
  }
  return std::abs(flo) < std::abs(fhi) ? lo : hi;
}

/// Scans [lo, hi] on n uniform cells and returns every bracketed sign change,
/// refined to xtol. Exact zeros at grid nodes are reported once.
template <class F>
std::vector<double> scan_roots(F&& f, double lo, double hi, int n, double xtol = 1e-13) {
  std::vector<double> roots;
  const double h = (hi - lo) / n;
  double x0 = lo, f0 = f(lo);
  if (f0 == 0.0) roots.push_back(lo);
  for (int i = 1; i <= n; ++i) {
    const double x1 = (i == n) ? hi : lo + i * h;
    const double f1 = f(x1);
    if (f1 == 0.0) {
      roots.push_back(x1);
    } else if (f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0)) {
      roots.push_back(refine_root(f, x0, x1, xtol));
    }
    x0 = x1;
    f0 = f1;
  }
  return roots;
}

}  // namespace qladder
