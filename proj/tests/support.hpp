#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "qladder/params.hpp"

namespace qladder::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// A valid parameter point for the linear spillover.
inline ModelParams random_params(std::mt19937_64& rng) {
  ModelParams p;
  p.lambda = uniform(rng, 0.2, 8.0);
  p.gamma = uniform(rng, 0.2, 3.0);
  p.sigma = uniform(rng, 1.2, 15.0);
  p.b = uniform(rng, 0.02, 0.98);
  p.mu = uniform(rng, 0.2, 2.0);
  p.delta = uniform(rng, 1.05, 3.0);
  p.alpha = uniform(rng, 0.3, 3.0);
  return p;
}

inline ModelParams with(double lambda, double gamma, double sigma, double b) {
  ModelParams p;
  p.lambda = lambda;
  p.gamma = gamma;
  p.sigma = sigma;
  p.b = b;
  return p;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace qladder::testing

namespace qladder::testing {

/// Plain bisection, kept separate from the library's root finders.
template <class F>
double bisect_oracle(F&& f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// All sign changes of f on a uniform grid over [lo, hi], each bisected.
template <class F>
std::vector<double> grid_roots(F&& f, double lo, double hi, int cells) {
  std::vector<double> out;
  double x0 = lo, f0 = f(lo);
  for (int i = 1; i <= cells; ++i) {
    const double x1 = lo + (hi - lo) * i / cells;
    const double f1 = f(x1);
    if (f0 == 0.0) out.push_back(x0);
    else if ((f0 > 0.0) != (f1 > 0.0) && f1 != 0.0) out.push_back(bisect_oracle(f, x0, x1));
    x0 = x1;
    f0 = f1;
  }
  return out;
}

}  // namespace qladder::testing
