#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qladder/equilibrium.hpp"
#include "support.hpp"

using namespace qladder;
using qladder::testing::bisect_oracle;
using qladder::testing::grid_roots;
using qladder::testing::random_params;
using qladder::testing::uniform;
using qladder::testing::with;

namespace {

const SpilloverSpec kLinear = LinearLocalGlobal{};
const SpilloverSpec kCoupled = TradeCoupled{};

struct Expected {
  EquilibriumKind kind;
  Stability stability;
};

// Upper half of the equilibrium set (z >= 1/2), which fixes the rest by symmetry.
std::vector<Equilibrium> upper(const std::vector<Equilibrium>& all) {
  std::vector<Equilibrium> out;
  for (const auto& e : all)
    if (e.z_star >= 0.5) out.push_back(e);
  return out;
}

void expect_pattern(const ModelParams& p, double phi, const std::vector<Expected>& want) {
  const auto eqs = find_equilibria(p, TradeFreeness(phi), kLinear);
  const auto up = upper(eqs);
  ASSERT_EQ(up.size(), want.size()) << "phi=" << phi;
  for (std::size_t i = 0; i < up.size(); ++i) {
    EXPECT_EQ(up[i].kind, want[i].kind) << "phi=" << phi << " z=" << up[i].z_star;
    EXPECT_EQ(up[i].stability, want[i].stability) << "phi=" << phi << " z=" << up[i].z_star;
    if (up[i].kind != EquilibriumKind::Agglomeration) { EXPECT_LT(up[i].residual, 1e-10); }
  }
  EXPECT_EQ(eqs.size(), 2 * want.size() - 1);
}

constexpr auto Sym = EquilibriumKind::SymmetricDispersion;
constexpr auto Asym = EquilibriumKind::AsymmetricDispersion;
constexpr auto Agg = EquilibriumKind::Agglomeration;
constexpr auto S = Stability::Stable;
constexpr auto U = Stability::Unstable;

}  // namespace

TEST(Equilibria, NearAutarkyOnlySymmetric) { expect_pattern(with(2, 1, 5, 0.342), 0.1, {{Sym, S}}); }

TEST(Equilibria, InterveningTradeGivesStableAsymmetry) {
  const auto p = with(2, 1, 5, 0.342);
  expect_pattern(p, 0.3, {{Sym, U}, {Asym, S}});
  EXPECT_NEAR(upper(find_equilibria(p, TradeFreeness(0.3), kLinear))[1].z_star, 0.9067, 5e-5);
}

TEST(Equilibria, AgglomerationWindow) { expect_pattern(with(2, 1, 5, 0.342), 0.38, {{Sym, U}, {Agg, S}}); }

TEST(Equilibria, CoexistingStableStates) {
  // Just beyond the second break point both dispersion states are stable and
  // an unstable asymmetric pair separates them.
  const auto p = with(2, 1, 5, 0.342);
  const double phi_b2 = *break_points_closed(p).phi_b2;
  expect_pattern(p, phi_b2 + 5e-4, {{Sym, S}, {Asym, U}, {Asym, S}});
  expect_pattern(with(2, 0.9, 8, 0.339), 0.4, {{Sym, S}, {Asym, U}, {Asym, S}});
}

TEST(Equilibria, FreeTradeRedisperses) { expect_pattern(with(2, 1, 5, 0.342), 0.8, {{Sym, S}}); }

TEST(Equilibria, SymmetricPointAlwaysPresent) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 100; ++k) {
    const auto p = random_params(rng);
    const auto eqs = find_equilibria(p, TradeFreeness(uniform(rng, 0.01, 0.99)), kLinear);
    int symmetric = 0;
    for (const auto& e : eqs) symmetric += e.kind == Sym && e.z_star == 0.5;
    EXPECT_EQ(symmetric, 1);
    EXPECT_TRUE(std::is_sorted(eqs.begin(), eqs.end(), [](auto& a, auto& b) { return a.z_star < b.z_star; }));
  }
}

TEST(Equilibria, AtMostTwoInUpperHalf) {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 300; ++k) {
    const auto p = random_params(rng);
    const TradeFreeness phi(uniform(rng, 0.01, 0.99));
    std::vector<Equilibrium> eqs;
    ASSERT_NO_THROW(eqs = find_equilibria(p, phi, kLinear));
    int count = 0;
    for (const auto& e : eqs) count += e.z_star > 0.5;
    EXPECT_LE(count, 2);
  }
}

TEST(Equilibria, InvariantToExpenditureShare) {
  std::mt19937_64 rng(33);
  for (int k = 0; k < 50; ++k) {
    auto p = random_params(rng);
    auto q = p;
    q.mu = p.mu * 4.0;
    const TradeFreeness phi(uniform(rng, 0.01, 0.99));
    const auto a = find_equilibria(p, phi, kLinear), b = find_equilibria(q, phi, kLinear);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a[i].z_star, b[i].z_star, 1e-9);
      EXPECT_EQ(a[i].stability, b[i].stability);
    }
  }
}

TEST(Equilibria, RootsMatchBisectionOracle) {
  std::mt19937_64 rng(34);
  for (int k = 0; k < 100; ++k) {
    const auto p = random_params(rng);
    const TradeFreeness phi(uniform(rng, 0.01, 0.99));
    auto dv = [&](double z) { return delta_v(z, phi, p, kLinear); };
    const auto oracle = grid_roots(dv, 0.5 + 1e-6, 1.0 - 1e-9, 5000);
    std::vector<double> found;
    for (const auto& e : find_equilibria(p, phi, kLinear))
      if (e.kind == Asym && e.z_star > 0.5 + 1e-6) found.push_back(e.z_star);
    ASSERT_EQ(found.size(), oracle.size());
    for (std::size_t i = 0; i < found.size(); ++i) { EXPECT_NEAR(found[i], oracle[i], 1e-9); }
  }
}

TEST(Stability, CornerUsesOutwardPull) {
  const auto p = with(2, 1, 5, 0.342);
  Equilibrium e;
  e.z_star = 1.0;
  e.kind = Agg;
  EXPECT_TRUE(classify_stability(e, p, TradeFreeness(0.38), kLinear).stable());
  EXPECT_FALSE(classify_stability(e, p, TradeFreeness(0.1), kLinear).stable());
  e.z_star = 0.0;
  EXPECT_TRUE(classify_stability(e, p, TradeFreeness(0.38), kLinear).stable());
}

TEST(Stability, IrregularAtSustainPoint) {
  const auto p = with(2, 1, 5, 0.342);
  const auto sp = sustain_points(p);
  ASSERT_TRUE(sp.phi_s1.has_value());
  Equilibrium e;
  e.z_star = 1.0;
  e.kind = Agg;
  const auto c = classify_stability(e, p, TradeFreeness(*sp.phi_s1), kLinear);
  EXPECT_FALSE(c.regular);
  EXPECT_EQ(c.stability, Stability::Undetermined);
}

TEST(BreakCondition, MatchesSymmetricSlopeSign) {
  std::mt19937_64 rng(35);
  const double h = 1e-5;
  for (int k = 0; k < 200; ++k) {
    const auto p = random_params(rng);
    const double phi = uniform(rng, 0.01, 0.99);
    const double fd = (delta_v(0.5 + h, TradeFreeness(phi), p, kLinear) -
                       delta_v(0.5 - h, TradeFreeness(phi), p, kLinear)) / (2 * h);
    const double slope = symmetric_slope(TradeFreeness(phi), p, kLinear);
    EXPECT_NEAR(slope, fd, 1e-6 * std::max(1.0, std::abs(fd)));
    if (std::abs(fd) > 1e-6) { EXPECT_EQ(symmetric_break_condition(p, phi) > 0.0, fd > 0.0); }
  }
}

TEST(BreakCondition, ThresholdWeights) {
  std::mt19937_64 rng(36);
  for (int k = 0; k < 100; ++k) {
    auto p = random_params(rng);
    const double phi = uniform(rng, 0.01, 0.99);
    p.b = b_d(p, phi);
    EXPECT_NEAR(symmetric_break_condition(p, phi), 2 * p.sigma * (1 - phi * phi), 1e-9);
    p.b = b_b(p, phi);
    EXPECT_NEAR(symmetric_break_condition(p, phi), 0.0, 1e-9);
  }
}

TEST(BreakPoints, ReferenceCase) {
  const auto bp = break_points_closed(with(2, 1, 5, 0.342));
  ASSERT_TRUE(bp.phi_b1 && bp.phi_b2);
  EXPECT_NEAR(*bp.phi_b2, 0.401031, 1e-6);
  EXPECT_TRUE(bp.b1_condition);
}

TEST(BreakPoints, ClosedFormMatchesBisection) {
  std::mt19937_64 rng(37);
  int with_roots = 0;
  for (int k = 0; k < 400; ++k) {
    const auto p = random_params(rng);
    const auto bp = break_points_closed(p);
    const auto oracle = grid_roots([&](double f) { return symmetric_break_condition(p, f); }, 1e-9, 1 - 1e-9, 20000);
    std::vector<double> closed;
    if (bp.phi_b1) closed.push_back(*bp.phi_b1);
    if (bp.phi_b2) closed.push_back(*bp.phi_b2);
    std::sort(closed.begin(), closed.end());
    ASSERT_EQ(closed.size(), oracle.size()) << "draw " << k;
    for (std::size_t i = 0; i < closed.size(); ++i) { EXPECT_NEAR(closed[i], oracle[i], 1e-8); }
    with_roots += !closed.empty();
  }
  EXPECT_GT(with_roots, 40);
}

TEST(BreakPoints, ExistenceConditionsAreSufficient) {
  std::mt19937_64 rng(38);
  int hits = 0;
  for (int k = 0; k < 20000; ++k) {
    const auto p = random_params(rng);
    const auto bp = break_points_closed(p);
    if (bp.b1_condition) {
      ++hits;
      EXPECT_TRUE(bp.phi_b1.has_value());
    }
    if (bp.b2_condition) { EXPECT_TRUE(bp.phi_b2.has_value()); }
  }
  EXPECT_GT(hits, 100);
}

TEST(BreakPoints, SingleBreakAboveHalf) {
  // With b > 1/2 dispersion is unstable beyond the first break point for good.
  const auto bp = break_points_closed(with(4, 0.9, 8, 0.55));
  EXPECT_TRUE(bp.phi_b1.has_value());
  EXPECT_FALSE(bp.phi_b2.has_value());
}

TEST(Sustain, PointsZeroTheCornerPull) {
  std::mt19937_64 rng(39);
  int found = 0;
  for (int k = 0; k < 300; ++k) {
    const auto p = random_params(rng);
    const auto sp = sustain_points(p);
    auto pull = [&](double f) { return delta_v(1.0, TradeFreeness(f), p, kLinear); };
    const auto oracle = grid_roots(pull, 1e-6, 1 - 1e-9, 20000);
    std::vector<double> closed;
    if (sp.phi_s1 && *sp.phi_s1 > 1e-6) closed.push_back(*sp.phi_s1);
    if (sp.phi_s2) closed.push_back(*sp.phi_s2);
    ASSERT_EQ(closed.size(), oracle.size()) << "draw " << k;
    for (std::size_t i = 0; i < closed.size(); ++i) { EXPECT_NEAR(closed[i], oracle[i], 1e-8); }
    found += !closed.empty();
    if (p.b > 0.5) { EXPECT_FALSE(sp.phi_s2.has_value()); }
  }
  EXPECT_GT(found, 50);
}

TEST(Sustain, ConditionIsScaledPull) {
  std::mt19937_64 rng(40);
  for (int k = 0; k < 100; ++k) {
    const auto p = random_params(rng);
    const double f = uniform(rng, 0.01, 0.99);
    EXPECT_NEAR(p.mu * agglomeration_condition(p, f), delta_v(1.0, TradeFreeness(f), p, kLinear), 1e-12);
    auto q = p;
    q.b = b_s(p, f);
    EXPECT_NEAR(agglomeration_condition(q, f), -std::log(f) / (p.sigma - 1), 1e-12);
  }
}

TEST(Sustain, PeakMaximisesCondition) {
  const auto p = with(2, 1, 5, 0.342);
  const double peak = agglomeration_peak(p);
  const double h = 1e-5;
  EXPECT_NEAR((agglomeration_condition(p, peak + h) - agglomeration_condition(p, peak - h)) / (2 * h), 0.0, 1e-8);
  EXPECT_GT(agglomeration_condition(p, peak), agglomeration_condition(p, peak * 0.9));
}

TEST(Sustain, AutarkyNeverSustains) {
  const auto p = with(2, 1, 5, 0.342);
  EXPECT_LT(agglomeration_condition(p, 1e-12), -1e3);
}

TEST(Asymmetric, LambdaStarRoundTrips) {
  std::mt19937_64 rng(41);
  int used = 0;
  for (int k = 0; k < 2000 && used < 300; ++k) {
    auto p = random_params(rng);
    const double z = uniform(rng, 0.51, 0.99);
    const double phi = uniform(rng, 0.01, 0.99);
    const double l = lambda_star(z, phi, p);
    if (!(l > 0.0 && l < 1e3)) continue;
    ++used;
    p.lambda = l;
    auto dv = [&](double x) { return delta_v(x, TradeFreeness(phi), p, kLinear); };
    EXPECT_LT(std::abs(dv(z)), 1e-8 * std::max(1.0, p.mu * l));
    const double slope = delta_v_prime(z, TradeFreeness(phi), p, kLinear);
    if (std::abs(slope) > 1e-3) {
      const double w = 1e-4;
      if ((dv(z - w) > 0) != (dv(z + w) > 0)) { EXPECT_NEAR(bisect_oracle(dv, z - w, z + w), z, 1e-8); }
    }
  }
  EXPECT_EQ(used, 300);
}

TEST(Asymmetric, PoleAtBHat) {
  auto p = with(2, 1, 5, 0.3);
  for (double phi : {0.2, 0.5, 1.0 / 3.0, 0.77}) {
    p.b = b_hat(phi);
    EXPECT_THROW(lambda_star(0.7, phi, p), PoleError);
  }
}

TEST(Asymmetric, LowerBoundZeroesLambdaStar) {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 200; ++k) {
    auto p = random_params(rng);
    const double z = uniform(rng, 0.51, 0.99), phi = uniform(rng, 0.01, 0.99);
    p.b = b_tilde(z, phi, p);
    if (!(p.b > 0.0 && p.b < 1.0) || std::abs(p.b - b_hat(phi)) < 1e-6) continue;
    EXPECT_NEAR(lambda_star(z, phi, p), 0.0, 1e-9);
  }
}

TEST(Asymmetric, SpilloverPartVanishesAtBUnder) {
  // For very strong spillovers lambda_star is dominated by its spillover part.
  std::mt19937_64 rng(43);
  for (int k = 0; k < 100; ++k) {
    auto p = random_params(rng);
    const double z = uniform(rng, 0.51, 0.99), phi = uniform(rng, 0.01, 0.99);
    p.b = b_under(z, phi);
    if (std::abs(p.b - b_hat(phi)) < 1e-3) continue;
    p.gamma = 1e9;
    EXPECT_NEAR(lambda_star(z, phi, p), 0.0, 1e-6);
  }
}

TEST(Asymmetric, GammaCZeroesBTilde) {
  std::mt19937_64 rng(44);
  for (int k = 0; k < 100; ++k) {
    auto p = random_params(rng);
    const double z = uniform(rng, 0.51, 0.99), phi = uniform(rng, 0.01, 0.99);
    p.gamma = gamma_c(z, phi, p);
    if (!(p.gamma > 0.0)) continue;
    EXPECT_NEAR(b_tilde(z, phi, p), 0.0, 1e-9);
  }
}

TEST(Asymmetric, ConditionSignMatchesSlope) {
  std::mt19937_64 rng(45);
  const double h = 1e-6;
  int checked = 0;
  for (int k = 0; k < 5000 && checked < 300; ++k) {
    auto p = random_params(rng);
    const double z = uniform(rng, 0.52, 0.98), phi = uniform(rng, 0.01, 0.99);
    const double l = lambda_star(z, phi, p);
    if (!(l > 0.0 && l < 1e3)) continue;
    p.lambda = l;
    const double fd = (delta_v(z + h, TradeFreeness(phi), p, kLinear) - delta_v(z - h, TradeFreeness(phi), p, kLinear)) / (2 * h);
    if (std::abs(fd) < 1e-5) continue;
    ++checked;
    EXPECT_EQ(asymmetric_condition(z, phi, p) < 0.0, fd < 0.0);
    EXPECT_EQ(asymmetric_stability(z, phi, p), p.b > b_c(z, phi, p));
  }
  EXPECT_EQ(checked, 300);
}

TEST(Asymmetric, CriticalWeightBelowHalf) {
  for (double gamma : {0.3, 1.0, 2.5})
    for (double sigma : {1.5, 5.0, 12.0})
      for (int i = 1; i < 20; ++i)
        for (int j = 1; j < 20; ++j) {
          auto p = with(2, gamma, sigma, 0.3);
          const double z = 0.5 + 0.5 * i / 20.0, phi = j / 20.0;
          EXPECT_LT(b_c(z, phi, p), 0.5);
          p.b = b_c(z, phi, p);
          EXPECT_NEAR(asymmetric_condition(z, phi, p), 0.0, 1e-10);
        }
}

TEST(GeneralSpillover, LinearCaseReproducesClosedForm) {
  std::mt19937_64 rng(46);
  for (int k = 0; k < 200; ++k) {
    const auto p = random_params(rng);
    const auto closed = break_points_closed(p);
    const auto general = general_break_points(p.gamma / 2, p.gamma * (2 * p.b - 1), p);
    ASSERT_EQ(closed.phi_b1.has_value(), general.phi_b1.has_value());
    ASSERT_EQ(closed.phi_b2.has_value(), general.phi_b2.has_value());
    if (closed.phi_b1) { EXPECT_NEAR(*closed.phi_b1, *general.phi_b1, 1e-12); }
    if (closed.phi_b2) { EXPECT_NEAR(*closed.phi_b2, *general.phi_b2, 1e-12); }
  }
}

TEST(GeneralSpillover, CustomCurveMatchesNumericSlope) {
  const auto p = with(2, 1, 8, 0.3);
  // Same level and slope at 1/2 as a linear curve with two break points,
  // plus curvature that the break points must not depend on.
  auto F = [](double z) { return 0.9 * (0.338 * z + 0.662 * (1 - z)) + 0.2 * (z - 0.5) * (z - 0.5); };
  const double slope_half = 0.9 * (0.338 - 0.662);
  const SpilloverSpec spec = CustomSpillover{F, 0.45, slope_half};
  const auto gb = general_break_points(0.45, slope_half, p);
  const double h = 1e-4;
  auto slope = [&](double f) {
    return (delta_v(0.5 + h, TradeFreeness(f), p, spec) - delta_v(0.5 - h, TradeFreeness(f), p, spec)) / (2 * h);
  };
  const auto oracle = grid_roots(slope, 1e-6, 1 - 1e-6, 4000);
  std::vector<double> got;
  if (gb.phi_b1) got.push_back(*gb.phi_b1);
  if (gb.phi_b2) got.push_back(*gb.phi_b2);
  ASSERT_EQ(got.size(), oracle.size());
  ASSERT_EQ(got.size(), 2u);
  for (std::size_t i = 0; i < got.size(); ++i) { EXPECT_NEAR(got[i], oracle[i], 1e-6); }
}

TEST(GeneralSpillover, DegenerateLevelZeroesCrossDerivative) {
  // d^2 delta_v / (dz dphi) at z = 1/2 vanishes when F(1/2) sits at the level.
  const auto p = with(2, 1, 8, 0.3);
  const double phi_b = 0.35;
  const double F_b = degenerate_spillover_level(phi_b, p);
  ASSERT_GT(F_b, 0.0);
  const SpilloverSpec spec = CustomSpillover{[F_b](double) { return F_b; }, F_b, 0.0};
  const double h = 1e-4, k = 1e-4;
  auto slope = [&](double f) {
    return (delta_v(0.5 + h, TradeFreeness(f), p, spec) - delta_v(0.5 - h, TradeFreeness(f), p, spec)) / (2 * h);
  };
  EXPECT_NEAR((slope(phi_b + k) - slope(phi_b - k)) / (2 * k), 0.0, 1e-6);
}

TEST(TradeCoupled, Thresholds) {
  auto p = with(4, 1, 8, 0.2);
  const auto t = trade_coupled_thresholds(p);
  EXPECT_NEAR(t.phi_b_g, 0.4, 1e-12);
  ASSERT_TRUE(t.phi_b_g_numeric.has_value());
  const double h = 1e-5;
  auto slope = [&](double f) {
    return (delta_v(0.5 + h, TradeFreeness(f), p, kCoupled) - delta_v(0.5 - h, TradeFreeness(f), p, kCoupled)) / (2 * h);
  };
  const auto oracle = grid_roots(slope, 1e-6, 1 - 1e-6, 4000);
  ASSERT_EQ(oracle.size(), 1u);
  EXPECT_NEAR(*t.phi_b_g_numeric, oracle[0], 1e-8);
  EXPECT_NEAR(*t.phi_b_g_numeric, 0.4251184811, 1e-9);
  // The closed form does not solve the numeric stability condition.
  EXPECT_GT(std::abs(t.phi_b_g - oracle[0]), 1e-2);

  ASSERT_TRUE(t.phi_s_g.has_value());
  EXPECT_NEAR(delta_v(1.0, TradeFreeness(*t.phi_s_g), p, kCoupled), 0.0, 1e-12);
  EXPECT_NEAR(*t.phi_s_g, 0.4132677744, 1e-9);
}

TEST(TradeCoupled, AgglomerationConditionIsCornerPull) {
  auto p = with(4, 1, 8, 0.2);
  for (double f : {0.1, 0.3, 0.6, 0.9})
    EXPECT_NEAR(trade_coupled_agglomeration_condition(p, f), delta_v(1.0, TradeFreeness(f), p, kCoupled), 1e-12);
}

TEST(TradeCoupled, Preconditions) {
  EXPECT_THROW(trade_coupled_thresholds(with(4, 1, 8, 0.6)), PreconditionError);
  EXPECT_THROW(trade_coupled_thresholds(with(1.1, 1, 8, 0.2)), PreconditionError);
}

TEST(TradeCoupled, StrongLocalWeightDestabilisesDispersion) {
  auto p = with(4, 1, 8, 0.6);
  for (int i = 1; i < 100; ++i) { EXPECT_GT(symmetric_slope(TradeFreeness(i / 100.0), p, kCoupled), 0.0); }
}

TEST(Thresholds, ReportAgreesWithComponents) {
  const auto p = with(2, 0.9, 8, 0.339);
  const auto t = compute_thresholds(p, kLinear, 0.4, 0.75);
  const auto bp = break_points_closed(p);
  EXPECT_EQ(t.phi_b1, bp.phi_b1);
  EXPECT_EQ(t.phi_b2, bp.phi_b2);
  ASSERT_TRUE(t.b_c.has_value());
  EXPECT_DOUBLE_EQ(*t.b_c, b_c(0.75, 0.4, p));
  EXPECT_DOUBLE_EQ(*t.b_hat, b_hat(0.4));
  ASSERT_TRUE(t.b_star.has_value());
}
