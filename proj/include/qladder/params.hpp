#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "qladder/errors.hpp"

namespace qladder {

/// Structural parameters of the two-region quality-ladder economy.
///
/// `beta` and `endowment` only enter the additive constant shared by both
/// regions' indirect utility. They are carried for completeness and never
/// used by the utility differential.
struct ModelParams {
  double lambda = 2.0;  ///< mass of immobile workers
  double gamma = 1.0;   ///< overall spillover intensity
  double sigma = 5.0;   ///< elasticity of substitution
  double b = 0.342;     ///< weight of local spillovers
  double mu = 1.0;      ///< manufacturing expenditure share
  double delta = 1.2;   ///< quality step size
  double alpha = 1.0;   ///< researchers per variety
  double psi = 1.0;     ///< trade-coupling intensity (trade-coupled regime only)
  double kappa = 1.0;   ///< migration speed
  double beta = 1.0;    ///< unit labour requirement
  std::optional<double> endowment;  ///< numeraire endowment, defaults to 10*mu

  /// ln(delta) / (delta * alpha)
  double omega() const { return std::log(delta) / (delta * alpha); }

  double endowment_or_default() const { return endowment.value_or(10.0 * mu); }

  void validate() const {
    auto require = [](bool ok, const char* field, const char* rule) {
      if (!ok) throw DomainError(std::string("parameter '") + field + "' must satisfy " + rule);
    };
    auto finite = [](double x) { return std::isfinite(x); };
    require(finite(lambda) && lambda > 0.0, "lambda", "lambda > 0");
    require(finite(gamma) && gamma > 0.0, "gamma", "gamma > 0");
    require(finite(sigma) && sigma > 1.0, "sigma", "sigma > 1");
    require(finite(b) && b > 0.0 && b < 1.0, "b", "0 < b < 1");
    require(finite(mu) && mu > 0.0, "mu", "mu > 0");
    require(finite(delta) && delta > 1.0, "delta", "delta > 1");
    require(finite(alpha) && alpha > 0.0, "alpha", "alpha > 0");
    require(finite(psi) && psi > 0.0, "psi", "psi > 0");
    require(finite(kappa) && kappa > 0.0, "kappa", "kappa > 0");
    require(finite(beta) && beta > 0.0, "beta", "beta > 0");
    if (endowment) require(finite(*endowment) && *endowment > mu, "endowment", "endowment > mu");
  }
};

/// Freeness of trade phi = tau^(1 - sigma), strictly inside (0, 1).
class TradeFreeness {
 public:
  explicit TradeFreeness(double phi) : phi_(phi) {
    if (!(phi > 0.0 && phi < 1.0))
      throw DomainError("freeness of trade must lie in (0, 1), got " + std::to_string(phi));
  }
  double value() const noexcept { return phi_; }

 private:
  double phi_;
};

/// F(z) = gamma [b z + (1 - b)(1 - z)]
struct LinearLocalGlobal {};

/// F(z) = gamma [b z + phi psi (1 - b)(1 - z)]: cross-region spillovers
/// strengthen with economic integration.
struct TradeCoupled {};

/// Externally supplied F on [0, 1]. F(1/2) and F'(1/2) are supplied
/// explicitly so the general break-point formulas stay exact.
struct CustomSpillover {
  std::function<double(double)> F;
  double F_half = 0.0;
  double Fprime_half = 0.0;
};

/// Region 1 spillover is F(z); region 2 uses F(1 - z) under every variant.
using SpilloverSpec = std::variant<LinearLocalGlobal, TradeCoupled, CustomSpillover>;

inline bool is_linear(const SpilloverSpec& spec) {
  return std::holds_alternative<LinearLocalGlobal>(spec);
}
inline bool is_trade_coupled(const SpilloverSpec& spec) {
  return std::holds_alternative<TradeCoupled>(spec);
}

inline std::string regime_name(const SpilloverSpec& spec) {
  switch (spec.index()) {
    case 0: return "linear";
    case 1: return "trade_coupled";
    default: return "custom";
  }
}

/// Region-1 spillover F(z). Region 2's value is spillover_F(spec, 1 - z, ...).
inline double spillover_F(const SpilloverSpec& spec, double z, TradeFreeness phi,
                          const ModelParams& p) {
  if (!(z >= 0.0 && z <= 1.0)) throw DomainError("share z must lie in [0, 1]");
  return std::visit(
      [&](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, LinearLocalGlobal>) {
          return p.gamma * (p.b * z + (1.0 - p.b) * (1.0 - z));
        } else if constexpr (std::is_same_v<S, TradeCoupled>) {
          return p.gamma * (p.b * z + phi.value() * p.psi * (1.0 - p.b) * (1.0 - z));
        } else {
          if (!s.F) throw DomainError("custom spillover has no function");
          const double v = s.F(z);
          if (!std::isfinite(v) || v <= 0.0)
            throw DomainError("custom spillover must be finite and positive, F(" +
                              std::to_string(z) + ") = " + std::to_string(v));
          return v;
        }
      },
      spec);
}

}  // namespace qladder
