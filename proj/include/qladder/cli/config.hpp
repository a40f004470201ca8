#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qladder/errors.hpp"
#include "qladder/params.hpp"

namespace qladder::cli {

using json = nlohmann::json;

/// Malformed or invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int n = 1;

  /// n points from lo to hi inclusive.
  std::vector<double> points() const {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return v;
  }
  /// Centres of n equal cells on [lo, hi].
  std::vector<double> centres() const {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * (i + 0.5) / n;
    return v;
  }
};

struct Regime {
  std::string kind = "linear";           ///< linear | trade_coupled | custom_polynomial
  std::vector<double> coefficients;      ///< custom_polynomial: F(z) = sum c_k z^k

  SpilloverSpec spec() const {
    if (kind == "linear") return LinearLocalGlobal{};
    if (kind == "trade_coupled") return TradeCoupled{};
    const auto c = coefficients;
    auto poly = [c](double z) {
      double acc = 0.0;
      for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * z + *it;
      return acc;
    };
    double slope = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) slope = slope * 0.5 + static_cast<double>(k) * c[k];
    return CustomSpillover{poly, poly(0.5), slope};
  }
};

struct QualityBlock {
  double a1 = 0.2, a2 = 0.9, horizon = 500.0;
};

struct CoupledBlock {
  double epsilon = 0.01, a1 = 0.2, a2 = 0.9, horizon = 100.0;
};

struct RunConfig {
  ModelParams params;
  Regime regime;
  std::optional<double> phi;
  std::vector<double> phis;
  double z_probe = 0.75;
  double phi_lo = 0.01, phi_hi = 0.99, step = 1e-3;
  Axis region_phi{0.0, 1.0, 400}, region_b{0.0, 1.0, 400};
  double z0 = 0.6, horizon = 1000.0, tol = 1e-10;
  int basins = 0;
  std::optional<QualityBlock> quality;
  std::optional<CoupledBlock> coupled;
  std::map<std::string, Axis> sweep;
  std::string scenario = "i";
  int random_checks = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

namespace detail {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(field(key) + "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(field(key) + "must be finite");
    return x;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(field(key) + "expected an integer");
    return v.get<std::int64_t>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(field(key) + "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    if (!has(key)) return out;
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(field(key) + "expected an array of numbers");
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(field(key) + "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  ObjectReader child(const std::string& key) { return ObjectReader(raw(key), path_ + key + "."); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + "unknown key");
  }

  std::string field(const std::string& key) const { return "config: " + path_ + key + ": "; }

 private:
  std::string where() const { return "config: " + (path_.empty() ? std::string("<root>") : path_) + ": "; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Axis read_axis(ObjectReader r, const Axis& fallback) {
  Axis a;
  a.lo = r.number("lo", fallback.lo);
  a.hi = r.number("hi", fallback.hi);
  const auto n = r.integer("n", fallback.n);
  r.finish();
  if (n < 1 || n > 100000) throw ConfigError(r.field("n") + "must lie in [1, 100000]");
  if (a.hi < a.lo) throw ConfigError(r.field("hi") + "must not be below lo");
  a.n = static_cast<int>(n);
  return a;
}

inline json axis_json(const Axis& a) { return {{"lo", a.lo}, {"hi", a.hi}, {"n", a.n}}; }

inline const std::set<std::string>& sweepable() {
  static const std::set<std::string> names{"phi",   "lambda", "gamma", "sigma", "b",
                                           "mu",    "delta",  "alpha", "psi",   "kappa"};
  return names;
}

}  // namespace detail

inline double& param_ref(ModelParams& p, const std::string& name) {
  if (name == "lambda") return p.lambda;
  if (name == "gamma") return p.gamma;
  if (name == "sigma") return p.sigma;
  if (name == "b") return p.b;
  if (name == "mu") return p.mu;
  if (name == "delta") return p.delta;
  if (name == "alpha") return p.alpha;
  if (name == "psi") return p.psi;
  if (name == "kappa") return p.kappa;
  throw ConfigError("config: unknown parameter '" + name + "'");
}

inline RunConfig parse_config(const json& doc) {
  // A manifest written by a previous run is accepted as input.
  if (doc.is_object() && doc.contains("resolved_config") && doc.contains("config_hash"))
    return parse_config(doc.at("resolved_config"));

  RunConfig c;
  detail::ObjectReader root(doc, "");
  if (root.has("params")) {
    auto r = root.child("params");
    auto& p = c.params;
    p.lambda = r.number("lambda", p.lambda);
    p.gamma = r.number("gamma", p.gamma);
    p.sigma = r.number("sigma", p.sigma);
    p.b = r.number("b", p.b);
    p.mu = r.number("mu", p.mu);
    p.delta = r.number("delta", p.delta);
    p.alpha = r.number("alpha", p.alpha);
    p.psi = r.number("psi", p.psi);
    p.kappa = r.number("kappa", p.kappa);
    p.beta = r.number("beta", p.beta);
    if (r.has("endowment")) p.endowment = r.number("endowment", 0.0);
    r.finish();
    try {
      p.validate();
    } catch (const DomainError& e) {
      throw ConfigError(std::string("config: params: ") + e.what());
    }
  }
  if (root.has("regime")) {
    auto r = root.child("regime");
    c.regime.kind = r.text("kind", "linear");
    c.regime.coefficients = r.numbers("coefficients");
    r.finish();
    const auto& k = c.regime.kind;
    if (k != "linear" && k != "trade_coupled" && k != "custom_polynomial")
      throw ConfigError(r.field("kind") + "expected linear, trade_coupled or custom_polynomial");
    if (k == "custom_polynomial") {
      if (c.regime.coefficients.empty()) throw ConfigError(r.field("coefficients") + "required for custom_polynomial");
      const auto spec = c.regime.spec();
      const auto& F = std::get<CustomSpillover>(spec).F;
      for (int i = 0; i <= 1000; ++i)
        if (!(F(i / 1000.0) > 0.0)) throw ConfigError(r.field("coefficients") + "F(z) must be positive on [0, 1]");
    } else if (!c.regime.coefficients.empty()) {
      throw ConfigError(r.field("coefficients") + "only used by custom_polynomial");
    }
  }
  if (root.has("phi")) {
    c.phi = root.number("phi", 0.5);
    if (!(*c.phi > 0.0 && *c.phi < 1.0)) throw ConfigError(root.field("phi") + "must lie in (0, 1)");
  }
  c.phis = root.numbers("phis");
  for (double f : c.phis)
    if (!(f > 0.0 && f < 1.0)) throw ConfigError(root.field("phis") + "every value must lie in (0, 1)");
  c.z_probe = root.number("z_probe", c.z_probe);
  if (!(c.z_probe > 0.5 && c.z_probe < 1.0)) throw ConfigError(root.field("z_probe") + "must lie in (1/2, 1)");

  if (root.has("bifurcate")) {
    auto r = root.child("bifurcate");
    const auto range = r.numbers("phi_range");
    if (!range.empty()) {
      if (range.size() != 2 || !(range[0] > 0.0 && range[0] < range[1] && range[1] < 1.0))
        throw ConfigError(r.field("phi_range") + "expected [lo, hi] with 0 < lo < hi < 1");
      c.phi_lo = range[0];
      c.phi_hi = range[1];
    }
    c.step = r.number("step", c.step);
    r.finish();
    if (!(c.step > 0.0 && c.step < 0.5)) throw ConfigError(r.field("step") + "must lie in (0, 0.5)");
  }
  if (root.has("regions")) {
    auto r = root.child("regions");
    if (r.has("phi")) c.region_phi = detail::read_axis(r.child("phi"), c.region_phi);
    if (r.has("b")) c.region_b = detail::read_axis(r.child("b"), c.region_b);
    r.finish();
    if (c.region_phi.lo < 0.0 || c.region_phi.hi > 1.0 || c.region_b.lo < 0.0 || c.region_b.hi > 1.0)
      throw ConfigError("config: regions: axes must lie within [0, 1]");
  }
  if (root.has("simulate")) {
    auto r = root.child("simulate");
    c.z0 = r.number("z0", c.z0);
    c.horizon = r.number("horizon", c.horizon);
    c.tol = r.number("tol", c.tol);
    c.basins = static_cast<int>(r.integer("basins", 0));
    if (r.has("quality")) {
      auto q = r.child("quality");
      QualityBlock b;
      b.a1 = q.number("a1", b.a1);
      b.a2 = q.number("a2", b.a2);
      b.horizon = q.number("horizon", b.horizon);
      q.finish();
      if (!(b.a1 > 0 && b.a1 < 1 && b.a2 > 0 && b.a2 < 1)) throw ConfigError(q.field("a1") + "qualities must lie in (0, 1)");
      if (!(b.horizon > 0)) throw ConfigError(q.field("horizon") + "must be positive");
      c.quality = b;
    }
    if (r.has("coupled")) {
      auto q = r.child("coupled");
      CoupledBlock b;
      b.epsilon = q.number("epsilon", b.epsilon);
      b.a1 = q.number("a1", b.a1);
      b.a2 = q.number("a2", b.a2);
      b.horizon = q.number("horizon", b.horizon);
      q.finish();
      if (!(b.epsilon > 0 && b.epsilon < 1)) throw ConfigError(q.field("epsilon") + "must lie in (0, 1)");
      if (!(b.a1 > 0 && b.a1 < 1 && b.a2 > 0 && b.a2 < 1)) throw ConfigError(q.field("a1") + "qualities must lie in (0, 1)");
      if (!(b.horizon > 0)) throw ConfigError(q.field("horizon") + "must be positive");
      c.coupled = b;
    }
    r.finish();
    if (!(c.z0 >= 0.0 && c.z0 <= 1.0)) throw ConfigError(r.field("z0") + "must lie in [0, 1]");
    if (!(c.horizon > 0.0)) throw ConfigError(r.field("horizon") + "must be positive");
    if (!(c.tol > 0.0)) throw ConfigError(r.field("tol") + "must be positive");
    if (c.basins != 0 && (c.basins < 2 || c.basins > 100000)) throw ConfigError(r.field("basins") + "must be 0 or in [2, 100000]");
  }
  if (root.has("sweep")) {
    auto r = root.child("sweep");
    if (r.has("axes")) {
      const json& axes = r.raw("axes");
      if (!axes.is_object()) throw ConfigError(r.field("axes") + "expected an object");
      for (auto it = axes.begin(); it != axes.end(); ++it) {
        if (!detail::sweepable().count(it.key())) throw ConfigError(r.field("axes." + it.key()) + "not a sweepable parameter");
        c.sweep[it.key()] = detail::read_axis(detail::ObjectReader(it.value(), "sweep.axes." + it.key() + "."), Axis{});
      }
    }
    r.finish();
  }
  c.scenario = root.text("scenario", c.scenario);
  c.random_checks = static_cast<int>(root.integer("random_checks", 0));
  if (c.random_checks < 0 || c.random_checks > 1000000) throw ConfigError(root.field("random_checks") + "must lie in [0, 1000000]");
  const auto seed = root.integer("seed", 0);
  if (seed < 0) throw ConfigError(root.field("seed") + "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  const auto threads = root.integer("threads", 1);
  if (threads < 0 || threads > 1024) throw ConfigError(root.field("threads") + "must lie in [0, 1024]");
  c.threads = static_cast<unsigned>(threads);
  root.finish();
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(doc);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Every setting with defaults filled in; parse_config(to_json(c)) == c.
inline json to_json(const RunConfig& c) {
  const auto& p = c.params;
  json params = {{"lambda", p.lambda}, {"gamma", p.gamma}, {"sigma", p.sigma}, {"b", p.b},
                 {"mu", p.mu},         {"delta", p.delta}, {"alpha", p.alpha}, {"psi", p.psi},
                 {"kappa", p.kappa},   {"beta", p.beta},   {"endowment", p.endowment_or_default()}};
  json regime = {{"kind", c.regime.kind}};
  if (c.regime.kind == "custom_polynomial") regime["coefficients"] = c.regime.coefficients;
  json simulate = {{"z0", c.z0}, {"horizon", c.horizon}, {"tol", c.tol}, {"basins", c.basins}};
  if (c.quality) simulate["quality"] = {{"a1", c.quality->a1}, {"a2", c.quality->a2}, {"horizon", c.quality->horizon}};
  if (c.coupled)
    simulate["coupled"] = {{"epsilon", c.coupled->epsilon}, {"a1", c.coupled->a1}, {"a2", c.coupled->a2},
                           {"horizon", c.coupled->horizon}};
  json axes = json::object();
  for (const auto& [k, a] : c.sweep) axes[k] = detail::axis_json(a);
  json out = {{"params", params},
              {"regime", regime},
              {"phis", c.phis},
              {"z_probe", c.z_probe},
              {"bifurcate", {{"phi_range", {c.phi_lo, c.phi_hi}}, {"step", c.step}}},
              {"regions", {{"phi", detail::axis_json(c.region_phi)}, {"b", detail::axis_json(c.region_b)}}},
              {"simulate", simulate},
              {"sweep", {{"axes", axes}}},
              {"scenario", c.scenario},
              {"random_checks", c.random_checks},
              {"seed", c.seed},
              {"threads", c.threads}};
  if (c.phi) out["phi"] = *c.phi;
  return out;
}

}  // namespace qladder::cli
