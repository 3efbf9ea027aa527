#pragma once

// JSON run configuration. Every object rejects unknown keys; omitted keys
// take the library defaults. `to_json` gives the resolved configuration that
// outputs embed.

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "blpid/core.hpp"
#include "blpid/dataset_io.hpp"
#include "blpid/identified_set.hpp"
#include "blpid/inference.hpp"
#include "blpid/instruments.hpp"
#include "blpid/simulation.hpp"

namespace blpid {

inline constexpr const char* kVersion = "1.0.0";

using Json = nlohmann::json;

struct DirectionConfig {
  int angular = 64;
  int random = 32;
  std::uint64_t seed = 20240601;
};

struct CellConfig {
  bool exact = true;  // one cell per distinct value of z column `column`; false = a single cell
  int column = 0;
};

struct BoundsConfig {
  std::string market = "median";  // "median" or a market_id
  int n_s0 = 21;
  std::string members = "identify";  // "identify" or "infer"
  ObjectRequest objects;
};

struct CounterexampleConfig {
  int draws = 100000;
  int nodes = 81;
  double lo = 0.10;
  double hi = 0.50;
  int points = 21;
  bool refine = true;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  DgpSpec simulate;
  bool write_s0_ref = true;
  CsvSchema schema;
  MixingSpec mixing = MixingSpec::price_coefficient(1, 0, 15);
  OutsideShareSet s0 = OutsideShareSet::band(0.05);
  std::optional<ThetaGrid> grid;
  DirectionConfig directions;
  SupportOptions support;
  CellConfig cells;
  Slack slack;
  InferenceOptions infer;
  InstrumentSpec instruments;
  BoundsConfig bounds;
  CounterexampleConfig counterexample;
};

namespace detail {

/// Throws ConfigError naming the offending key and the allowed set.
inline void check_keys(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(where + ": unknown key '" + it.key() + "' (allowed: " + list + ")");
    }
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline GridAxis read_axis(const Json& j, const std::string& name, const std::string& where) {
  if (j.is_number()) return GridAxis::frozen(name, j.get<double>());
  check_keys(j, where, {"lo", "hi", "step", "points", "value"});
  if (j.contains("value")) return GridAxis::frozen(name, j.at("value").get<double>());
  if (!j.contains("lo") || !j.contains("hi")) throw ConfigError(where + ": needs lo and hi, or value");
  const double lo = j.at("lo").get<double>(), hi = j.at("hi").get<double>();
  if (j.contains("step")) return GridAxis::stepped(name, lo, hi, j.at("step").get<double>());
  if (j.contains("points")) {
    const int n = j.at("points").get<int>();
    if (n < 2) throw ConfigError(where + ": points must be at least 2");
    return {name, lo, hi, n};
  }
  throw ConfigError(where + ": needs step or points");
}

inline Json axis_json(const GridAxis& a) {
  if (a.points == 1) return {{"value", a.lo}};
  return {{"lo", a.lo}, {"hi", a.hi}, {"points", a.points}};
}

inline std::vector<GridAxis> read_axes(const Json& j, const std::string& prefix, const std::string& where) {
  std::vector<GridAxis> out;
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(read_axis(j[k], j.size() == 1 ? prefix : prefix + std::to_string(k + 1),
                            where + "[" + std::to_string(k) + "]"));
  return out;
}

}  // namespace detail

inline RunConfig parse_config_unchecked(const Json& root) {
  using detail::check_keys;
  using detail::read;
  RunConfig c;
  check_keys(root, "config", {"seed", "threads", "simulate", "data", "mixing", "s0", "grid", "directions", "support",
                              "inversion", "identify", "infer", "bounds", "counterexample"});
  if (root.contains("seed")) c.seed = root.at("seed").get<std::uint64_t>();
  read(root, "threads", c.threads, "config");

  if (root.contains("simulate")) {
    const auto& j = root.at("simulate");
    check_keys(j, "simulate", {"markets", "alpha", "beta", "lambda", "nodes", "write_s0_ref"});
    read(j, "markets", c.simulate.markets, "simulate");
    read(j, "alpha", c.simulate.alpha, "simulate");
    read(j, "beta", c.simulate.beta, "simulate");
    read(j, "lambda", c.simulate.lambda, "simulate");
    read(j, "nodes", c.simulate.nodes, "simulate");
    read(j, "write_s0_ref", c.write_s0_ref, "simulate");
  }
  if (c.seed) c.simulate.seed = *c.seed;

  if (root.contains("data")) {
    const auto& j = root.at("data");
    check_keys(j, "data", {"market_id", "product_id", "share", "price", "x", "z", "s0_ref"});
    read(j, "market_id", c.schema.market_id, "data");
    read(j, "product_id", c.schema.product_id, "data");
    read(j, "share", c.schema.share, "data");
    read(j, "price", c.schema.price, "data");
    read(j, "x", c.schema.x, "data");
    read(j, "z", c.schema.z, "data");
    read(j, "s0_ref", c.schema.outside_share_ref, "data");
  }

  if (root.contains("mixing")) {
    const auto& j = root.at("mixing");
    check_keys(j, "mixing", {"family", "zeta_sd_index", "nu_sd_index", "rule", "nodes", "seed"});
    std::string family = "gaussian", rule = "gauss-hermite";
    read(j, "family", family, "mixing");
    read(j, "rule", rule, "mixing");
    if (family == "degenerate")
      c.mixing = MixingSpec::degenerate();
    else if (family == "gaussian")
      c.mixing.family = MixingFamily::kGaussianIndependent;
    else
      throw ConfigError("mixing.family must be degenerate or gaussian");
    if (rule == "gauss-hermite")
      c.mixing.rule = QuadratureRule::kGaussHermite;
    else if (rule == "monte-carlo")
      c.mixing.rule = QuadratureRule::kMonteCarlo;
    else
      throw ConfigError("mixing.rule must be gauss-hermite or monte-carlo");
    read(j, "zeta_sd_index", c.mixing.zeta_sd_index, "mixing");
    read(j, "nu_sd_index", c.mixing.nu_sd_index, "mixing");
    read(j, "nodes", c.mixing.nodes, "mixing");
    read(j, "seed", c.mixing.seed, "mixing");
    if (c.mixing.nodes < 1) throw ConfigError("mixing.nodes must be at least 1");
  }

  if (root.contains("s0")) {
    const auto& j = root.at("s0");
    check_keys(j, "s0", {"kind", "half_width", "center", "eta"});
    std::string kind = "band";
    double eta = 1e-4, hw = 0.05;
    std::optional<double> center;
    read(j, "kind", kind, "s0");
    read(j, "eta", eta, "s0");
    read(j, "half_width", hw, "s0");
    if (j.contains("center") && !j.at("center").is_null()) center = j.at("center").get<double>();
    if (kind == "agnostic")
      c.s0 = OutsideShareSet::agnostic(eta);
    else if (kind == "band")
      c.s0 = OutsideShareSet::band(hw, center, eta);
    else if (kind == "singleton")
      c.s0 = OutsideShareSet::singleton(center, eta);
    else
      throw ConfigError("s0.kind must be agnostic, band or singleton");
  }

  if (root.contains("grid")) {
    const auto& j = root.at("grid");
    check_keys(j, "grid", {"alpha", "beta", "lambda"});
    if (!j.contains("alpha") || !j.contains("beta") || !j.contains("lambda"))
      throw ConfigError("grid needs alpha, beta and lambda");
    c.grid = ThetaGrid(detail::read_axis(j.at("alpha"), "alpha", "grid.alpha"),
                       detail::read_axes(j.at("beta"), "beta", "grid.beta"),
                       detail::read_axes(j.at("lambda"), "lambda", "grid.lambda"));
  }

  if (root.contains("directions")) {
    const auto& j = root.at("directions");
    check_keys(j, "directions", {"angular", "random", "seed"});
    read(j, "angular", c.directions.angular, "directions");
    read(j, "random", c.directions.random, "directions");
    read(j, "seed", c.directions.seed, "directions");
  }

  if (root.contains("support")) {
    const auto& j = root.at("support");
    check_keys(j, "support", {"grid_points", "refine", "refine_tol", "divergence_slope"});
    read(j, "grid_points", c.support.grid_points, "support");
    read(j, "refine", c.support.refine, "support");
    read(j, "refine_tol", c.support.refine_tol, "support");
    read(j, "divergence_slope", c.support.divergence_slope, "support");
  }
  if (root.contains("inversion")) {
    const auto& j = root.at("inversion");
    check_keys(j, "inversion", {"tol", "max_iter", "accelerate"});
    read(j, "tol", c.support.inversion.tol, "inversion");
    read(j, "max_iter", c.support.inversion.max_iter, "inversion");
    read(j, "accelerate", c.support.inversion.accelerate, "inversion");
  }

  if (root.contains("identify")) {
    const auto& j = root.at("identify");
    check_keys(j, "identify", {"cells", "cell_column", "slack_absolute", "slack_se"});
    std::string cells = "exact";
    read(j, "cells", cells, "identify");
    if (cells != "exact" && cells != "single") throw ConfigError("identify.cells must be exact or single");
    c.cells.exact = cells == "exact";
    read(j, "cell_column", c.cells.column, "identify");
    read(j, "slack_absolute", c.slack.absolute, "identify");
    read(j, "slack_se", c.slack.se_multiplier, "identify");
  }

  if (root.contains("infer")) {
    const auto& j = root.at("infer");
    check_keys(j, "infer", {"pi", "method", "B", "seed", "multiplier", "infinite", "cap", "min_active", "literal_sign",
                            "instruments"});
    read(j, "pi", c.infer.pi, "infer");
    std::string method = "self-normalized", mult = "gaussian", inf = "cap";
    read(j, "method", method, "infer");
    read(j, "multiplier", mult, "infer");
    read(j, "infinite", inf, "infer");
    if (method == "self-normalized")
      c.infer.method = CriticalMethod::kSelfNormalized;
    else if (method == "bootstrap")
      c.infer.method = CriticalMethod::kMultiplierBootstrap;
    else if (method == "two-step")
      c.infer.method = CriticalMethod::kTwoStepHybrid;
    else
      throw ConfigError("infer.method must be self-normalized, bootstrap or two-step");
    if (mult != "gaussian" && mult != "rademacher") throw ConfigError("infer.multiplier must be gaussian or rademacher");
    c.infer.multiplier = mult == "gaussian" ? Multiplier::kGaussian : Multiplier::kRademacher;
    if (inf != "cap" && inf != "drop") throw ConfigError("infer.infinite must be cap or drop");
    c.infer.infinite = inf == "cap" ? InfiniteMoment::kCap : InfiniteMoment::kDrop;
    read(j, "B", c.infer.bootstrap_draws, "infer");
    read(j, "cap", c.infer.cap, "infer");
    read(j, "min_active", c.infer.min_active, "infer");
    read(j, "literal_sign", c.infer.literal_sign, "infer");
    if (j.contains("seed"))
      c.infer.seed = j.at("seed").get<std::uint64_t>();
    else if (c.seed)
      c.infer.seed = *c.seed;
    if (j.contains("instruments")) {
      const auto& g = j.at("instruments");
      check_keys(g, "infer.instruments", {"kind", "columns", "r0", "R", "combos", "standardize"});
      std::string kind = "hypercube";
      read(g, "kind", kind, "infer.instruments");
      if (kind != "hypercube" && kind != "combos")
        throw ConfigError("infer.instruments.kind must be hypercube or combos");
      c.instruments.kind = kind == "hypercube" ? InstrumentSpec::Kind::kHypercube : InstrumentSpec::Kind::kCombos;
      read(g, "columns", c.instruments.columns, "infer.instruments");
      read(g, "r0", c.instruments.r0, "infer.instruments");
      read(g, "R", c.instruments.R, "infer.instruments");
      read(g, "standardize", c.instruments.standardize, "infer.instruments");
      if (g.contains("combos")) {
        for (const auto& e : g.at("combos")) {
          check_keys(e, "infer.instruments.combos[]", {"columns", "cells"});
          ComboSpec s;
          read(e, "columns", s.columns, "infer.instruments.combos[]");
          read(e, "cells", s.cells, "infer.instruments.combos[]");
          c.instruments.combos.push_back(std::move(s));
        }
      }
    }
    c.instruments.min_count = c.infer.min_active;
  } else if (c.seed) {
    c.infer.seed = *c.seed;
  }
  c.infer.support = c.support;

  if (root.contains("bounds")) {
    const auto& j = root.at("bounds");
    check_keys(j, "bounds", {"market", "n_s0", "members", "objects"});
    read(j, "market", c.bounds.market, "bounds");
    read(j, "n_s0", c.bounds.n_s0, "bounds");
    read(j, "members", c.bounds.members, "bounds");
    if (c.bounds.members != "identify" && c.bounds.members != "infer")
      throw ConfigError("bounds.members must be identify or infer");
    if (j.contains("objects")) {
      auto names = j.at("objects").get<std::vector<std::string>>();
      auto has = [&](const char* n) { return std::find(names.begin(), names.end(), n) != names.end(); };
      for (const auto& n : names)
        if (n != "elasticities" && n != "markups" && n != "diversion" && n != "shares")
          throw ConfigError("bounds.objects: unknown object '" + n + "'");
      c.bounds.objects = {has("elasticities"), has("markups"), has("diversion"), has("shares")};
    }
  }

  if (root.contains("counterexample")) {
    const auto& j = root.at("counterexample");
    check_keys(j, "counterexample", {"draws", "nodes", "lo", "hi", "points", "refine"});
    read(j, "draws", c.counterexample.draws, "counterexample");
    read(j, "nodes", c.counterexample.nodes, "counterexample");
    read(j, "lo", c.counterexample.lo, "counterexample");
    read(j, "hi", c.counterexample.hi, "counterexample");
    read(j, "points", c.counterexample.points, "counterexample");
    read(j, "refine", c.counterexample.refine, "counterexample");
    if (!(c.counterexample.lo > 0.0 && c.counterexample.hi < 1.0 && c.counterexample.lo < c.counterexample.hi))
      throw ConfigError("counterexample: need 0 < lo < hi < 1");
    if (c.counterexample.points < 3) throw ConfigError("counterexample.points must be at least 3");
  }
  return c;
}

inline RunConfig parse_config(const Json& root) {
  try {
    return parse_config_unchecked(root);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

/// Directions as configured, for J inside products.
inline DirectionSet configured_directions(const RunConfig& c, std::size_t J) {
  return default_directions(static_cast<Eigen::Index>(J), c.directions.angular, c.directions.random,
                            c.directions.seed);
}

/// The configured mixing with one ζ entry per characteristic (missing
/// entries stay at zero).
inline MixingSpec configured_mixing(const RunConfig& c, std::size_t characteristics) {
  MixingSpec m = c.mixing;
  if (m.family == MixingFamily::kDegenerate) return m;
  if (m.zeta_sd_index.size() > characteristics) throw ConfigError("mixing.zeta_sd_index is longer than d_X");
  m.zeta_sd_index.resize(characteristics, -1);
  return m;
}

inline CellPartition configured_cells(const RunConfig& c, const Dataset& data) {
  if (!c.cells.exact) return CellPartition::single(data.size());
  if (c.cells.column < 0 || static_cast<std::size_t>(c.cells.column) >= data.instruments())
    throw ConfigError("identify.cell_column out of range");
  return CellPartition::exact(data, static_cast<std::size_t>(c.cells.column));
}

/// Fully resolved configuration, defaults included.
inline Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
  j["threads"] = c.threads;
  j["simulate"] = {{"markets", c.simulate.markets}, {"alpha", c.simulate.alpha}, {"beta", c.simulate.beta},
                   {"lambda", c.simulate.lambda}, {"nodes", c.simulate.nodes}, {"write_s0_ref", c.write_s0_ref}};
  j["data"] = {{"market_id", c.schema.market_id}, {"product_id", c.schema.product_id}, {"share", c.schema.share},
               {"price", c.schema.price}, {"x", c.schema.x}, {"z", c.schema.z},
               {"s0_ref", c.schema.outside_share_ref}};
  j["mixing"] = {{"family", c.mixing.family == MixingFamily::kDegenerate ? "degenerate" : "gaussian"},
                 {"zeta_sd_index", c.mixing.zeta_sd_index},
                 {"nu_sd_index", c.mixing.nu_sd_index},
                 {"rule", c.mixing.rule == QuadratureRule::kGaussHermite ? "gauss-hermite" : "monte-carlo"},
                 {"nodes", c.mixing.nodes},
                 {"seed", c.mixing.seed}};
  const char* kinds[] = {"agnostic", "band", "singleton"};
  j["s0"] = {{"kind", kinds[static_cast<int>(c.s0.kind())]},
             {"half_width", c.s0.half_width()},
             {"center", c.s0.center() ? Json(*c.s0.center()) : Json(nullptr)},
             {"eta", c.s0.eta()}};
  if (c.grid) {
    const auto& axes = c.grid->axes();
    Json beta = Json::array(), lambda = Json::array();
    for (std::size_t k = 0; k < c.grid->beta_count(); ++k) beta.push_back(detail::axis_json(axes[1 + k]));
    for (std::size_t k = 1 + c.grid->beta_count(); k < axes.size(); ++k) lambda.push_back(detail::axis_json(axes[k]));
    j["grid"] = {{"alpha", detail::axis_json(axes[0])}, {"beta", beta}, {"lambda", lambda}};
  }
  j["directions"] = {{"angular", c.directions.angular}, {"random", c.directions.random},
                     {"seed", c.directions.seed}};
  j["support"] = {{"grid_points", c.support.grid_points}, {"refine", c.support.refine},
                  {"refine_tol", c.support.refine_tol}, {"divergence_slope", c.support.divergence_slope}};
  j["inversion"] = {{"tol", c.support.inversion.tol}, {"max_iter", c.support.inversion.max_iter},
                    {"accelerate", c.support.inversion.accelerate}};
  j["identify"] = {{"cells", c.cells.exact ? "exact" : "single"}, {"cell_column", c.cells.column},
                   {"slack_absolute", c.slack.absolute}, {"slack_se", c.slack.se_multiplier}};
  Json combos = Json::array();
  for (const auto& s : c.instruments.combos) combos.push_back({{"columns", s.columns}, {"cells", s.cells}});
  const char* methods[] = {"self-normalized", "bootstrap", "two-step"};
  j["infer"] = {{"pi", c.infer.pi},
                {"method", methods[static_cast<int>(c.infer.method)]},
                {"B", c.infer.bootstrap_draws},
                {"seed", c.infer.seed},
                {"multiplier", c.infer.multiplier == Multiplier::kGaussian ? "gaussian" : "rademacher"},
                {"infinite", c.infer.infinite == InfiniteMoment::kCap ? "cap" : "drop"},
                {"cap", c.infer.cap},
                {"min_active", c.infer.min_active},
                {"literal_sign", c.infer.literal_sign},
                {"instruments",
                 {{"kind", c.instruments.kind == InstrumentSpec::Kind::kHypercube ? "hypercube" : "combos"},
                  {"columns", c.instruments.columns},
                  {"r0", c.instruments.r0},
                  {"R", c.instruments.R},
                  {"combos", combos},
                  {"standardize", c.instruments.standardize}}}};
  Json objects = Json::array();
  if (c.bounds.objects.elasticities) objects.push_back("elasticities");
  if (c.bounds.objects.markups) objects.push_back("markups");
  if (c.bounds.objects.diversion) objects.push_back("diversion");
  if (c.bounds.objects.shares) objects.push_back("shares");
  j["bounds"] = {{"market", c.bounds.market}, {"n_s0", c.bounds.n_s0}, {"members", c.bounds.members},
                 {"objects", objects}};
  j["counterexample"] = {{"draws", c.counterexample.draws}, {"nodes", c.counterexample.nodes},
                         {"lo", c.counterexample.lo},       {"hi", c.counterexample.hi},
                         {"points", c.counterexample.points}, {"refine", c.counterexample.refine}};
  return j;
}

}  // namespace blpid
