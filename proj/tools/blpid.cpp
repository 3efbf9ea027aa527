// Batch front end: simulate, identify, infer, bounds, counterexample.
//
// Exit codes: 0 ok, 2 empty set, 3 numerical failure, 4 config or data
// error, 1 anything else.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "blpid/blpid.hpp"

namespace fs = std::filesystem;
using namespace blpid;

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out = ".";
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
};

// FNV-1a over the resolved configuration text.
std::string spec_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig resolve(const Options& o) {
  RunConfig c = o.config.empty() ? parse_config(Json::object()) : load_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.simulate.seed = *o.seed;
    c.infer.seed = *o.seed;
  }
  if (o.threads) c.threads = *o.threads;
  return c;
}

fs::path out_dir(const Options& o) {
  fs::path p(o.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (!fs::is_directory(p)) throw ConfigError("cannot create output directory " + o.out);
  return p;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

Json envelope(const RunConfig& c, const char* command) {
  return {{"command", command}, {"version", kVersion}, {"config", to_json(c)}};
}

Dataset read_data(const Options& o, const RunConfig& c) {
  if (o.data.empty()) throw ConfigError("--data is required for this command");
  return load_dataset(o.data, c.schema);
}

const ThetaGrid& require_grid(const RunConfig& c) {
  if (!c.grid) throw ConfigError("config needs a grid section (alpha, beta, lambda)");
  return *c.grid;
}

int cmd_simulate(const Options& o) {
  const RunConfig c = resolve(o);
  if (!c.seed) throw ConfigError("simulate: missing required key 'seed' (required keys: seed)");
  const auto dir = out_dir(o);
  const unsigned threads = resolve_threads(c.threads);
  SimulatedData sim = simulate_dataset(c.simulate, threads);
  Dataset data = sim.data;
  if (!c.write_s0_ref) {
    auto markets = data.markets();
    for (auto& m : markets) m.outside_share_ref.reset();
    data = Dataset(std::move(markets));
  }
  save_dataset((dir / "data.csv").string(), data);

  Json spec = to_json(c)["simulate"];
  spec["seed"] = c.simulate.seed;
  const std::string hash = spec_hash(spec.dump());
  Json truth = {{"theta", {{"alpha", c.simulate.alpha}, {"beta", c.simulate.beta}, {"lambda", c.simulate.lambda}}},
                {"spec_hash", hash}};
  Json markets = Json::array();
  for (std::size_t m = 0; m < data.size(); ++m)
    markets.push_back({{"market_id", data[m].market_id},
                       {"s0", sim.outside_share[m]},
                       {"xi", std::vector<double>(sim.xi[m].data(), sim.xi[m].data() + sim.xi[m].size())}});
  truth["markets"] = markets;
  write_json(dir / "truth.json", truth);

  Json summary = envelope(c, "simulate");
  summary["spec_hash"] = hash;
  summary["markets"] = data.size();
  summary["rows"] = data.size() * data.products();
  write_json(dir / "simulate.json", summary);
  std::cout << "spec hash " << hash << '\n';
  return 0;
}

struct SetRun {
  GridResult result;
  Json summary;
};

SetRun run_identify(const RunConfig& c, const Dataset& data, unsigned threads) {
  const ThetaGrid& grid = require_grid(c);
  const auto dirs = configured_directions(c, data.products());
  const auto cells = configured_cells(c, data);
  SetRun r;
  r.result = compute_identified_set(grid, data, dirs, c.s0, configured_mixing(c, data.characteristics()), cells,
                                    c.slack, c.support, threads);
  r.summary = grid_summary_json(r.result);
  r.summary["directions"] = dirs.size();
  r.summary["cells"] = cells.cells;
  return r;
}

SetRun run_infer(const RunConfig& c, const Dataset& data, unsigned threads) {
  const ThetaGrid& grid = require_grid(c);
  const auto system = MomentSystem::cross(configured_directions(c, data.products()), build_instruments(data, c.instruments));
  SetRun r;
  r.result = confidence_set(grid, data, system, c.s0, configured_mixing(c, data.characteristics()), c.infer, threads);
  r.summary = grid_summary_json(r.result);
  r.summary["moments"] = system.size();
  r.summary["instrument_functions"] = system.instruments.size();
  r.summary["instrument_functions_retained"] = system.instruments.retained();
  return r;
}

int cmd_identify(const Options& o) {
  const RunConfig c = resolve(o);
  const Dataset data = read_data(o, c);
  const auto dir = out_dir(o);
  const SetRun r = run_identify(c, data, resolve_threads(c.threads));
  write_grid_csv(r.result, (dir / "identify_grid.csv").string(), false);
  Json j = envelope(c, "identify");
  j["result"] = r.summary;
  write_json(dir / "identify.json", j);
  std::cout << "members " << r.result.member_count() << " of " << r.result.points().size() << '\n';
  return r.result.empty() ? 2 : 0;
}

int cmd_infer(const Options& o) {
  const RunConfig c = resolve(o);
  const Dataset data = read_data(o, c);
  const auto dir = out_dir(o);
  const SetRun r = run_infer(c, data, resolve_threads(c.threads));
  write_grid_csv(r.result, (dir / "infer_grid.csv").string(), true);
  Json j = envelope(c, "infer");
  j["result"] = r.summary;
  write_json(dir / "infer.json", j);
  std::cout << "members " << r.result.member_count() << " of " << r.result.points().size() << '\n';
  return r.result.empty() ? 2 : 0;
}

int cmd_bounds(const Options& o) {
  const RunConfig c = resolve(o);
  const Dataset data = read_data(o, c);
  const auto dir = out_dir(o);
  const unsigned threads = resolve_threads(c.threads);
  const SetRun set = c.bounds.members == "infer" ? run_infer(c, data, threads) : run_identify(c, data, threads);
  Json j = envelope(c, "bounds");
  j["set"] = set.summary;
  if (set.result.empty()) {
    write_json(dir / "bounds.json", j);
    std::cout << "empty parameter set\n";
    return 2;
  }
  MarketObservation market;
  if (c.bounds.market == "median") {
    market = median_market(data);
  } else {
    const auto& ms = data.markets();
    const auto it = std::find_if(ms.begin(), ms.end(), [&](const auto& m) { return m.market_id == c.bounds.market; });
    if (it == ms.end()) throw ConfigError("bounds.market: no market with id " + c.bounds.market);
    market = *it;
  }
  const auto b = equilibrium_bounds(market, set.result.members(require_grid(c)), c.s0,
                                    configured_mixing(c, data.characteristics()), c.bounds.n_s0, c.bounds.objects,
                                    c.support.inversion, threads);

  std::ofstream f(dir / "bounds.csv");
  if (!f) throw ConfigError("cannot write bounds.csv");
  f << "object,j,k,lo,hi\n";
  Json objects = Json::array();
  auto row = [&](const char* name, std::size_t j1, std::size_t k1, const Interval& iv) {
    f << name << ',' << j1 << ',' << k1 << ',' << detail::fmt17(iv.lo) << ',' << detail::fmt17(iv.hi) << '\n';
    objects.push_back({{"object", name}, {"j", j1}, {"k", k1}, {"interval", interval_json(iv)}});
  };
  const std::size_t J = data.products();
  for (std::size_t a = 0; a < b.elasticity.size(); ++a)
    for (std::size_t k = 0; k < J; ++k) row("elasticity", a + 1, k + 1, b.elasticity[a][k]);
  for (std::size_t a = 0; a < b.markup.size(); ++a) row("markup", a + 1, a + 1, b.markup[a]);
  for (std::size_t a = 0; a < b.diversion.size(); ++a)
    for (std::size_t k = 0; k < J; ++k)
      if (a != k) row("diversion", a + 1, k + 1, b.diversion[a][k]);
  for (std::size_t a = 0; a < b.shares.size(); ++a) row("share", a + 1, a + 1, b.shares[a]);

  j["market"] = {{"market_id", market.market_id},
                 {"inside_shares", std::vector<double>(market.inside_shares.data(),
                                                       market.inside_shares.data() + market.inside_shares.size())},
                 {"prices", std::vector<double>(market.prices.data(), market.prices.data() + market.prices.size())},
                 {"outside_share_ref", market.outside_share_ref ? Json(*market.outside_share_ref) : Json(nullptr)}};
  j["objects"] = objects;
  j["evaluated"] = b.evaluated;
  j["skipped"] = b.skipped;
  write_json(dir / "bounds.json", j);
  std::cout << "objects " << objects.size() << ", evaluated " << b.evaluated << ", skipped " << b.skipped << '\n';
  return 0;
}

int cmd_counterexample(const Options& o) {
  const RunConfig c = resolve(o);
  const auto dir = out_dir(o);
  const auto& cc = c.counterexample;
  const CounterexampleDesign design(cc.draws, c.seed.value_or(1), cc.nodes, resolve_threads(c.threads));
  const auto curve = counterexample_curve(design, cc.lo, cc.hi, cc.points, cc.refine, c.support.inversion);
  std::ofstream f(dir / "counterexample.csv");
  if (!f) throw ConfigError("cannot write counterexample.csv");
  f << "s0,F\n";
  for (std::size_t k = 0; k < curve.s0.size(); ++k)
    f << detail::fmt17(curve.s0[k]) << ',' << detail::fmt17(curve.F[k]) << '\n';
  Json j = envelope(c, "counterexample");
  j["argmin"] = curve.argmin;
  j["min"] = curve.min;
  j["rejected_draws"] = curve.rejected;
  write_json(dir / "counterexample.json", j);
  std::cout << "argmin " << curve.argmin << ", min " << curve.min << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outside-share-robust BLP identification and inference"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub, bool data) {
    sub->add_option("--config", o.config, "JSON configuration file");
    if (data) sub->add_option("--data", o.data, "long-format market CSV")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--threads", o.threads, "worker threads (0 = all cores)");
    sub->add_option("--seed", o.seed, "overrides the configured seed");
  };
  auto* simulate = app.add_subcommand("simulate", "simulate a dataset and its hidden truths");
  auto* identify = app.add_subcommand("identify", "grid identified set");
  auto* infer = app.add_subcommand("infer", "grid confidence set");
  auto* bounds = app.add_subcommand("bounds", "equilibrium-object intervals at one market");
  auto* counter = app.add_subcommand("counterexample", "F(s0) curve of the two-design counterexample");
  common(simulate, false);
  common(identify, true);
  common(infer, true);
  common(bounds, true);
  common(counter, false);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 4;
  }
  try {
    if (*simulate) return cmd_simulate(o);
    if (*identify) return cmd_identify(o);
    if (*infer) return cmd_infer(o);
    if (*bounds) return cmd_bounds(o);
    if (*counter) return cmd_counterexample(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
