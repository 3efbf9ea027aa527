// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. `acceptance --criteria 1,3,8` runs a subset.

#include <boost/math/distributions/normal.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "blpid/blpid.hpp"

using namespace blpid;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vector dirichlet(std::mt19937_64& rng, Eigen::Index n, double floor) {
  std::exponential_distribution<double> e(1.0);
  Vector v(n);
  for (;;) {
    for (Eigen::Index k = 0; k < n; ++k) v[k] = e(rng);
    v /= v.sum();
    if (v.minCoeff() >= floor) return v;
  }
}

ParamTheta rc_theta(double a, double b, double l) {
  ParamTheta t;
  t.alpha = a;
  t.beta = Vector::Constant(1, b);
  t.lambda = Vector::Constant(1, l);
  return t;
}

const unsigned kThreads = resolve_threads(0);

// Shared state for the simulated-design criteria.
struct Design {
  DgpSpec spec;
  std::optional<Dataset> data;
  std::optional<GridResult> band;
  std::optional<ThetaGrid> band_grid;

  const Dataset& dataset() {
    if (!data) {
      spec.markets = 20000;
      spec.seed = 1;
      data = simulate_dataset(spec, kThreads).data;
    }
    return *data;
  }

  const GridResult& band_set() {
    if (!band) {
      band_grid = ThetaGrid(GridAxis::stepped("alpha", 0.5, 1.5, 0.025), {GridAxis::stepped("beta", 0.5, 2.0, 0.025)},
                            {GridAxis::stepped("lambda", 0.5, 1.5, 0.025)});
      const Dataset& d = dataset();
      band = compute_identified_set(*band_grid, d, default_directions(2), OutsideShareSet::band(0.05), spec.mixing(),
                                    CellPartition::exact(d, 0), Slack{}, SupportOptions{}, kThreads);
    }
    return *band;
  }
} design;

bool within(const Interval& iv, double lo, double hi, double tol) {
  return !iv.empty() && std::abs(iv.lo - lo) <= tol && std::abs(iv.hi - hi) <= tol;
}

std::string show(const Interval& iv) { return iv.empty() ? "[]" : fmt("[%.4g, %.4g]", iv.lo, iv.hi); }

Outcome criterion1() {
  Clock clock;
  std::mt19937_64 rng(101);
  InversionOptions plain;
  plain.logit_fast_path = false;
  plain.accelerate = false;
  plain.tol = 1e-14;
  plain.max_iter = 1000000;
  InversionOptions accel;
  accel.logit_fast_path = false;
  accel.tol = 1e-14;
  double worst_plain = 0.0, worst_accel = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int J = 2 + t % 5;
    const Vector s = dirichlet(rng, J + 1, 1e-3);
    const ShareKernel k(build_quadrature(MixingSpec::degenerate(), {}), Matrix::Zero(J, 1), Vector::Zero(J));
    const Vector oracle = (s.tail(J).array() / s[0]).log();
    worst_plain = std::max(worst_plain, (invert_sigma(k, s, plain).delta - oracle).cwiseAbs().maxCoeff());
    worst_accel = std::max(worst_accel, (invert_sigma(k, s, accel).delta - oracle).cwiseAbs().maxCoeff());
  }
  const double secs = clock.seconds();
  return {worst_plain <= 1e-10 && worst_accel <= 1e-10 && secs < 10.0,
          fmt("max error contraction %.2e, accelerated %.2e, %.1f s", worst_plain, worst_accel, secs)};
}

Outcome criterion2() {
  Clock clock;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int J = 2 + t % 5;
    Vector p(J);
    for (int j = 0; j < J; ++j) p[j] = u(rng);
    const Vector s = dirichlet(rng, J + 1, 1e-3);
    const ShareKernel k(build_quadrature(MixingSpec::price_coefficient(1, 0, 15), Vector::Constant(1, u(rng))),
                        Matrix::Ones(J, 1), p);
    worst = std::max(worst, (k.sigma(invert_sigma(k, s).delta) - s.tail(J)).cwiseAbs().maxCoeff());
  }
  const double secs = clock.seconds();
  return {worst <= 1e-10 && secs < 30.0, fmt("max round-trip error %.2e, %.1f s", worst, secs)};
}

Outcome criterion3() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const int J = 2 + t % 5;
    Vector p(J), xi(J);
    for (int j = 0; j < J; ++j) {
      p[j] = u(rng);
      xi[j] = u(rng) - 1.5;
    }
    ParamTheta th;
    th.alpha = u(rng);
    th.beta = Vector::Constant(1, u(rng) - 1.0);
    const Matrix x = Matrix::Ones(J, 1);
    const Vector s = choice_probabilities(th, MixingSpec::degenerate(), x, p, xi).tail(J);
    const auto& mix = MixingSpec::degenerate();
    for (int j = 0; j < J; ++j) {
      worst = std::max(worst, std::abs(elasticity_own(th, mix, x, p, xi, j) + th.alpha * p[j] * (1 - s[j])));
      const double m = 1.0 / (th.alpha * (1 - s[j]));
      worst = std::max(worst, std::abs(markup(th, mix, x, p, xi, j) - m) / m);
      for (int k = 0; k < J; ++k) {
        if (k == j) continue;
        worst = std::max(worst, std::abs(elasticity_cross(th, mix, x, p, xi, j, k) - th.alpha * p[k] * s[k]));
        worst = std::max(worst, std::abs(diversion_ratio(th, mix, x, p, xi, j, k) - s[j] / (1 - s[k])));
      }
    }
  }
  return {worst <= 1e-12, fmt("max deviation %.2e over 500 markets", worst)};
}

Outcome criterion4() {
  Clock clock;
  const auto& r = design.band_set();
  const auto& a = r.projection("alpha");
  const auto& b = r.projection("beta");
  const auto& l = r.projection("lambda");
  const auto truth = membership(rc_theta(1, 1, 1), design.dataset(), default_directions(2), OutsideShareSet::band(0.05),
                                design.spec.mixing(), CellPartition::exact(design.dataset(), 0), Slack{},
                                SupportOptions{}, kThreads);
  const bool ok = within(a, 0.825, 1.275, 0.10) && within(b, 0.65, 1.55, 0.10) && within(l, 0.8, 1.35, 0.10) &&
                  truth.member;
  return {ok, fmt("alpha %s beta %s lambda %s (targets [0.825,1.275] [0.65,1.55] [0.8,1.35] +-0.10); "
                  "(1,1,1) member %s; %zu members; %d inversion failures; %.0f s",
                  show(a).c_str(), show(b).c_str(), show(l).c_str(), truth.member ? "yes" : "no", r.member_count(),
                  r.diagnostics.inversion_failures, clock.seconds())};
}

Outcome criterion5() {
  Clock clock;
  const auto& r = design.band_set();
  if (r.empty()) return {false, "identified set is empty"};
  const auto market = median_market(design.dataset());
  const auto b = equilibrium_bounds(market, r.members(*design.band_grid), OutsideShareSet::band(0.05),
                                    design.spec.mixing(), 21, ObjectRequest{}, InversionOptions{}, kThreads);
  const double target[2][2][2] = {{{-0.533, -0.0959}, {-0.0109, 0.0915}}, {{-0.0159, 0.133}, {-0.697, -0.485}}};
  const double truth[2][2] = {{-0.307, 0.0336}, {0.0512, -0.599}};
  bool ok = true;
  std::string d;
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      const auto& iv = b.elasticity[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      const bool ends = within(iv, target[j][k][0], target[j][k][1], 0.05);
      const bool inside = iv.contains(truth[j][k]);
      ok = ok && ends && inside;
      d += fmt("E%d%d %s vs [%g, %g] %s, true %g %s; ", j + 1, k + 1, show(iv).c_str(), target[j][k][0],
               target[j][k][1], ends ? "ok" : "off", truth[j][k], inside ? "inside" : "outside");
    }
  d += fmt("median s~ (%.4f, %.4f) p (%.4f, %.4f); %.0f s", market.inside_shares[0], market.inside_shares[1],
           market.prices[0], market.prices[1], clock.seconds());
  return {ok, d};
}

Outcome criterion6() {
  Clock clock;
  const Dataset& d = design.dataset();
  const ThetaGrid grid(GridAxis::stepped("alpha", 0.5, 2.0, 0.05), {GridAxis::stepped("beta", -3.0, 6.0, 0.1)},
                       {GridAxis::stepped("lambda", 0.0, 4.0, 0.1)});
  const auto r = compute_identified_set(grid, d, default_directions(2), OutsideShareSet::agnostic(),
                                        design.spec.mixing(), CellPartition::exact(d, 0), Slack{}, SupportOptions{},
                                        kThreads);
  const auto& a = r.projection("alpha");
  const auto& b = r.projection("beta");
  const auto& l = r.projection("lambda");
  const double eps = 1e-9;
  const bool ok = !l.empty() && l.lo > eps && l.lo >= 0.2 - eps && l.lo <= 0.6 + eps && within(a, 0.5, 2.0, eps) &&
                  within(b, -3.0, 6.0, eps);
  return {ok, fmt("lambda %s (lower end in [0.2,0.6], excludes 0), alpha %s, beta %s; %zu members; %.0f s",
                  show(l).c_str(), show(a).c_str(), show(b).c_str(), r.member_count(), clock.seconds())};
}

Outcome criterion7() {
  Clock clock;
  const CounterexampleDesign ce(100000, 1, 81, kThreads);
  const auto c = counterexample_curve(ce, 0.1, 0.5, 21);
  const double secs = clock.seconds();
  const bool ok = std::abs(c.argmin - 0.23) <= 0.03 && std::abs(c.min - 0.179) <= 0.02 && secs < 300.0;
  std::string curve;
  for (std::size_t k = 0; k < c.s0.size(); k += 4) curve += fmt(" F(%.2f)=%.4g", c.s0[k], c.F[k]);
  return {ok, fmt("argmin %.4f (target 0.23 +-0.03), min %.4g (target 0.179 +-0.02), rejected draws %d, %.0f s;%s",
                  c.argmin, c.min, c.rejected, secs, curve.c_str())};
}

Outcome criterion8() {
  using Big = boost::multiprecision::cpp_bin_float_50;
  const boost::math::normal_distribution<Big> phi;
  double worst = 0.0;
  for (double pi : {0.01, 0.05, 0.1})
    for (std::size_t p : {1u, 39u, 500u})
      for (std::size_t n : {94u, 1000u}) {
        const Big q = boost::math::quantile(boost::math::complement(phi, Big(pi) / p));
        const double oracle = static_cast<double>(q / sqrt(1 - q * q / n));
        worst = std::max(worst, std::abs(critical_value_sn(pi, p, n) - oracle));
      }
  return {worst <= 1e-9, fmt("max deviation %.2e over 18 (pi, p_n, n) cases; c(0.1, 39, 94) = %.4f", worst,
                             critical_value_sn(0.1, 39, 94))};
}

Outcome criterion9() {
  bool ok = true;
  int cases = 0;
  std::mt19937_64 rng(909);
  std::normal_distribution<double> n;
  for (int dz = 1; dz <= 3; ++dz)
    for (int r0 = 1; r0 <= 2; ++r0)
      for (int R = r0; R <= 3; ++R) {
        // Brute force: count every cell index tuple at every depth.
        std::size_t brute = 0;
        for (int r = r0; r <= R; ++r) {
          std::vector<int> a(static_cast<std::size_t>(dz), 1);
          for (;;) {
            ++brute;
            std::size_t k = 0;
            while (k < a.size() && ++a[k] > 2 * r) a[k++] = 1;
            if (k == a.size()) break;
          }
        }
        std::vector<MarketObservation> ms;
        for (int i = 0; i < 30; ++i) {
          MarketObservation m;
          m.market_id = std::to_string(i);
          m.inside_shares = Vector::Constant(2, 0.5);
          m.prices = Vector::Ones(2);
          m.x = Matrix::Ones(2, 1);
          m.z.resize(dz);
          for (int k = 0; k < dz; ++k) m.z[k] = n(rng);
          ms.push_back(m);
        }
        InstrumentSpec spec;
        spec.r0 = r0;
        spec.R = R;
        spec.min_count = 0;  // count every function, however sparse
        const auto built = build_instruments(Dataset(std::move(ms)), spec).size();
        ok = ok && hypercube_count(dz, r0, R) == brute && built == brute;
        ++cases;
      }
  const auto combos = one_and_two_dim_combos(10, 3, {{0, 1}}, 3);
  const std::size_t dim = combo_count(combos);
  ok = ok && dim == 39 && hypercube_count(1, 1, 2) == 6;
  return {ok, fmt("%d hypercube cases match brute force; 10 instruments, 3 cells each plus (z1,z2) 3x3 -> %zu", cases,
                  dim)};
}

Outcome criterion10() {
  Clock clock;
  const int reps = 50;
  int covered = 0;
  const auto dirs = default_directions(2);
  InferenceOptions opts;
  opts.pi = 0.1;
  opts.method = CriticalMethod::kMultiplierBootstrap;
  opts.bootstrap_draws = 500;
  std::string misses;
  for (int r = 0; r < reps; ++r) {
    DgpSpec spec;
    spec.markets = 500;
    spec.seed = 1000 + static_cast<std::uint64_t>(r);
    const Dataset d = simulate_dataset(spec, kThreads).data;
    InstrumentSpec ispec;
    ispec.r0 = 1;
    ispec.R = 3;
    const auto system = MomentSystem::cross(dirs, build_instruments(d, ispec));
    opts.seed = spec.seed;
    const auto t = test_theta(d, spec.theta(), system, OutsideShareSet::band(0.05), spec.mixing(), opts, kThreads);
    if (!t.reject)
      ++covered;
    else
      misses += fmt(" %d(T=%.2f,c=%.2f)", r, t.statistic, t.critical);
  }
  const double coverage = static_cast<double>(covered) / reps;
  return {coverage >= 0.85, fmt("coverage %.2f over %d replications (threshold 0.85), %.0f s; rejections:%s", coverage,
                                reps, clock.seconds(), misses.empty() ? " none" : misses.c_str())};
}

Dataset toy() {
  std::vector<MarketObservation> ms;
  const double sh[3] = {0.35, 0.30, 0.25}, p1[3] = {2.0, 3.0, 4.0}, p2[3] = {1.0, 0.9, 1.2}, s0[3] = {0.40, 0.45, 0.50};
  for (int i = 0; i < 3; ++i) {
    MarketObservation m;
    m.market_id = std::string(1, static_cast<char>('a' + i));
    m.inside_shares = (Vector(2) << sh[i], 1 - sh[i]).finished();
    m.prices = (Vector(2) << p1[i], p2[i]).finished();
    m.x = Matrix::Ones(2, 1);
    m.z = Vector::Constant(1, i + 1.0);
    m.outside_share_ref = s0[i];
    ms.push_back(m);
  }
  return Dataset(std::move(ms));
}

// Indices of members of `inner` that are not members of `outer`.
int violations(const GridResult& inner, const GridResult& outer) {
  int v = 0;
  for (std::size_t i = 0; i < inner.points().size(); ++i) v += inner.points()[i].member && !outer.points()[i].member;
  return v;
}

Outcome criterion11() {
  const Dataset d = toy();
  const auto mix = MixingSpec::price_coefficient(1, 0, 15);
  const ThetaGrid grid(GridAxis::stepped("alpha", 0.0, 3.0, 0.25), {GridAxis::stepped("beta", -2.0, 4.0, 0.5)},
                       {GridAxis::stepped("lambda", 0.0, 2.0, 0.5)});
  const auto cells = CellPartition::exact(d, 0);
  const Slack slack{0.25, 0.0};
  int bad = 0;
  std::string d1 = "S0 nesting members:";

  // Nested outside-share sets.
  const std::vector<OutsideShareSet> sets{OutsideShareSet::singleton(), OutsideShareSet::band(0.01),
                                          OutsideShareSet::band(0.03), OutsideShareSet::band(0.05),
                                          OutsideShareSet::band(0.2), OutsideShareSet::agnostic()};
  std::vector<GridResult> by_s0;
  for (const auto& s : sets) {
    by_s0.push_back(compute_identified_set(grid, d, default_directions(2, 16), s, mix, cells, slack));
    d1 += fmt(" %zu", by_s0.back().member_count());
  }
  for (std::size_t k = 1; k < by_s0.size(); ++k) bad += violations(by_s0[k - 1], by_s0[k]);

  // Nested π for the self-normalized confidence set.
  InstrumentSpec ispec;
  ispec.kind = InstrumentSpec::Kind::kCombos;
  ispec.combos = {ComboSpec{{0}, {1}}};
  ispec.min_count = 1;
  DirectionSet two(2);
  two.add((Vector(2) << 1.0, -1.0).finished(), DirectionTag::kPairwiseDifference);
  two.add((Vector(2) << -1.0, 1.0).finished(), DirectionTag::kPairwiseDifference);
  const auto system = MomentSystem::cross(two, build_instruments(d, ispec));
  InferenceOptions opts;
  opts.min_active = 1;
  std::vector<GridResult> by_pi;
  d1 += "; pi nesting members:";
  for (double pi : {0.5, 0.3, 0.2, 0.1}) {
    opts.pi = pi;
    by_pi.push_back(confidence_set(grid, d, system, OutsideShareSet::band(0.05), mix, opts));
    d1 += fmt(" %zu", by_pi.back().member_count());
  }
  for (std::size_t k = 1; k < by_pi.size(); ++k) bad += violations(by_pi[k - 1], by_pi[k]);

  // Adding directions shrinks the identified set weakly.
  DirectionSet dirs(2);
  add_canonical_directions(dirs);
  std::vector<GridResult> by_dirs;
  d1 += "; direction nesting members:";
  for (int extra : {0, 8, 32, 64}) {
    DirectionSet ds = dirs;
    for (int k = 0; k < extra; ++k) {
      const double a = 2.0 * std::numbers::pi * k / extra;
      ds.add((Vector(2) << std::cos(a), std::sin(a)).finished(), DirectionTag::kAngular);
    }
    by_dirs.push_back(compute_identified_set(grid, d, ds, OutsideShareSet::band(0.05), mix, cells, slack));
    d1 += fmt(" %zu", by_dirs.back().member_count());
  }
  // Angle families are nested: 8 ⊂ 32 ⊂ 64, all on top of the canonical set.
  for (std::size_t k = 1; k < by_dirs.size(); ++k) bad += violations(by_dirs[k], by_dirs[k - 1]);
  d1 += fmt("; %d nesting violations over %zu grid points", bad, grid.size());
  return {bad == 0, d1};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criteria" && i + 1 < argc) {
      std::stringstream s(argv[++i]);
      for (std::string t; std::getline(s, t, ',');) only.insert(std::stoi(t));
    } else {
      std::cerr << "usage: acceptance [--criteria 1,2,...]\n";
      return 2;
    }
  }
  const std::map<int, std::function<Outcome()>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},  {6, criterion6},
      {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}, {11, criterion11}};
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << ' ' << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
