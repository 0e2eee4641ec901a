// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Seeds are fixed; every number printed here is reproducible.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fmloc/fmloc.hpp"
#include "support/oracles.hpp"

using namespace fmloc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

GraphTopology chain(std::size_t n, bool periodic = false) {
  const std::array<std::size_t, 1> sides{n};
  return make_lattice_box(1, sides, periodic);
}

GraphTopology square(std::size_t n) {
  const std::array<std::size_t, 2> sides{n, n};
  return make_lattice_box(2, sides, false);
}

const DisorderSpec kUniform = make_spec("uniform", {-1, 1});

ModelSpec pair_alloy(double g) { return alloy_model({{{0}, 1.0}, {{1}, -1.0}}, g); }

// ---------------------------------------------------------------------------
// 1. Oracle equivalence on one and two sites

Outcome criterion1() {
  const double g = 2.0, t = 1.0 / g;
  const std::size_t samples = 20000;
  double worst_z = 0.0;
  std::size_t checks = 0, misses = 0;
  std::uint64_t seed = 100;
  for (double s : {0.2, 1.0 / 3.0, 0.5})
    for (double lambda : {0.0, 1.0})
      for (double eps : {1e-2, 1e-3}) {
        const cplx z(lambda, eps);
        auto split = [](double x) { return std::vector<double>{std::clamp(x, -1.0, 1.0)}; };
        // |v - w|^{-s} averaged over v ~ U(-1, 1), split at Re w.
        auto pole_avg = [&](cplx w) {
          return 0.5 * oracle::simpson([&](double v) { return std::pow(std::abs(v - w), -s); }, -1.0, 1.0,
                                       split(w.real()), 1e-10);
        };
        std::vector<std::pair<double, SampleSummary>> cmp;

        const auto one = fractional_moment_profile({anderson_model(g), chain(1), kUniform}, 0, s, lambda, eps,
                                                   samples, ++seed);
        cmp.emplace_back(pole_avg(z), one.targets[0].stats);

        // G(0,0) = 1 / (v0 - u), u = z + t^2 / (v1 - z): inner over v0, outer over v1.
        const double g00 = 0.5 * oracle::simpson([&](double v1) { return pole_avg(z + t * t / (v1 - z)); },
                                                 -1.0, 1.0, split(lambda), 1e-9);
        // G(0,1) = -t / ((v0 - z)(v1 - w)), w = z + t^2 / (v0 - z).
        const double g01 = 0.5 * oracle::simpson(
                                     [&](double v0) {
                                       return std::pow(t / std::abs(v0 - z), s) * pole_avg(z + t * t / (v0 - z));
                                     },
                                     -1.0, 1.0, split(lambda), 1e-9);
        const auto two = fractional_moment_profile({anderson_model(g), chain(2), kUniform}, 0, s, lambda, eps,
                                                   samples, ++seed);
        cmp.emplace_back(g00, two.targets[0].stats);
        cmp.emplace_back(g01, two.targets[1].stats);
        for (const auto& [exact, st] : cmp) {
          const double zscore = std::abs(st.mean - exact) / st.std_error;
          worst_z = std::max(worst_z, zscore);
          ++checks;
          if (zscore > 3.0) ++misses;
        }
      }
  return {misses == 0, fmt("%zu comparisons, %zu beyond 3 sigma, worst |z| = %.2f", checks, misses, worst_z)};
}

// ---------------------------------------------------------------------------
// 2 and 3. Fractional-moment decay

struct DecayRun {
  bool monotone = true;
  DecayFit fit;
};

DecayRun decay_run(const Ensemble& ens, Vertex x0, std::uint64_t seed) {
  const auto est = fractional_moment_profile(ens, x0, 1.0 / 3.0, 0.0, 1e-3, 2000, seed);
  const auto bins = bin_by_distance(est.targets);
  DecayRun r;
  for (std::size_t i = 1; i < bins.size(); ++i)
    if (bins[i].distance > 3 && !(bins[i].mean < bins[i - 1].mean)) r.monotone = false;
  r.fit = decay_rate_fit(est, 4);
  return r;
}

Outcome criterion2() {
  const double s = 1.0 / 3.0;
  std::vector<double> rates, logs;
  bool ok = true;
  std::string detail;
  for (double g : {10.0, 20.0, 40.0}) {
    const auto r = decay_run({anderson_model(g), chain(40), kUniform}, 20, 2024);
    ok = ok && r.monotone && r.fit.r2 >= 0.9;
    rates.push_back(r.fit.rate);
    logs.push_back(std::log(g));
    detail += fmt("g=%g rate %.4f r2 %.4f%s; ", g, r.fit.rate, r.fit.r2, r.monotone ? "" : " NOT monotone");
  }
  const bool increasing = rates[0] < rates[1] && rates[1] < rates[2];
  const double slope = fit_line(logs, rates).slope;
  const bool slope_ok = slope >= 0.7 * s && slope <= 1.3 * s;
  detail += fmt("slope vs log g %.4f in [%.4f, %.4f]", slope, 0.7 * s, 1.3 * s);
  return {ok && increasing && slope_ok, detail};
}

Outcome criterion3() {
  const auto r = decay_run({spencer_model(1.0, 30.0), chain(25), kUniform}, 12, 3033);
  return {r.monotone && r.fit.r2 >= 0.85 && r.fit.rate > 0.0,
          fmt("rate %.4f r2 %.4f monotone %s", r.fit.rate, r.fit.r2, r.monotone ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 4. Wegner / half-Hoelder at the band edge

Outcome criterion4() {
  const std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
  const auto single = wegner_exponent({spencer_model(1.0, INFINITY), chain(1), kUniform}, 1.0, eps, 400000, 404);
  double worst_z = 0.0;
  std::vector<double> analytic;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double m = 0.5 * std::sqrt(eps[i] * eps[i] + 2.0 * eps[i]);
    analytic.push_back(m);
    worst_z = std::max(worst_z, std::abs(single.masses[i] - m) / single.mass_errors[i]);
  }
  const double analytic_exp = wegner_fit(eps, analytic).exponent;
  const bool single_ok = std::abs(single.exponent - 0.5) <= 0.03 && worst_z <= 4.0;

  const auto coupled = wegner_exponent({spencer_model(1.0, 50.0), chain(20, true), kUniform}, 1.0, eps, 5000, 405);
  const bool coupled_ok = coupled.exponent >= 0.4;
  return {single_ok && coupled_ok,
          fmt("single site exponent %.4f (analytic masses give %.4f), worst mass |z| %.2f; "
              "coupled chain exponent %.4f r2 %.4f%s",
              single.exponent, analytic_exp, worst_z, coupled.exponent, coupled.r2,
              coupled.few_eigenvalues ? " (few eigenvalues per window)" : "")};
}

// ---------------------------------------------------------------------------
// 5 and 6. Eigenfunction correlators

struct Suite {
  const char* name;
  Ensemble ens;
  EnergyInterval interval;
  Vertex m;
};

CorrelatorProfile correlator_run(const Suite& su, std::size_t samples, std::uint64_t seed) {
  Rng rng = sample_rng(seed, 0);
  const auto sd = hermitian_eig(su.ens.draw(rng));
  const auto grid = default_t_grid(sd.eigenvalues.back() - sd.eigenvalues.front());
  return correlator_decay_profile(su.ens, su.interval, su.m, samples, seed, 1, grid);
}

Outcome criterion5() {
  const std::vector<Suite> suites{
      {"anderson chain", {anderson_model(10.0), chain(12), kUniform}, {-0.5, 0.5}, 5},
      {"spencer chain", {spencer_model(1.0, 20.0), chain(10), kUniform}, {0.8, 1.6}, 4},
      {"alloy chain", {pair_alloy(5.0), chain(10), kUniform}, {-1.0, 1.0}, 4},
      {"square 4x4", {anderson_model(8.0), square(4), kUniform}, {-1.0, 1.0}, 5},
      {"covering example", {b1prime_example_model(4.0), chain(8), kUniform}, {-2.0, 2.0}, 3},
      {"gaussian chain", {anderson_model(6.0), chain(10), make_spec("gaussian", {0, 1})}, {-1.0, 1.0}, 4},
  };
  std::size_t q_bad = 0, d_bad = 0, d_checks = 0, one_holds = 0;
  double max_ratio_k = 0.0;
  std::uint64_t seed = 500;
  for (const auto& su : suites) {
    const auto p = correlator_run(su, 200, ++seed);
    q_bad += p.correlator_violations;
    d_bad += p.dynamic_violations;
    d_checks += p.dynamic_checks;
    one_holds += p.factor_one_holds;
    max_ratio_k = std::max(max_ratio_k, p.max_correlator / static_cast<double>(su.ens.model.k));
  }
  return {q_bad == 0 && d_bad == 0,
          fmt("%zu suites: Q > k in %zu samples (max Q/k %.6f); sup > 2Q in %zu of %zu checks; "
              "factor-1 bound held in %zu of %zu",
              suites.size(), q_bad, max_ratio_k, d_bad, d_checks, one_holds, d_checks)};
}

Outcome criterion6() {
  const Suite su{"chain", {anderson_model(10.0), chain(40), kUniform}, {-0.5, 0.5}, 20};
  const auto p = correlator_run(su, 2000, 606);
  const auto bins = bin_by_distance(p.targets);
  const auto fit = fit_exponential_decay(bins, 4);
  return {fit.rate > 0.0 && fit.r2 >= 0.8 && p.correlator_violations == 0 && p.dynamic_violations == 0,
          fmt("rate %.4f r2 %.4f over %zu distances; bound violations %zu / %zu", fit.rate, fit.r2, fit.points,
              p.correlator_violations, p.dynamic_violations)};
}

// ---------------------------------------------------------------------------
// 7. One resolvent step

Outcome criterion7() {
  const std::vector<std::pair<const char*, Ensemble>> models{
      {"anderson", {anderson_model(5.0), chain(10), kUniform}},
      {"spencer", {spencer_model(1.0, 5.0), chain(10), kUniform}},
      {"alloy", {pair_alloy(5.0), chain(10), kUniform}},
  };
  Rng pick(707);
  std::size_t checks = 0, failed = 0, sample_viol = 0;
  std::uint64_t seed = 700;
  for (const auto& [name, ens] : models)
    for (int i = 0; i < 20; ++i) {
      const Vertex x = pick.next_u64() % ens.topo.size(), y = pick.next_u64() % ens.topo.size();
      const auto c = prop1_step_check(ens, x, y, 1.0 / 3.0, 0.0, 1e-3, 400, ++seed);
      ++checks;
      if (!c.pass) ++failed;
      sample_viol += c.sample_violations;
    }
  return {failed == 0, fmt("%zu (x, y) checks over 3 models, %zu failed, per-sample violations %zu", checks,
                           failed, sample_viol)};
}

// ---------------------------------------------------------------------------
// 8. Two-sided comparability of ratio integrals

Outcome criterion8() {
  const double s = 0.15;
  bool ok = true;
  double worst_growth = 0.0, low = INFINITY;
  std::size_t failures = 0;
  for (std::size_t l = 0; l <= 3; ++l)
    for (std::size_t m = 0; m <= 3; ++m) {
      const auto a = comparability_scan(kUniform, l, m, s, s, 1000, 5.0, 800 + 10 * l + m);
      const auto b = comparability_scan(kUniform, l, m, s, s, 1000, 10.0, 900 + 10 * l + m);
      failures += a.failures.size() + b.failures.size();
      const double growth = b.spread() / a.spread();
      worst_growth = std::max(worst_growth, growth);
      low = std::min({low, a.ratio_min, b.ratio_min});
      ok = ok && a.failures.empty() && b.failures.empty() && growth < 2.0;
      if (l == 0 && m == 0) ok = ok && a.ratio_min == 1.0 && a.ratio_max == 1.0;
    }
  const RatioIntegralSpec fixed{{2.0}, {-3.0}, 0.2, 0.2, kUniform};
  const auto coarse = ratio_integral(fixed, {1e-10, 1e-4, 20000});
  const auto fine = ratio_integral(fixed, {1e-10, 5e-5, 20000});
  const double drift = std::abs(coarse.value - fine.value) / fine.value;
  ok = ok && drift < 0.01 && std::isfinite(fine.value);
  return {ok, fmt("16 (l, m) pairs x 2 scales x 1000 draws: %zu failures, smallest ratio %.4f, worst spread "
                  "growth %.3f; fixed draw refinement drift %.2e",
                  failures, low, worst_growth, drift)};
}

// ---------------------------------------------------------------------------
// 9. Reverse Hoelder over two-site Cramer entries

Outcome criterion9() {
  const auto sampler = cramer_alloy_sampler(2.0);
  const auto a = reverse_holder_check(sampler, kUniform, 0.25, 100, 20000, 909);
  const auto b = reverse_holder_check(sampler, kUniform, 0.25, 200, 20000, 909);
  const double drift = b.worst_constant / a.worst_constant;
  const bool ok = a.failures == 0 && b.failures == 0 && std::isfinite(b.worst_constant) && drift < 2.0;
  return {ok, fmt("worst constant %.4f (100 trials), %.4f (200 trials), drift %.3f", a.worst_constant,
                  b.worst_constant, drift)};
}

// ---------------------------------------------------------------------------
// 10. Linear-algebra kernels

Outcome criterion10() {
  const std::vector<Ensemble> pool{
      {anderson_model(1.5), chain(8), kUniform},
      {spencer_model(1.0, 2.0), chain(6), kUniform},
      {pair_alloy(1.0), chain(8), kUniform},
      {anderson_model(1.0), square(3), make_spec("gaussian", {0, 1})},
      {b1prime_example_model(1.0), chain(5), kUniform},
  };
  double recon = 0.0, solve = 0.0, cross = 0.0;
  const cplx z(0.3, 1e-3);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto& ens = pool[i % pool.size()];
    Rng rng = sample_rng(1010, i);
    const auto h = ens.draw(rng);
    const auto sd = hermitian_eig(h);
    const std::size_t n = sd.dim();
    const double scale = 1.0 + max_abs(h.matrix);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        cplx acc{};
        for (std::size_t e = 0; e < n; ++e)
          acc += sd.eigenvectors(r, e) * sd.eigenvalues[e] * std::conj(sd.eigenvectors(c, e));
        recon = std::max(recon, std::abs(acc - h.matrix(r, c)) / scale);
      }
    const auto res = ShiftedResolvent::make(h, z);
    const EnergyInterval all{-1e9, 1e9};
    for (Vertex y = 0; y < h.sites; ++y) {
      const CMatrix col = res->column(y);
      solve = std::max(solve, solve_residual(h, z, y, col) / (1.0 + std::abs(z)));
      for (Vertex x = 0; x < h.sites; ++x) {
        CMatrix spectral(h.k, h.k);
        for (const auto& pb : projector_blocks(sd, all, x, y)) spectral = spectral + (1.0 / (pb.nu - z)) * pb.m;
        const CMatrix direct = block(col, h.row_offset(x), 0, h.k, h.k);
        cross = std::max(cross, max_abs_diff(direct, spectral) / (max_abs(direct) + 1e-300));
      }
    }
  }
  return {recon <= 1e-10 && solve <= 1e-10 && cross <= 1e-8,
          fmt("100 instances: reconstruction %.2e, solve residual %.2e, eigen vs solve %.2e", recon, solve, cross)};
}

// ---------------------------------------------------------------------------
// 11. Byte-identical results across worker counts

Outcome criterion11() {
  using runner::json;
  auto base = [](const char* kind, std::uint64_t samples) {
    return json{{"kind", kind},
                {"model", {{"variant", "spencer"}, {"a", 1}, {"g", "20"}}},
                {"topology", {{"type", "lattice"}, {"d", 1}, {"sides", {10}}}},
                {"disorder", {{"family", "uniform"}, {"params", {-1, 1}}}},
                {"master_seed", 1111},
                {"samples", samples}};
  };
  std::vector<json> docs;
  auto d = base("decay", 300);
  d["estimator"] = {{"s", "1/3"}, {"eps", "1/1000"}};
  docs.push_back(d);
  d = base("wegner", 200);
  d["estimator"] = {{"lambda0", 1}, {"eps_list", {"1/5", "1/10", "1/20", "1/40"}}};
  docs.push_back(d);
  d = base("ids", 200);
  d["estimator"] = {{"lo", -3}, {"hi", 3}, {"bins", 12}};
  docs.push_back(d);
  d = base("correlator", 200);
  d["estimator"] = {{"interval", {"4/5", "8/5"}}};
  docs.push_back(d);
  d = base("dynamical", 100);
  d["estimator"] = {{"interval", {"4/5", "8/5"}}, {"t_points", 64}};
  docs.push_back(d);
  d = base("inequalities", 300);
  d["estimator"] = {{"check", "lemma1"}, {"lambda_grid", {0, "1/2", 1, 2}}, {"x", 2}, {"y", 5}};
  docs.push_back(d);
  d = base("inequalities", 200);
  d["disorder"] = {{"family", "uniform"}, {"params", {-1, 1}}};
  d["estimator"] = {{"check", "comparability"}, {"l", 2}, {"m", 2}, {"s", "3/20"}, {"r", "3/20"}};
  docs.push_back(d);

  std::size_t identical = 0;
  for (auto& doc : docs) {
    std::string first;
    bool same = true;
    for (std::size_t w : {1, 2, 8}) {
      doc["workers"] = w;
      const auto text = runner::json_text(runner::compute(runner::parse_config(doc)));
      if (first.empty()) first = text;
      else same = same && text == first;
    }
    identical += same;
  }
  return {identical == docs.size(),
          fmt("%zu of %zu suites byte-identical for workers 1, 2, 8", identical, docs.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"oracle equivalence, one and two sites", criterion1},
      {"fractional-moment decay on the chain", criterion2},
      {"block model decay", criterion3},
      {"half-Hoelder band edge", criterion4},
      {"correlator bounds", criterion5},
      {"correlator decay", criterion6},
      {"one-step resolvent bound", criterion7},
      {"ratio-integral comparability", criterion8},
      {"reverse Hoelder", criterion9},
      {"numerical kernels", criterion10},
      {"worker-count reproducibility", criterion11},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
