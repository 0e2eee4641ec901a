#ifndef FMLOC_INEQUALITY_LAB_HPP
#define FMLOC_INEQUALITY_LAB_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fmloc/core/error.hpp"
#include "fmloc/core/lu.hpp"
#include "fmloc/core/opnorm.hpp"
#include "fmloc/core/quadrature.hpp"
#include "fmloc/core/stats.hpp"
#include "fmloc/disorder.hpp"
#include "fmloc/estimators.hpp"
#include "fmloc/model.hpp"
#include "fmloc/numerics.hpp"
#include "fmloc/sampling.hpp"

namespace fmloc {

// ---------------------------------------------------------------------------
// Polynomial-ratio integrals  int prod|v - a_j|^s / prod|v - b_i|^r dmu(v)

struct RatioIntegralSpec {
  std::vector<cplx> a;
  std::vector<cplx> b;
  double s = 0.0;
  double r = 0.0;
  DisorderSpec measure;

  /// prod (1 + |a_j|)^s / prod (1 + |b_i|)^r
  double target() const {
    double t = 1.0;
    for (const auto& x : a) t *= std::pow(1.0 + std::abs(x), s);
    for (const auto& x : b) t /= std::pow(1.0 + std::abs(x), r);
    return t;
  }

  /// The moment condition under which the two-sided comparison is claimed.
  bool in_comparability_regime() const {
    const double alpha = measure.declared_alpha;
    const double rm = r * static_cast<double>(b.size());
    if (!(rm < alpha)) return false;
    const double need = (s * static_cast<double>(a.size()) + rm) * alpha / (alpha - rm);
    return measure.declared_q >= need;
  }

  double integrand(double v) const {
    double f = density(measure, v);
    if (f == 0.0) return 0.0;
    for (const auto& x : a) f *= std::pow(std::abs(v - x), s);
    for (const auto& x : b) f /= std::pow(std::abs(v - x), r);
    return f;
  }
};

struct RatioIntegral {
  double value = 0.0;
  double error_bound = 0.0;  // quadrature estimate plus the tail bound
  double tail_bound = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

// |anchor + dir t - c| without cancellation when anchor == Re c.
inline double offset_abs(double anchor, double dir, double t, cplx c) {
  return std::hypot((anchor - c.real()) + dir * t, c.imag());
}

inline double ratio_integrand_at(const RatioIntegralSpec& spec, double anchor, double dir, double t) {
  double f = density(spec.measure, anchor + dir * t);
  if (f == 0.0) return 0.0;
  for (const auto& x : spec.a) f *= std::pow(offset_abs(anchor, dir, t, x), spec.s);
  for (const auto& x : spec.b) f /= std::pow(offset_abs(anchor, dir, t, x), spec.r);
  return f;
}

// Combined algebraic singularity order at a point: |v - p|^{-beta}.
inline double singular_order(const RatioIntegralSpec& spec, double p) {
  double beta = 0.0;
  for (const auto& x : spec.b)
    if (x.real() == p) beta += spec.r;
  if (spec.measure.family == DisorderFamily::power_regular && p == 0.0)
    beta += 1.0 - spec.measure.params[0];
  return beta;
}

// Integral over [anchor, anchor + dir h] in t = h u^p, u in (0, 1].
inline QuadratureResult anchored_piece(const RatioIntegralSpec& spec, double anchor, double dir,
                                       double h, const QuadratureOptions& opt) {
  const double beta = singular_order(spec, anchor);
  const double p = std::max(3.0, 2.0 / std::max(1.0 - beta, 1e-3));
  auto f = [&](double u) {
    const double t = h * std::pow(u, p);
    if (t == 0.0) return 0.0;
    return ratio_integrand_at(spec, anchor, dir, t) * p * h * std::pow(u, p - 1.0);
  };
  return integrate_adaptive(f, 0.0, 1.0, {}, opt);
}

inline void accumulate(RatioIntegral& acc, const QuadratureResult& q) {
  acc.value += q.value;
  acc.error_bound += q.error_bound;
  acc.evaluations += q.evaluations;
  acc.converged = acc.converged && q.converged;
}

// Panel [lo, hi] as two halves, each anchored at its outer endpoint.
inline void integrate_panel(const RatioIntegralSpec& spec, double lo, double hi,
                            const QuadratureOptions& opt, RatioIntegral& acc) {
  const double h = 0.5 * (hi - lo);
  if (!(h > 0.0)) return;
  accumulate(acc, anchored_piece(spec, lo, 1.0, h, opt));
  accumulate(acc, anchored_piece(spec, hi, -1.0, h, opt));
}

}  // namespace detail

inline void validate(const RatioIntegralSpec& spec) {
  if (!(spec.s > 0.0) && !spec.a.empty()) throw ConfigError("s must be > 0", "inequalities.s");
  if (!(spec.r > 0.0) && !spec.b.empty()) throw ConfigError("r must be > 0", "inequalities.r");
  const double rm = spec.r * static_cast<double>(spec.b.size());
  if (!(rm < spec.measure.declared_alpha))
    throw ConfigError("need r m < alpha for an integrable singularity", "inequalities.r");
  const double e = spec.s * static_cast<double>(spec.a.size()) - rm;
  if (!spec.measure.has_moment(std::max(e, 0.0)) ||
      (spec.measure.family == DisorderFamily::heavy_tail && !(e < spec.measure.declared_q)))
    throw ConfigError("integrand growth exceeds the finite moments of the measure",
                      "inequalities.s");
}

/// Adaptive Gauss-Kronrod integration against the density. Panels are cut at
/// Re a_j, Re b_i, density breakpoints and support ends; on unbounded support
/// the range grows geometrically until a moment bound puts the remaining
/// tail below 1e-4 of the running total.
inline RatioIntegral ratio_integral(const RatioIntegralSpec& spec, QuadratureOptions opt = {}) {
  validate(spec);
  RatioIntegral acc;
  acc.converged = true;
  if (spec.a.empty() && spec.b.empty()) {
    acc.value = 1.0;
    return acc;
  }

  const Support sup = support(spec.measure);
  double reach = 1.0;
  for (const auto& x : spec.a) reach = std::max(reach, 2.0 * std::abs(x));
  for (const auto& x : spec.b) reach = std::max(reach, 2.0 * std::abs(x));
  if (spec.measure.family == DisorderFamily::gaussian)
    reach = std::max(reach, std::abs(spec.measure.params[0]) + 8.0 * spec.measure.params[1]);

  const double lo = sup.bounded() ? sup.lo : -reach;
  const double hi = sup.bounded() ? sup.hi : reach;
  std::vector<double> cuts{lo, hi};
  for (const auto& x : spec.a) cuts.push_back(x.real());
  for (const auto& x : spec.b) cuts.push_back(x.real());
  for (double p : density_breakpoints(spec.measure)) cuts.push_back(p);
  std::erase_if(cuts, [&](double c) { return c < lo || c > hi; });
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    detail::integrate_panel(spec, cuts[i], cuts[i + 1], opt, acc);
  if (sup.bounded()) return acc;

  // Tails. For |v| >= T >= 2 max(|a|, |b|) the integrand is at most
  // 2^{sl + rm} |v|^e rho(v), e = sl - rm, and int_{|v|>T} |v|^e rho
  // <= T^{e - p} E|v|^p for any p >= e.
  const double sl = spec.s * static_cast<double>(spec.a.size());
  const double rm = spec.r * static_cast<double>(spec.b.size());
  const double e = sl - rm;
  const double p = spec.measure.family == DisorderFamily::heavy_tail
                       ? 0.5 * (std::max(e, 0.0) + spec.measure.declared_q)
                       : std::max(e, 0.0) + 8.0;
  const double moment = absolute_moment_bound(spec.measure, p);
  double t = reach;
  constexpr double kMaxReach = 1e15;
  for (;;) {
    acc.tail_bound = std::pow(2.0, sl + rm) * std::pow(t, e - p) * moment;
    if (acc.tail_bound < 1e-4 * std::abs(acc.value) || acc.tail_bound < opt.abs_tol) break;
    if (t > kMaxReach) {
      acc.converged = false;
      break;
    }
    detail::integrate_panel(spec, t, 2.0 * t, opt, acc);
    detail::integrate_panel(spec, -2.0 * t, -t, opt, acc);
    t *= 2.0;
  }
  acc.error_bound += acc.tail_bound;
  return acc;
}

/// Plain Monte Carlo estimate of the same integral over `draws` samples.
inline SampleSummary ratio_integral_mc(const RatioIntegralSpec& spec, std::size_t draws, Rng& rng) {
  std::vector<double> xs(draws);
  for (auto& x : xs) {
    const double v = sample(spec.measure, rng);
    double f = 1.0;
    for (const auto& c : spec.a) f *= std::pow(std::abs(v - c), spec.s);
    for (const auto& c : spec.b) f /= std::pow(std::abs(v - c), spec.r);
    x = f;
  }
  return summarize(xs);
}

// ---------------------------------------------------------------------------
// Comparability scan

struct ComparabilityRecord {
  std::uint64_t draw = 0;
  std::vector<cplx> a;
  std::vector<cplx> b;
  double integral = 0.0;
  double target = 0.0;
  double ratio = 0.0;
};

struct ComparabilityScan {
  double ratio_min = INFINITY;
  double ratio_max = 0.0;
  bool regime_ok = true;
  std::vector<ComparabilityRecord> records;
  std::vector<ComparabilityRecord> failures;  // non-finite or non-positive ratios

  double spread() const { return ratio_max / ratio_min; }
};

/// Uniform in the disk of the given radius, or on the real segment.
inline cplx draw_parameter(Rng& rng, double scale, bool real_only) {
  if (real_only) return {rng.uniform(-scale, scale), 0.0};
  const double rad = scale * std::sqrt(rng.uniform01());
  const double ang = 2.0 * std::numbers::pi * rng.uniform01();
  return std::polar(rad, ang);
}

/// Ratios integral / target over random a_j, b_i with modulus <= param_scale.
/// Even draws use real parameters, which put singularities on the support.
inline ComparabilityScan comparability_scan(const DisorderSpec& measure, std::size_t l, std::size_t m,
                                            double s, double r, std::size_t draws,
                                            double param_scale, std::uint64_t master_seed,
                                            std::size_t workers = 1,
                                            QuadratureOptions opt = {1e-12, 1e-8, 20000}) {
  ComparabilityScan out;
  out.records.resize(draws);
  std::vector<std::uint64_t> idx(draws);
  for (std::size_t i = 0; i < draws; ++i) idx[i] = i;
  parallel_for(idx, workers, [&](std::uint64_t i) {
    Rng rng = sample_rng(master_seed, i);
    RatioIntegralSpec spec{{}, {}, s, r, measure};
    const bool real_only = i % 2 == 0;
    for (std::size_t j = 0; j < l; ++j) spec.a.push_back(draw_parameter(rng, param_scale, real_only));
    for (std::size_t j = 0; j < m; ++j) spec.b.push_back(draw_parameter(rng, param_scale, real_only));
    const auto q = ratio_integral(spec, opt);
    auto& rec = out.records[i];
    rec.draw = i;
    rec.a = spec.a;
    rec.b = spec.b;
    rec.integral = q.value;
    rec.target = spec.target();
    rec.ratio = q.value / rec.target;
  });
  out.regime_ok = RatioIntegralSpec{std::vector<cplx>(l), std::vector<cplx>(m), s, r, measure}
                      .in_comparability_regime();
  for (const auto& rec : out.records) {
    if (!std::isfinite(rec.ratio) || !(rec.ratio > 0.0)) {
      out.failures.push_back(rec);
      continue;
    }
    out.ratio_min = std::min(out.ratio_min, rec.ratio);
    out.ratio_max = std::max(out.ratio_max, rec.ratio);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inverse single-site potential moments

/// <||(v A + B - lambda)^{-1}||^s> over v ~ mu.
inline SampleSummary vinv_moment(const ModelSpec& model, const DisorderSpec& disorder, double lambda,
                                 double s, std::size_t samples, std::uint64_t master_seed,
                                 std::size_t workers = 1, std::uint64_t* resamples = nullptr) {
  if (model.variant == ModelVariant::alloy)
    throw ConfigError("vinv_moment needs a block model", "model.variant");
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("s must lie in (0, 1)", "estimator.s");
  auto kernel = [&](std::uint64_t i) {
    return sample_with_resample(master_seed, i, [&](Rng& rng) -> std::optional<std::vector<double>> {
      const double v = sample(disorder, rng);
      CMatrix m = v * model.A + model.B;
      for (std::size_t d = 0; d < m.rows(); ++d) m(d, d) -= lambda;
      const auto inv = inverse(m);
      if (!inv) return std::nullopt;
      return std::vector<double>{std::pow(block_opnorm(*inv), s)};
    });
  };
  const auto rows = run_rows(samples, workers, kernel);
  if (resamples) *resamples = total_resamples(rows);
  return summarize(column(rows, 0));
}

// ---------------------------------------------------------------------------
// One step of the resolvent expansion

struct StepCheck {
  SampleSummary lhs;  // ||G(x, y)(V(y) - z)||^s
  SampleSummary rhs;  // C^s g^{-s} sum_{w ~ y} ||G(x, w)||^s + delta_xy
  bool pass = false;  // lhs <= rhs + 3 combined standard errors
  std::size_t sample_violations = 0;  // per-sample lhs > rhs (relative 1e-9)
};

namespace detail {

// Row blocks G(x, .) of one instance together with V(y) - z.
struct StepTerms {
  double lhs = 0.0;
  double neighbour_sum = 0.0;  // sum_{w ~ y} ||G(x, w)||^s
  double g_norm = 0.0;         // ||G(x, y)||^s
};

inline StepTerms step_terms(const HamiltonianInstance& h, const GraphTopology& topo,
                            const ShiftedResolvent& res, Vertex x, Vertex y, double s) {
  const auto rows = res.row_blocks(x);
  CMatrix vz = h.site_block(y, y);
  for (std::size_t i = 0; i < h.k; ++i) vz(i, i) -= res.z();
  StepTerms t;
  t.lhs = std::pow(block_opnorm(rows[y] * vz), s);
  t.g_norm = std::pow(block_opnorm(rows[y]), s);
  for (Vertex w : topo.neighbors(y)) t.neighbour_sum += std::pow(block_opnorm(rows[w]), s);
  return t;
}

}  // namespace detail

inline StepCheck prop1_step_check(const Ensemble& ens, Vertex x, Vertex y, double s, double lambda,
                                  double eps, std::size_t samples, std::uint64_t master_seed,
                                  std::size_t workers = 1) {
  if (!(s > 0.0 && s <= 1.0)) throw ConfigError("s must lie in (0, 1]", "estimator.s");
  if (x >= ens.topo.size() || y >= ens.topo.size()) throw ConfigError("site out of range");
  const cplx z(lambda, eps);
  const double coef = std::pow(ens.model.c_b3 * ens.model.hopping_strength(), s);
  const double delta = x == y ? 1.0 : 0.0;
  auto kernel = [&](std::uint64_t i) {
    return sample_with_resample(master_seed, i, [&](Rng& rng) -> std::optional<std::vector<double>> {
      const auto h = ens.draw(rng);
      const auto res = ShiftedResolvent::make(h, z);
      if (!res) return std::nullopt;
      const auto t = detail::step_terms(h, ens.topo, *res, x, y, s);
      return std::vector<double>{t.lhs, coef * t.neighbour_sum + delta};
    });
  };
  const auto rows = run_rows(samples, workers, kernel);
  StepCheck out;
  out.lhs = summarize(column(rows, 0));
  out.rhs = summarize(column(rows, 1));
  for (const auto& r : rows)
    if (r.values[0] > r.values[1] * (1.0 + 1e-9) + 1e-12) ++out.sample_violations;
  out.pass = out.lhs.mean <= out.rhs.mean + 3.0 * std::hypot(out.lhs.std_error, out.rhs.std_error);
  return out;
}

// ---------------------------------------------------------------------------
// Decoupling ratio  <||G (V - z)||^s> / (<||G||^s> (1 + |lambda|)^s)

struct DecouplingPoint {
  double lambda = 0.0;
  SampleSummary numerator;    // <||G(x, y)(V(y) - z)||^s>
  SampleSummary denominator;  // <||G(x, y)||^s>
  double ratio = 0.0;
  bool skipped = false;  // zero denominator
};

struct DecouplingScan {
  std::vector<DecouplingPoint> points;
  double min_ratio = INFINITY;
  bool outside_window = false;  // s above the model's exponent bound
};

inline DecouplingScan lemma1_ratio(const Ensemble& ens, Vertex x, Vertex y, double s,
                                   std::span<const double> lambda_grid, double eps,
                                   std::size_t samples, std::uint64_t master_seed,
                                   std::size_t workers = 1) {
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("s must lie in (0, 1)", "estimator.s");
  if (x >= ens.topo.size() || y >= ens.topo.size()) throw ConfigError("site out of range");
  const std::vector<double> grid(lambda_grid.begin(), lambda_grid.end());
  auto kernel = [&](std::uint64_t i) {
    return sample_with_resample(master_seed, i, [&](Rng& rng) -> std::optional<std::vector<double>> {
      const auto h = ens.draw(rng);
      std::vector<double> row;
      for (double lam : grid) {
        const auto res = ShiftedResolvent::make(h, cplx(lam, eps));
        if (!res) return std::nullopt;
        const auto t = detail::step_terms(h, ens.topo, *res, x, y, s);
        row.push_back(t.lhs);
        row.push_back(t.g_norm);
      }
      return row;
    });
  };
  const auto rows = run_rows(samples, workers, kernel);
  DecouplingScan out;
  out.outside_window =
      s > ens.model.max_exponent(ens.disorder.declared_alpha, ens.disorder.declared_q);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    DecouplingPoint p;
    p.lambda = grid[j];
    p.numerator = summarize(column(rows, 2 * j));
    p.denominator = summarize(column(rows, 2 * j + 1));
    if (p.denominator.mean > 0.0) {
      p.ratio = p.numerator.mean / (p.denominator.mean * std::pow(1.0 + std::abs(p.lambda), s));
      out.min_ratio = std::min(out.min_ratio, p.ratio);
    } else {
      p.skipped = true;
    }
    out.points.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reverse Hoelder for rational functions of the disorder

/// A rational function of `variables` i.i.d. disorder values.
struct RationalSample {
  std::size_t variables = 1;
  std::function<cplx(std::span<const double>)> q;
};

using RationalSampler = std::function<RationalSample(Rng&)>;

struct ReverseHolderResult {
  std::vector<double> constants;  // <|Q|^s> / <|Q|^{s/2}>^2 per trial
  double worst_constant = 0.0;
  std::size_t failures = 0;  // trials with a non-finite estimate
};

/// Per trial: draw Q, then estimate both moments from the same inner draws.
inline ReverseHolderResult reverse_holder_check(const RationalSampler& sampler,
                                                const DisorderSpec& measure, double s,
                                                std::size_t trials, std::size_t inner_samples,
                                                std::uint64_t master_seed, std::size_t workers = 1) {
  if (!(s > 0.0)) throw ConfigError("s must be > 0", "estimator.s");
  auto kernel = [&](std::uint64_t i) {
    Rng rng = sample_rng(master_seed, i);
    const RationalSample rs = sampler(rng);
    std::vector<double> v(rs.variables);
    double full = 0.0, half = 0.0;
    for (std::size_t n = 0; n < inner_samples; ++n) {
      for (auto& x : v) x = sample(measure, rng);
      const double m = std::abs(rs.q(v));
      full += std::pow(m, s);
      half += std::pow(m, 0.5 * s);
    }
    full /= static_cast<double>(inner_samples);
    half /= static_cast<double>(inner_samples);
    return SampleRow{{full / (half * half)}, 0};
  };
  const auto rows = run_rows(trials, workers, kernel);
  ReverseHolderResult out;
  out.constants = column(rows, 0);
  for (double c : out.constants) {
    if (!std::isfinite(c)) {
      ++out.failures;
      continue;
    }
    out.worst_constant = std::max(out.worst_constant, c);
  }
  return out;
}

/// G_lambda(0, 1) of the two-site alloy {0: 1, 1: -1} on an open pair, as a
/// function of (v0, v1), with lambda ~ U(-2, 2) and coupling g per draw.
inline RationalSampler cramer_alloy_sampler(double g) {
  return [g](Rng& rng) {
    const double lambda = rng.uniform(-2.0, 2.0);
    const double t = 1.0 / g;
    return RationalSample{2, [lambda, t](std::span<const double> v) {
                            const double d0 = v[0] - v[1] - lambda;  // V(0) = v0 - v1
                            const double d1 = v[1] - lambda;         // V(1) = v1, v2 out of box
                            return cplx(-t / (d0 * d1 - t * t));
                          }};
  };
}

/// P / Q with independent standard normal coefficients on every monomial of
/// total degree <= degree in `variables` unknowns.
inline RationalSampler random_polynomial_ratio_sampler(std::size_t variables, std::size_t degree) {
  return [variables, degree](Rng& rng) {
    std::vector<std::vector<std::size_t>> monomials{{}};
    for (std::size_t d = 0; d < degree; ++d) {
      const auto prev = monomials;
      for (const auto& mono : prev)
        if (mono.size() == d)
          for (std::size_t j = mono.empty() ? 0 : mono.back(); j < variables; ++j) {
            auto next = mono;
            next.push_back(j);
            monomials.push_back(next);
          }
    }
    auto normal = [&rng] {
      const double u1 = rng.uniform01_open_low(), u2 = rng.uniform01();
      return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    };
    std::vector<double> pc(monomials.size()), qc(monomials.size());
    for (auto& c : pc) c = normal();
    for (auto& c : qc) c = normal();
    return RationalSample{variables, [monomials, pc, qc](std::span<const double> v) {
                            double p = 0.0, q = 0.0;
                            for (std::size_t i = 0; i < monomials.size(); ++i) {
                              double term = 1.0;
                              for (std::size_t j : monomials[i]) term *= v[j];
                              p += pc[i] * term;
                              q += qc[i] * term;
                            }
                            return cplx(p / q);
                          }};
  };
}

/// Q(v) = 1 / (v - b) with a fixed pole b.
inline RationalSampler simple_pole_sampler(cplx b) {
  return [b](Rng&) {
    return RationalSample{1, [b](std::span<const double> v) { return 1.0 / (v[0] - b); }};
  };
}

}  // namespace fmloc

#endif  // FMLOC_INEQUALITY_LAB_HPP
