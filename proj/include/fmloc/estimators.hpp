#ifndef FMLOC_ESTIMATORS_HPP
#define FMLOC_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fmloc/core/error.hpp"
#include "fmloc/core/opnorm.hpp"
#include "fmloc/core/stats.hpp"
#include "fmloc/disorder.hpp"
#include "fmloc/model.hpp"
#include "fmloc/numerics.hpp"
#include "fmloc/sampling.hpp"
#include "fmloc/topology.hpp"

namespace fmloc {

/// Model, graph and single-site law: everything needed to draw an instance.
struct Ensemble {
  ModelSpec model;
  GraphTopology topo;
  DisorderSpec disorder;

  HamiltonianInstance draw(Rng& rng) const {
    const auto v = draw_disorder(disorder, rng, topo.size());
    return assemble(model, topo, v);
  }
};

/// Runs attempt(rng) on successive streams of sample `index` until it returns
/// a row; each failed attempt counts as a resample.
template <class Attempt>
SampleRow sample_with_resample(std::uint64_t master_seed, std::uint64_t index, Attempt&& attempt) {
  for (std::uint32_t a = 0; a <= kMaxResamples; ++a) {
    Rng rng = sample_rng(master_seed, index, a);
    if (std::optional<std::vector<double>> row = attempt(rng)) return {std::move(*row), a};
  }
  throw NumericalError("sample " + std::to_string(index) + ": resample limit reached");
}

// ---------------------------------------------------------------------------
// Fractional moments of the resolvent

struct TargetStat {
  Vertex site = 0;
  std::size_t distance = 0;
  SampleSummary stats;
};

struct MomentEstimate {
  double s = 0.0;
  double lambda = 0.0;
  double eps = 0.0;
  double g = 0.0;
  Vertex x0 = 0;
  std::vector<TargetStat> targets;  // one per vertex, in vertex order
  std::size_t samples = 0;
  std::uint64_t resamples = 0;
  bool resample_flag = false;  // resamples above 1% of draws
  double s_max = 0.0;          // alpha q / (2 k alpha + k q)
  bool outside_theorem_window = false;
  std::uint64_t master_seed = 0;
  std::string config_digest;
};

/// Per-sample kernel: row y holds ||G_z(x0, y)||^s.
class MomentProfileTask {
 public:
  MomentProfileTask(Ensemble ens, Vertex x0, double s, double lambda, double eps,
                    std::uint64_t master_seed)
      : ens_(std::move(ens)), x0_(x0), s_(s), z_(lambda, eps), master_(master_seed) {
    if (!(s > 0.0 && s < 1.0)) throw ConfigError("s must lie in (0, 1)", "estimator.s");
    if (!(eps >= 0.0)) throw ConfigError("eps must be >= 0", "estimator.eps");
    if (x0 >= ens_.topo.size()) throw ConfigError("x0 out of range", "estimator.x0");
  }

  const Ensemble& ensemble() const noexcept { return ens_; }

  SampleRow operator()(std::uint64_t index) const {
    return sample_with_resample(master_, index, [&](Rng& rng) -> std::optional<std::vector<double>> {
      const auto h = ens_.draw(rng);
      const auto res = ShiftedResolvent::make(h, z_);
      if (!res) return std::nullopt;
      const auto blocks = res->row_blocks(x0_);
      std::vector<double> row(blocks.size());
      for (std::size_t y = 0; y < blocks.size(); ++y) row[y] = std::pow(block_opnorm(blocks[y]), s_);
      return row;
    });
  }

  MomentEstimate reduce(std::span<const SampleRow> rows) const {
    MomentEstimate est;
    est.s = s_;
    est.lambda = z_.real();
    est.eps = z_.imag();
    est.g = ens_.model.g;
    est.x0 = x0_;
    est.samples = rows.size();
    est.resamples = total_resamples(rows);
    est.resample_flag = static_cast<double>(est.resamples) >
                        0.01 * static_cast<double>(rows.size() + est.resamples);
    est.s_max = ens_.model.max_exponent(ens_.disorder.declared_alpha, ens_.disorder.declared_q);
    est.outside_theorem_window = s_ > est.s_max;
    est.master_seed = master_;
    const auto dist = distances_from(ens_.topo, x0_);
    for (Vertex y = 0; y < ens_.topo.size(); ++y) {
      const auto col = column(rows, y);
      est.targets.push_back({y, dist[y], summarize(col)});
    }
    return est;
  }

 private:
  Ensemble ens_;
  Vertex x0_;
  double s_;
  cplx z_;
  std::uint64_t master_;
};

inline MomentEstimate fractional_moment_profile(const Ensemble& ens, Vertex x0, double s,
                                                double lambda, double eps, std::size_t samples,
                                                std::uint64_t master_seed, std::size_t workers = 1) {
  if (samples < 100) throw ConfigError("need at least 100 samples", "estimator.samples");
  const MomentProfileTask task(ens, x0, s, lambda, eps, master_seed);
  const auto rows = run_rows(samples, workers, task);
  return task.reduce(rows);
}

/// Default imaginary part: 1e-3 * (spectral width) / (N k), from one instance.
inline double default_eps(const HamiltonianInstance& h) {
  const auto sd = hermitian_eig(h);
  const double width = sd.dim() ? sd.eigenvalues.back() - sd.eigenvalues.front() : 0.0;
  return 1e-3 * std::max(width, 1e-12) / static_cast<double>(std::max<std::size_t>(h.dim(), 1));
}

// ---------------------------------------------------------------------------
// Distance bins and exponential fits

struct DistanceBin {
  std::size_t distance = 0;
  double mean = 0.0;       // average of the target means in the bin
  double std_error = 0.0;  // from the targets' standard errors
  double mom_error = 0.0;  // from the targets' median-of-means errors
  std::size_t population = 0;
  std::size_t samples = 0;
};

/// Groups targets by exact graph distance; unreachable targets are dropped.
inline std::vector<DistanceBin> bin_by_distance(std::span<const TargetStat> targets) {
  std::size_t dmax = 0;
  for (const auto& t : targets)
    if (t.distance != kUnreachable) dmax = std::max(dmax, t.distance);
  std::vector<DistanceBin> bins(dmax + 1);
  std::vector<double> var(dmax + 1, 0.0), mvar(dmax + 1, 0.0);
  for (const auto& t : targets) {
    if (t.distance == kUnreachable) continue;
    auto& b = bins[t.distance];
    b.distance = t.distance;
    b.mean += t.stats.mean;
    b.samples = t.stats.n;
    var[t.distance] += t.stats.std_error * t.stats.std_error;
    mvar[t.distance] += t.stats.mom_error * t.stats.mom_error;
    ++b.population;
  }
  std::vector<DistanceBin> out;
  for (std::size_t d = 0; d <= dmax; ++d) {
    auto& b = bins[d];
    if (b.population == 0) continue;
    const double p = static_cast<double>(b.population);
    b.mean /= p;
    b.std_error = std::sqrt(var[d]) / p;
    b.mom_error = std::sqrt(mvar[d]) / p;
    out.push_back(b);
  }
  return out;
}

struct DecayFit {
  double rate = 0.0;  // positive for decay
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least squares of log(mean) against distance over bins with d >= d_min and
/// positive mean, weighted by bin population.
inline DecayFit fit_exponential_decay(std::span<const DistanceBin> bins, std::size_t d_min) {
  std::vector<double> x, y, w;
  bool any_positive = false;
  for (const auto& b : bins) {
    if (b.mean > 0.0) any_positive = true;
    if (b.distance < d_min || !(b.mean > 0.0) || !std::isfinite(b.mean)) continue;
    x.push_back(static_cast<double>(b.distance));
    y.push_back(std::log(b.mean));
    w.push_back(static_cast<double>(b.population));
  }
  if (!any_positive) throw DegenerateFitError("decay fit: all means are zero");
  if (x.size() < 3) throw DegenerateFitError("decay fit: fewer than 3 usable distances");
  const auto line = fit_line(x, y, w);
  return {-line.slope, line.intercept, line.r2, x.size()};
}

inline DecayFit decay_rate_fit(const MomentEstimate& est, std::size_t d_min) {
  return fit_exponential_decay(bin_by_distance(est.targets), d_min);
}

struct MaxCheck {
  bool pass = true;
  double margin = 0.0;  // min over y of mean(x0) - mean(y) + 2 sigma
};

/// Is the largest per-target mean attained at x0, within two combined
/// standard errors?
inline MaxCheck moment_max_check(const MomentEstimate& est) {
  const auto& at = est.targets.at(est.x0).stats;
  MaxCheck out;
  out.margin = INFINITY;
  for (const auto& t : est.targets) {
    if (t.site == est.x0) continue;
    const double sigma = std::hypot(at.std_error, t.stats.std_error);
    out.margin = std::min(out.margin, at.mean - t.stats.mean + 2.0 * sigma);
  }
  if (!std::isfinite(out.margin)) out.margin = 0.0;
  out.pass = out.margin >= 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Diagonal a-priori bound over a lambda grid

struct DiagonalScan {
  std::vector<double> lambdas;
  std::vector<SampleSummary> moments;  // <||G(x,x)||^s>
  std::vector<double> weighted;        // moment * (1 + |lambda|)^s
  double max_over_min = 0.0;
};

class DiagonalScanTask {
 public:
  DiagonalScanTask(Ensemble ens, Vertex x, double s, std::vector<double> lambdas, double eps,
                   std::uint64_t master_seed)
      : ens_(std::move(ens)), x_(x), s_(s), lambdas_(std::move(lambdas)), eps_(eps),
        master_(master_seed) {}

  SampleRow operator()(std::uint64_t index) const {
    return sample_with_resample(master_, index, [&](Rng& rng) -> std::optional<std::vector<double>> {
      const auto h = ens_.draw(rng);
      std::vector<double> row;
      for (double lam : lambdas_) {
        const auto res = ShiftedResolvent::make(h, cplx(lam, eps_));
        if (!res) return std::nullopt;
        const CMatrix col = res->column(x_);
        row.push_back(std::pow(block_opnorm(block(col, h.row_offset(x_), 0, h.k, h.k)), s_));
      }
      return row;
    });
  }

  DiagonalScan reduce(std::span<const SampleRow> rows) const {
    DiagonalScan out;
    out.lambdas = lambdas_;
    double lo = INFINITY, hi = 0.0;
    for (std::size_t j = 0; j < lambdas_.size(); ++j) {
      const auto col = column(rows, j);
      out.moments.push_back(summarize(col));
      const double w = out.moments.back().mean * std::pow(1.0 + std::abs(lambdas_[j]), s_);
      out.weighted.push_back(w);
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    out.max_over_min = lo > 0.0 ? hi / lo : INFINITY;
    return out;
  }

 private:
  Ensemble ens_;
  Vertex x_;
  double s_;
  std::vector<double> lambdas_;
  double eps_;
  std::uint64_t master_;
};

inline DiagonalScan diagonal_bound_scan(const Ensemble& ens, Vertex x, double s,
                                        std::vector<double> lambdas, double eps, std::size_t samples,
                                        std::uint64_t master_seed, std::size_t workers = 1) {
  const DiagonalScanTask task(ens, x, s, std::move(lambdas), eps, master_seed);
  return task.reduce(run_rows(samples, workers, task));
}

// ---------------------------------------------------------------------------
// Integrated density of states

struct IdsHistogram {
  std::vector<double> edges;   // bins + 1 ascending edges
  std::vector<double> masses;  // per bin
  std::vector<double> mass_errors;
  double underflow = 0.0;
  double overflow = 0.0;

  double total() const {
    double t = underflow + overflow;
    for (double m : masses) t += m;
    return t;
  }
};

class IdsTask {
 public:
  IdsTask(Ensemble ens, double lo, double hi, std::size_t bins, std::uint64_t master_seed)
      : ens_(std::move(ens)), master_(master_seed) {
    if (!(hi > lo) || bins == 0) throw ConfigError("IDS needs lo < hi and bins > 0", "estimator.bins");
    edges_.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
      edges_[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }

  /// Row: per-bin fraction of eigenvalues, then underflow and overflow.
  SampleRow operator()(std::uint64_t index) const {
    Rng rng = sample_rng(master_, index);
    const auto sd = hermitian_eig(ens_.draw(rng));
    const std::size_t bins = edges_.size() - 1;
    std::vector<double> counts(bins + 2, 0.0);
    for (double e : sd.eigenvalues) {
      if (e < edges_.front()) {
        counts[bins] += 1.0;
      } else if (e >= edges_.back()) {
        counts[bins + 1] += 1.0;
      } else {
        auto it = std::upper_bound(edges_.begin(), edges_.end(), e);
        counts[static_cast<std::size_t>(it - edges_.begin()) - 1] += 1.0;
      }
    }
    for (auto& c : counts) c /= static_cast<double>(sd.dim());
    return {std::move(counts), 0};
  }

  IdsHistogram reduce(std::span<const SampleRow> rows) const {
    IdsHistogram out;
    out.edges = edges_;
    const std::size_t bins = edges_.size() - 1;
    for (std::size_t b = 0; b < bins; ++b) {
      const auto s = summarize(column(rows, b));
      out.masses.push_back(s.mean);
      out.mass_errors.push_back(s.std_error);
    }
    out.underflow = summarize(column(rows, bins)).mean;
    out.overflow = summarize(column(rows, bins + 1)).mean;
    return out;
  }

 private:
  Ensemble ens_;
  std::vector<double> edges_;
  std::uint64_t master_;
};

inline IdsHistogram ids_histogram(const Ensemble& ens, double lo, double hi, std::size_t bins,
                                  std::size_t samples, std::uint64_t master_seed,
                                  std::size_t workers = 1) {
  const IdsTask task(ens, lo, hi, bins, master_seed);
  return task.reduce(run_rows(samples, workers, task));
}

// ---------------------------------------------------------------------------
// Wegner exponent

struct WegnerResult {
  std::vector<double> eps;
  std::vector<double> masses;
  std::vector<double> mass_errors;
  double exponent = 0.0;
  double r2 = 0.0;
  std::size_t fitted = 0;
  bool dropped_empty = false;     // some windows were empty and left out
  bool narrow_span = false;       // eps list spans less than a decade
  bool few_eigenvalues = false;   // < 50 expected eigenvalues at the largest eps
};

/// Slope of log mass against log eps over the windows with positive mass.
inline WegnerResult wegner_fit(std::span<const double> eps, std::span<const double> masses) {
  if (eps.size() != masses.size()) throw ConfigError("wegner_fit: length mismatch");
  WegnerResult out;
  out.eps.assign(eps.begin(), eps.end());
  out.masses.assign(masses.begin(), masses.end());
  std::vector<double> x, y;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (masses[i] > 0.0) {
      x.push_back(std::log(eps[i]));
      y.push_back(std::log(masses[i]));
    } else {
      out.dropped_empty = true;
    }
  }
  if (x.size() < 2) throw DegenerateFitError("wegner fit: fewer than 2 nonempty windows");
  const auto line = fit_line(x, y);
  out.exponent = line.slope;
  out.r2 = line.r2;
  out.fitted = x.size();
  const auto [lo, hi] = std::minmax_element(eps.begin(), eps.end());
  out.narrow_span = *hi < 10.0 * *lo;
  return out;
}

class WegnerTask {
 public:
  WegnerTask(Ensemble ens, double lambda0, std::vector<double> eps, std::uint64_t master_seed)
      : ens_(std::move(ens)), lambda0_(lambda0), eps_(std::move(eps)), master_(master_seed) {
    if (eps_.size() < 3) throw ConfigError("need at least 3 window widths", "estimator.eps_list");
    for (double e : eps_)
      if (!(e > 0.0)) throw ConfigError("window widths must be > 0", "estimator.eps_list");
  }

  /// Row: fraction of eigenvalues in [lambda0 - eps, lambda0 + eps] per eps.
  SampleRow operator()(std::uint64_t index) const {
    Rng rng = sample_rng(master_, index);
    const auto sd = hermitian_eig(ens_.draw(rng));
    std::vector<double> row;
    for (double e : eps_) {
      const auto lo = std::lower_bound(sd.eigenvalues.begin(), sd.eigenvalues.end(), lambda0_ - e);
      const auto hi = std::upper_bound(sd.eigenvalues.begin(), sd.eigenvalues.end(), lambda0_ + e);
      row.push_back(static_cast<double>(hi - lo) / static_cast<double>(sd.dim()));
    }
    return {std::move(row), 0};
  }

  WegnerResult reduce(std::span<const SampleRow> rows) const {
    std::vector<double> masses, errors;
    for (std::size_t j = 0; j < eps_.size(); ++j) {
      const auto s = summarize(column(rows, j));
      masses.push_back(s.mean);
      errors.push_back(s.std_error);
    }
    auto out = wegner_fit(eps_, masses);
    out.mass_errors = std::move(errors);
    const auto widest = std::max_element(eps_.begin(), eps_.end()) - eps_.begin();
    const double dim = static_cast<double>(ens_.topo.size() * ens_.model.k);
    out.few_eigenvalues = masses[static_cast<std::size_t>(widest)] * dim < 50.0;
    return out;
  }

 private:
  Ensemble ens_;
  double lambda0_;
  std::vector<double> eps_;
  std::uint64_t master_;
};

inline WegnerResult wegner_exponent(const Ensemble& ens, double lambda0, std::vector<double> eps,
                                    std::size_t samples, std::uint64_t master_seed,
                                    std::size_t workers = 1) {
  const WegnerTask task(ens, lambda0, std::move(eps), master_seed);
  return task.reduce(run_rows(samples, workers, task));
}

// ---------------------------------------------------------------------------
// Eigenfunction correlators and dynamics

/// Sum over eigenvalue clusters in I of ||M_nu(m, n)||.
inline double eigenfunction_correlator(const SpectralDecomposition& sd, EnergyInterval interval,
                                       Vertex m, Vertex n) {
  double q = 0.0;
  for (const auto& pb : projector_blocks(sd, interval, m, n)) q += block_opnorm(pb.m);
  return q;
}

/// 512 points on [0, 64 * 2 pi / width].
inline std::vector<double> default_t_grid(double spectral_width) {
  const double tmax = 64.0 * 2.0 * std::numbers::pi / std::max(spectral_width, 1e-12);
  std::vector<double> t(512);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = tmax * static_cast<double>(i) / static_cast<double>(t.size() - 1);
  return t;
}

/// max over the grid of ||e^{itH_I}(m, n)||; a lower bound for the sup over t.
inline double dynamical_sup(const SpectralDecomposition& sd, EnergyInterval interval, Vertex m,
                            Vertex n, std::span<const double> t_grid) {
  const auto blocks = projector_blocks(sd, interval, m, n);
  double best = 0.0;
  for (double t : t_grid) best = std::max(best, block_opnorm(evolve_block(blocks, sd.k, m == n, t)));
  return best;
}

inline constexpr double kCorrelatorSlack = 1e-8;

struct CorrelatorProfile {
  Vertex m = 0;
  EnergyInterval interval;
  std::vector<TargetStat> targets;  // <Q_I(m, n)> per n
  std::vector<TargetStat> dynamics; // <sup_t ||e^{itH_I}(m, n)||> per n (empty without t grid)
  std::size_t samples = 0;
  double max_correlator = 0.0;           // largest single-sample Q
  std::size_t correlator_violations = 0; // Q > k + slack
  std::size_t dynamic_checks = 0;        // (sample, n != m) pairs
  std::size_t dynamic_violations = 0;    // sup > 2 Q + slack
  std::size_t factor_one_holds = 0;      // sup <= Q + slack
};

/// Per-sample kernel. Row layout: Q(m, n) for every n; then, with a t grid,
/// the grid sup for every n.
class CorrelatorTask {
 public:
  CorrelatorTask(Ensemble ens, EnergyInterval interval, Vertex m, std::vector<double> t_grid,
                 std::uint64_t master_seed)
      : ens_(std::move(ens)), interval_(interval), m_(m), t_grid_(std::move(t_grid)),
        master_(master_seed) {
    if (m >= ens_.topo.size()) throw ConfigError("m out of range", "estimator.m");
  }

  SampleRow operator()(std::uint64_t index) const {
    Rng rng = sample_rng(master_, index);
    const auto sd = hermitian_eig(ens_.draw(rng));
    const std::size_t sites = ens_.topo.size(), k = sd.k;
    std::vector<double> row(t_grid_.empty() ? sites : 2 * sites, 0.0);

    // Phases e^{it nu} - 1 shared by every n.
    std::vector<double> nus;
    for (auto [lo, hi] : eigenvalue_clusters(sd)) {
      double nu = 0.0;
      for (std::size_t c = lo; c < hi; ++c) nu += sd.eigenvalues[c];
      nu /= static_cast<double>(hi - lo);
      if (interval_.contains(nu)) nus.push_back(nu);
    }
    std::vector<cplx> phase(t_grid_.size() * nus.size());
    for (std::size_t ti = 0; ti < t_grid_.size(); ++ti)
      for (std::size_t j = 0; j < nus.size(); ++j)
        phase[ti * nus.size() + j] = std::polar(1.0, t_grid_[ti] * nus[j]) - 1.0;

    for (Vertex n = 0; n < sites; ++n) {
      const auto blocks = projector_blocks(sd, interval_, m_, n);
      double q = 0.0;
      for (const auto& pb : blocks) q += block_opnorm(pb.m);
      row[n] = q;
      if (t_grid_.empty()) continue;
      double best = 0.0;
      CMatrix e(k, k);
      for (std::size_t ti = 0; ti < t_grid_.size(); ++ti) {
        e = n == m_ ? CMatrix::identity(k) : CMatrix(k, k);
        for (std::size_t j = 0; j < blocks.size(); ++j) {
          const cplx f = phase[ti * nus.size() + j];
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) e(a, b) += f * blocks[j].m(a, b);
        }
        best = std::max(best, k == 1 ? std::abs(e(0, 0)) : block_opnorm(e));
      }
      row[sites + n] = best;
    }
    return {std::move(row), 0};
  }

  CorrelatorProfile reduce(std::span<const SampleRow> rows) const {
    CorrelatorProfile out;
    out.m = m_;
    out.interval = interval_;
    out.samples = rows.size();
    const std::size_t sites = ens_.topo.size();
    const double k = static_cast<double>(ens_.model.k);
    const auto dist = distances_from(ens_.topo, m_);
    for (Vertex n = 0; n < sites; ++n) out.targets.push_back({n, dist[n], summarize(column(rows, n))});
    if (!t_grid_.empty())
      for (Vertex n = 0; n < sites; ++n)
        out.dynamics.push_back({n, dist[n], summarize(column(rows, sites + n))});
    for (const auto& r : rows)
      for (Vertex n = 0; n < sites; ++n) {
        const double q = r.values[n];
        out.max_correlator = std::max(out.max_correlator, q);
        if (q > k + kCorrelatorSlack) ++out.correlator_violations;
        if (t_grid_.empty() || n == m_) continue;
        const double d = r.values[sites + n];
        ++out.dynamic_checks;
        if (d > 2.0 * q + kCorrelatorSlack) ++out.dynamic_violations;
        if (d <= q + kCorrelatorSlack) ++out.factor_one_holds;
      }
    return out;
  }

 private:
  Ensemble ens_;
  EnergyInterval interval_;
  Vertex m_;
  std::vector<double> t_grid_;
  std::uint64_t master_;
};

inline CorrelatorProfile correlator_decay_profile(const Ensemble& ens, EnergyInterval interval,
                                                  Vertex m, std::size_t samples,
                                                  std::uint64_t master_seed, std::size_t workers = 1,
                                                  std::vector<double> t_grid = {}) {
  const CorrelatorTask task(ens, interval, m, std::move(t_grid), master_seed);
  return task.reduce(run_rows(samples, workers, task));
}

}  // namespace fmloc

#endif  // FMLOC_ESTIMATORS_HPP
