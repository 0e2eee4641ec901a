#ifndef FMLOC_RUNNER_RUN_HPP
#define FMLOC_RUNNER_RUN_HPP

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmloc/estimators.hpp"
#include "fmloc/inequality_lab.hpp"
#include "fmloc/runner/config.hpp"
#include "fmloc/runner/record.hpp"
#include "fmloc/sampling.hpp"

namespace fmloc::runner {

// ---------------------------------------------------------------------------
// Checkpoint: samples.jsonl. First line {"digest": ...}; then one
// {"i": index, "r": resamples, "v": [...]} per completed sample, in
// completion order while running and rewritten in index order at the end.

class Checkpoint {
 public:
  Checkpoint(std::filesystem::path path, std::string digest)
      : path_(std::move(path)), digest_(std::move(digest)) {}

  /// Completed rows from an earlier run. A truncated last line (a run killed
  /// mid-write) is ignored; a digest mismatch is an error.
  std::vector<std::optional<SampleRow>> load(std::size_t n) const {
    std::vector<std::optional<SampleRow>> out(n);
    std::ifstream in(path_);
    if (!in) return out;
    std::string line;
    if (!std::getline(in, line)) return out;
    json head;
    try {
      head = json::parse(line);
    } catch (const json::parse_error&) {
      return out;
    }
    if (head.value("digest", std::string()) != digest_)
      throw ConfigError("checkpoint " + path_.string() + " belongs to a different config", "resume");
    while (std::getline(in, line)) {
      json rec;
      try {
        rec = json::parse(line);
        const auto i = rec.at("i").get<std::uint64_t>();
        if (i >= n) continue;
        SampleRow row;
        row.resamples = rec.at("r").get<std::uint32_t>();
        for (const auto& v : rec.at("v")) row.values.push_back(read_real(v));
        out[i] = std::move(row);
      } catch (const json::exception&) {
        break;
      }
    }
    return out;
  }

  void open(bool keep) {
    std::error_code ec;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
    if (!keep) {
      write_atomic(path_, header() + "\n");
    }
    out_.open(path_, std::ios::app);
    if (!out_) throw IoError("cannot open checkpoint '" + path_.string() + "'");
  }

  void append(std::uint64_t i, const SampleRow& row) {
    const std::string line = entry(i, row);
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
  }

  void finalize(std::span<const SampleRow> rows) {
    out_.close();
    std::string text = header() + "\n";
    for (std::size_t i = 0; i < rows.size(); ++i) text += entry(i, rows[i]) + "\n";
    write_atomic(path_, text);
  }

 private:
  std::string header() const { return json{{"digest", digest_}}.dump(); }

  static std::string entry(std::uint64_t i, const SampleRow& row) {
    json v = json::array();
    for (double x : row.values) v.push_back(json_real(x));
    return json{{"i", i}, {"r", row.resamples}, {"v", std::move(v)}}.dump();
  }

  static double read_real(const json& v) {
    if (v.is_number()) return v.get<double>();
    const auto s = v.get<std::string>();
    if (s == "nan") return NAN;
    return s == "-inf" ? -INFINITY : INFINITY;
  }

  std::filesystem::path path_;
  std::string digest_;
  std::ofstream out_;
  std::mutex mu_;
};

/// Runs task(i) for every sample index not already in the checkpoint.
template <class Task>
std::vector<SampleRow> execute(const Task& task, std::size_t n, std::size_t workers,
                               Checkpoint* cp, bool resume, std::size_t& reused) {
  std::vector<SampleRow> rows(n);
  std::vector<std::uint64_t> todo;
  reused = 0;
  if (cp && resume) {
    auto done = cp->load(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) {
        rows[i] = std::move(*done[i]);
        ++reused;
      } else {
        todo.push_back(i);
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) todo.push_back(i);
  }
  if (cp) cp->open(resume && reused > 0);
  parallel_for(todo, workers, [&](std::uint64_t i) {
    rows[i] = task(i);
    if (cp) cp->append(i, rows[i]);
  });
  if (cp) cp->finalize(rows);
  return rows;
}

// ---------------------------------------------------------------------------
// Dispatch

struct RunOptions {
  bool resume = false;
  bool csv = true;
  bool json_out = true;
  bool plot = false;
  bool checkpoint = true;
};

struct RunOutcome {
  ResultRecord record;
  std::filesystem::path dir;
  std::size_t reused_samples = 0;
  bool plotted = false;
  std::string notice;  // set when a requested artifact was skipped
};

namespace detail {

struct Context {
  const ExperimentConfig& cfg;
  const RunOptions& opt;
  Checkpoint* cp;
  std::size_t reused = 0;

  const json& est() const { return cfg.estimator; }
  double real(const char* key, double fallback) const {
    return rational_field(est(), key, "estimator", fallback);
  }
  double real(const char* key) const { return rational_field(est(), key, "estimator"); }
  std::uint64_t integer(const char* key, std::uint64_t fallback) const {
    return integer_field(est(), key, "estimator", fallback);
  }
  std::vector<double> list(const char* key) const {
    return rational_list(require(est(), key, "estimator"), std::string("estimator.") + key);
  }
  Vertex center() const { return cfg.ensemble.topo.size() / 2; }

  template <class Task>
  std::vector<SampleRow> rows(const Task& task) {
    return execute(task, cfg.samples, cfg.workers, cp, opt.resume, reused);
  }
};

/// The instance at sample 0, used for data-dependent defaults.
inline HamiltonianInstance reference_instance(const ExperimentConfig& cfg) {
  Rng rng = sample_rng(cfg.master_seed, 0);
  return cfg.ensemble.draw(rng);
}

inline double spectral_width(const HamiltonianInstance& h) {
  const auto sd = hermitian_eig(h);
  return sd.eigenvalues.back() - sd.eigenvalues.front();
}

inline json fit_summary(std::span<const DistanceBin> bins, std::size_t d_min) {
  try {
    const auto f = fit_exponential_decay(bins, d_min);
    return {{"rate", f.rate}, {"intercept", f.intercept}, {"r2", f.r2}, {"points", f.points}, {"d_min", d_min}};
  } catch (const DegenerateFitError& e) {
    return {{"error", e.what()}, {"d_min", d_min}};
  }
}

inline void distance_table(ResultRecord& rec, std::span<const DistanceBin> bins, std::uint64_t resamples) {
  rec.add_column("distance", true);
  rec.add_column("mean");
  rec.add_column("mom_err");
  rec.add_column("n", true);
  rec.add_column("resamples", true);
  for (const auto& b : bins)
    rec.rows.push_back({static_cast<double>(b.distance), b.mean, b.mom_error,
                        static_cast<double>(b.samples * b.population), static_cast<double>(resamples)});
  rec.plot = PlotScale::semilog_y;
  rec.plot_x = 0;
  rec.plot_y = 1;
}

inline void run_decay(Context& ctx, ResultRecord& rec) {
  const auto& ens = ctx.cfg.ensemble;
  const double s = ctx.real("s", 1.0 / 3.0);
  const double lambda = ctx.real("lambda", 0.0);
  double eps;
  if (ctx.est().contains("eps") && ctx.est().at("eps") == "auto")
    eps = default_eps(reference_instance(ctx.cfg));
  else
    eps = ctx.real("eps", 1e-3);
  const Vertex x0 = ctx.integer("x0", ctx.center());
  const std::size_t d_min = ctx.integer("d_min", 4);
  if (ctx.cfg.samples < 100) throw ConfigError("need at least 100 samples", "samples");

  const MomentProfileTask task(ens, x0, s, lambda, eps, ctx.cfg.master_seed);
  auto est = task.reduce(ctx.rows(task));
  est.config_digest = rec.digest;
  const auto bins = bin_by_distance(est.targets);
  distance_table(rec, bins, est.resamples);
  const auto mc = moment_max_check(est);
  rec.summary = {{"s", s},
                 {"lambda", lambda},
                 {"eps", eps},
                 {"g", json_real(est.g)},
                 {"x0", x0},
                 {"samples", est.samples},
                 {"resamples", est.resamples},
                 {"resample_flag", est.resample_flag},
                 {"s_max", est.s_max},
                 {"outside_theorem_window", est.outside_theorem_window},
                 {"fit", fit_summary(bins, d_min)},
                 {"max_at_source", {{"pass", mc.pass}, {"margin", mc.margin}}}};
}

inline void run_wegner(Context& ctx, ResultRecord& rec) {
  const double lambda0 = ctx.real("lambda0");
  const WegnerTask task(ctx.cfg.ensemble, lambda0, ctx.list("eps_list"), ctx.cfg.master_seed);
  const auto w = task.reduce(ctx.rows(task));
  rec.add_column("eps");
  rec.add_column("mass");
  rec.add_column("mass_err");
  for (std::size_t i = 0; i < w.eps.size(); ++i) rec.rows.push_back({w.eps[i], w.masses[i], w.mass_errors[i]});
  rec.plot = PlotScale::loglog;
  rec.summary = {{"lambda0", lambda0},      {"exponent", w.exponent},
                 {"r2", w.r2},              {"fitted", w.fitted},
                 {"dropped_empty", w.dropped_empty}, {"narrow_span", w.narrow_span},
                 {"few_eigenvalues", w.few_eigenvalues}, {"samples", ctx.cfg.samples}};
}

inline void run_ids(Context& ctx, ResultRecord& rec) {
  const double lo = ctx.real("lo"), hi = ctx.real("hi");
  const IdsTask task(ctx.cfg.ensemble, lo, hi, ctx.integer("bins", 20), ctx.cfg.master_seed);
  const auto h = task.reduce(ctx.rows(task));
  rec.add_column("lo");
  rec.add_column("hi");
  rec.add_column("mass");
  rec.add_column("mass_err");
  for (std::size_t b = 0; b < h.masses.size(); ++b)
    rec.rows.push_back({h.edges[b], h.edges[b + 1], h.masses[b], h.mass_errors[b]});
  rec.summary = {{"underflow", h.underflow}, {"overflow", h.overflow}, {"total", h.total()},
                 {"samples", ctx.cfg.samples}};
}

inline void run_correlator(Context& ctx, ResultRecord& rec, bool dynamics) {
  const auto iv = ctx.list("interval");
  if (iv.size() != 2 || !(iv[0] <= iv[1])) throw ConfigError("interval is [lo, hi]", "estimator.interval");
  const EnergyInterval interval{iv[0], iv[1]};
  const Vertex m = ctx.integer("m", ctx.center());
  const std::size_t d_min = ctx.integer("d_min", 4);
  std::vector<double> grid;
  if (dynamics) {
    const std::size_t points = ctx.integer("t_points", 512);
    if (ctx.est().contains("t_max")) {
      const double t_max = ctx.real("t_max");
      if (points < 2 || !(t_max > 0.0)) throw ConfigError("need t_points >= 2 and t_max > 0", "estimator.t_max");
      for (std::size_t i = 0; i < points; ++i)
        grid.push_back(t_max * static_cast<double>(i) / static_cast<double>(points - 1));
    } else {
      grid = default_t_grid(spectral_width(reference_instance(ctx.cfg)));
    }
  }
  const CorrelatorTask task(ctx.cfg.ensemble, interval, m, grid, ctx.cfg.master_seed);
  const auto p = task.reduce(ctx.rows(task));
  const auto bins = bin_by_distance(dynamics ? p.dynamics : p.targets);
  distance_table(rec, bins, 0);
  if (dynamics) {
    rec.add_column("correlator_mean");
    const auto q = bin_by_distance(p.targets);
    for (std::size_t i = 0; i < rec.rows.size(); ++i) rec.rows[i].push_back(q.at(i).mean);
  }
  rec.summary = {{"interval", {interval.lo, interval.hi}},
                 {"m", m},
                 {"samples", p.samples},
                 {"fit", fit_summary(bins, d_min)},
                 {"max_correlator", p.max_correlator},
                 {"correlator_violations", p.correlator_violations}};
  if (dynamics)
    rec.summary.update({{"t_points", grid.size()},
                        {"t_max", grid.empty() ? 0.0 : grid.back()},
                        {"dynamic_checks", p.dynamic_checks},
                        {"dynamic_violations", p.dynamic_violations},
                        {"factor_one_holds", p.factor_one_holds}});
}

inline void run_inequalities(Context& ctx, ResultRecord& rec) {
  const auto& cfg = ctx.cfg;
  const auto& ens = cfg.ensemble;
  const std::string check = require(ctx.est(), "check", "estimator").get<std::string>();
  rec.summary["check"] = check;
  if (check == "prop1") {
    const double s = ctx.real("s", 1.0 / 3.0), lambda = ctx.real("lambda", 0.0), eps = ctx.real("eps", 1e-3);
    const auto& pairs = require(ctx.est(), "pairs", "estimator");
    rec.add_column("x", true);
    rec.add_column("y", true);
    for (const char* c : {"lhs", "lhs_err", "rhs", "rhs_err"}) rec.add_column(c);
    rec.add_column("pass", true);
    rec.add_column("violations", true);
    bool all = true;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto xy = offset_list(pairs[i], "estimator.pairs[" + std::to_string(i) + "]");
      if (xy.size() != 2 || xy[0] < 0 || xy[1] < 0) throw ConfigError("pairs are [x, y]", "estimator.pairs");
      const auto c = prop1_step_check(ens, static_cast<Vertex>(xy[0]), static_cast<Vertex>(xy[1]), s, lambda, eps,
                                      cfg.samples, derive_sample_seed(cfg.master_seed, i), cfg.workers);
      all = all && c.pass;
      rec.rows.push_back({static_cast<double>(xy[0]), static_cast<double>(xy[1]), c.lhs.mean, c.lhs.std_error,
                          c.rhs.mean, c.rhs.std_error, c.pass ? 1.0 : 0.0,
                          static_cast<double>(c.sample_violations)});
    }
    rec.summary.update({{"s", s}, {"lambda", lambda}, {"eps", eps}, {"all_pass", all}});
  } else if (check == "lemma1") {
    const double s = ctx.real("s", 1.0 / 3.0), eps = ctx.real("eps", 1e-3);
    const auto grid = ctx.list("lambda_grid");
    const auto scan = lemma1_ratio(ens, ctx.integer("x", 0), ctx.integer("y", 0), s, grid, eps, cfg.samples,
                                   cfg.master_seed, cfg.workers);
    for (const char* c : {"lambda", "numerator", "denominator", "ratio", "skipped"}) rec.add_column(c);
    for (const auto& p : scan.points)
      rec.rows.push_back({p.lambda, p.numerator.mean, p.denominator.mean, p.ratio, p.skipped ? 1.0 : 0.0});
    rec.summary.update({{"s", s}, {"min_ratio", json_real(scan.min_ratio)}, {"outside_window", scan.outside_window}});
  } else if (check == "vinv") {
    const double s = ctx.real("s", 0.5);
    for (const char* c : {"lambda", "moment", "std_err", "scaled"}) rec.add_column(c);
    std::uint64_t total = 0;
    const auto grid = ctx.list("lambda_grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::uint64_t res = 0;
      const auto m = vinv_moment(ens.model, ens.disorder, grid[i], s, cfg.samples,
                                 derive_sample_seed(cfg.master_seed, i), cfg.workers, &res);
      total += res;
      rec.rows.push_back({grid[i], m.mean, m.std_error, m.mean * std::pow(1.0 + std::abs(grid[i]), s)});
    }
    rec.summary.update({{"s", s}, {"resamples", total}});
  } else if (check == "comparability") {
    const std::size_t l = ctx.integer("l", 1), m = ctx.integer("m", 1);
    const double s = ctx.real("s", 0.15), r = ctx.real("r", 0.15), scale = ctx.real("param_scale", 5.0);
    const auto scan = comparability_scan(ens.disorder, l, m, s, r, cfg.samples, scale, cfg.master_seed, cfg.workers);
    rec.add_column("draw", true);
    for (std::size_t j = 0; j < l; ++j) {
      rec.add_column("re_a" + std::to_string(j + 1));
      rec.add_column("im_a" + std::to_string(j + 1));
    }
    for (std::size_t j = 0; j < m; ++j) {
      rec.add_column("re_b" + std::to_string(j + 1));
      rec.add_column("im_b" + std::to_string(j + 1));
    }
    rec.add_column("lhs");
    rec.add_column("rhs");
    rec.add_column("ratio");
    for (const auto& c : scan.records) {
      std::vector<double> row{static_cast<double>(c.draw)};
      for (auto z : c.a) row.insert(row.end(), {z.real(), z.imag()});
      for (auto z : c.b) row.insert(row.end(), {z.real(), z.imag()});
      row.insert(row.end(), {c.integral, c.target, c.ratio});
      rec.rows.push_back(std::move(row));
    }
    rec.summary.update({{"ratio_min", json_real(scan.ratio_min)},
                        {"ratio_max", json_real(scan.ratio_max)},
                        {"regime_ok", scan.regime_ok},
                        {"failures", scan.failures.size()}});
  } else if (check == "reverse_holder") {
    const double s = ctx.real("s", 0.25);
    const std::string sampler = ctx.est().value("sampler", std::string("cramer_alloy"));
    RationalSampler q;
    if (sampler == "cramer_alloy")
      q = cramer_alloy_sampler(ctx.real("g", 2.0));
    else if (sampler == "polynomial")
      q = random_polynomial_ratio_sampler(ctx.integer("variables", 2), ctx.integer("degree", 2));
    else
      throw ConfigError("unknown sampler '" + sampler + "'", "estimator.sampler");
    const auto res = reverse_holder_check(q, ens.disorder, s, cfg.samples, ctx.integer("inner", 2000),
                                          cfg.master_seed, cfg.workers);
    rec.add_column("trial", true);
    rec.add_column("constant");
    for (std::size_t i = 0; i < res.constants.size(); ++i)
      rec.rows.push_back({static_cast<double>(i), res.constants[i]});
    rec.summary.update({{"s", s}, {"worst_constant", res.worst_constant}, {"failures", res.failures}});
  } else {
    throw ConfigError("unknown check '" + check + "'", "estimator.check");
  }
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace detail

/// Builds the record without touching the filesystem, except for the
/// checkpoint when `cp` is given.
inline ResultRecord compute(const ExperimentConfig& cfg, const RunOptions& opt = {},
                            Checkpoint* cp = nullptr, std::size_t* reused = nullptr) {
  ResultRecord rec;
  rec.kind = cfg.kind;
  rec.digest = config_digest(cfg);
  rec.config = json::parse(canonical_dump(cfg.document));
  detail::Context ctx{cfg, opt, cfg.kind == "inequalities" ? nullptr : cp};
  if (cfg.kind == "decay") detail::run_decay(ctx, rec);
  else if (cfg.kind == "wegner") detail::run_wegner(ctx, rec);
  else if (cfg.kind == "ids") detail::run_ids(ctx, rec);
  else if (cfg.kind == "correlator") detail::run_correlator(ctx, rec, false);
  else if (cfg.kind == "dynamical") detail::run_correlator(ctx, rec, true);
  else detail::run_inequalities(ctx, rec);
  rec.summary["master_seed"] = cfg.master_seed;
  if (reused) *reused = ctx.reused;
  return rec;
}

/// Full run: computes and writes results.json / series.csv / plot.svg and
/// meta/timing.json under cfg.output.
inline RunOutcome run(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  const std::string started = detail::utc_now();
  RunOutcome out;
  out.dir = cfg.output;
  std::optional<Checkpoint> cp;
  if (opt.checkpoint) cp.emplace(out.dir / "samples.jsonl", config_digest(cfg));
  out.record = compute(cfg, opt, cp ? &*cp : nullptr, &out.reused_samples);
  if (opt.json_out) emit_json(out.record, out.dir / "results.json");
  if (opt.csv) emit_csv(out.record, out.dir / "series.csv");
  if (opt.plot) {
    out.plotted = emit_plot(out.record, out.dir / "plot.svg");
    if (!out.plotted) out.notice = "kind '" + cfg.kind + "' has no plottable series; plot skipped";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_atomic(out.dir / "meta" / "timing.json",
               json{{"started", started}, {"wall_seconds", secs}, {"workers", resolve_workers(cfg.workers)},
                    {"reused_samples", out.reused_samples}}
                       .dump(2) +
                   "\n");
  return out;
}

}  // namespace fmloc::runner

#endif  // FMLOC_RUNNER_RUN_HPP
