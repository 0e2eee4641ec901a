#ifndef FMLOC_CORE_STATS_HPP
#define FMLOC_CORE_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fmloc/core/error.hpp"

namespace fmloc {

/// Number of contiguous groups used for median-of-means.
inline constexpr std::size_t kMedianOfMeansGroups = 16;

struct SampleSummary {
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(n)
  double median_of_means = 0.0;
  double mom_error = 0.0;  // std of group means / sqrt(groups)
  std::size_t n = 0;
};

/// Summary statistics of a sample sequence, accumulated in index order.
inline SampleSummary summarize(std::span<const double> xs) {
  SampleSummary out;
  out.n = xs.size();
  if (xs.empty()) return out;

  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                              static_cast<double>(xs.size()));
  }

  const std::size_t groups = std::min(kMedianOfMeansGroups, xs.size());
  std::vector<double> group_means;
  group_means.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = g * xs.size() / groups;
    const std::size_t hi = (g + 1) * xs.size() / groups;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += xs[i];
    group_means.push_back(s / static_cast<double>(hi - lo));
  }
  double gm = 0.0;
  for (double m : group_means) gm += m;
  gm /= static_cast<double>(groups);
  double gss = 0.0;
  for (double m : group_means) gss += (m - gm) * (m - gm);
  if (groups > 1)
    out.mom_error = std::sqrt(gss / static_cast<double>(groups - 1) / static_cast<double>(groups));

  std::sort(group_means.begin(), group_means.end());
  const std::size_t h = groups / 2;
  out.median_of_means =
      groups % 2 == 1 ? group_means[h] : 0.5 * (group_means[h - 1] + group_means[h]);
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;  // 0 when the response has no variance
};

/// Weighted least squares y ~ slope * x + intercept.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y,
                        std::span<const double> w = {}) {
  if (x.size() != y.size() || (!w.empty() && w.size() != x.size()))
    throw ConfigError("fit_line: length mismatch");
  if (x.size() < 2) throw DegenerateFitError("fit_line: need at least two points");

  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sxx += wi * (x[i] - mx) * (x[i] - mx);
    sxy += wi * (x[i] - mx) * (y[i] - my);
    syy += wi * (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw DegenerateFitError("fit_line: abscissae are all equal");

  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double wi = w.empty() ? 1.0 : w[i];
      const double r = y[i] - (fit.slope * x[i] + fit.intercept);
      ss_res += wi * r * r;
    }
    fit.r2 = 1.0 - ss_res / syy;
  }
  return fit;
}

}  // namespace fmloc

#endif  // FMLOC_CORE_STATS_HPP
