#ifndef FMLOC_DISORDER_HPP
#define FMLOC_DISORDER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fmloc/core/error.hpp"
#include "fmloc/core/rng.hpp"
#include "fmloc/core/stats.hpp"

namespace fmloc {

/// Stand-in for "every moment is finite". Used as a number, never as infinity.
inline constexpr double kAllMoments = 1e9;

enum class DisorderFamily { uniform, gaussian, power_regular, heavy_tail };

/// Single-site distribution together with its regularity exponent alpha and
/// moment order q.
///
/// Family table:
///   uniform(a, b)         alpha = 1, all q                density 1/(b-a) on [a, b]
///   gaussian(mean, sigma) alpha = 1, all q
///   power_regular(alpha)  v = sign(u)|u|^(1/alpha), u ~ U(-1, 1); density
///                         (alpha/2)|v|^(alpha-1) on [-1, 1], exactly
///                         alpha-regular at 0, all q
///   heavy_tail(q0)        density (q0/2)/(1+|v|)^(1+q0); alpha = 1, moments
///                         finite only strictly below q0 (declared_q = q0)
///
/// Draws consume a fixed number of 64-bit words: gaussian 2, all others 1.
struct DisorderSpec {
  DisorderFamily family = DisorderFamily::uniform;
  std::vector<double> params{-1.0, 1.0};
  double declared_alpha = 1.0;
  double declared_q = kAllMoments;

  /// True when the q-th absolute moment is finite.
  bool has_moment(double q) const {
    if (family == DisorderFamily::heavy_tail) return q < declared_q;
    return q <= declared_q;
  }
};

inline std::string_view family_name(DisorderFamily f) {
  switch (f) {
    case DisorderFamily::uniform: return "uniform";
    case DisorderFamily::gaussian: return "gaussian";
    case DisorderFamily::power_regular: return "power_regular";
    case DisorderFamily::heavy_tail: return "heavy_tail";
  }
  return "?";
}

inline DisorderFamily parse_family(std::string_view name) {
  if (name == "uniform") return DisorderFamily::uniform;
  if (name == "gaussian") return DisorderFamily::gaussian;
  if (name == "power_regular") return DisorderFamily::power_regular;
  if (name == "heavy_tail") return DisorderFamily::heavy_tail;
  throw ConfigError("unknown disorder family '" + std::string(name) + "'", "disorder.family");
}

inline DisorderSpec make_spec(DisorderFamily family, std::vector<double> params) {
  auto need = [&](std::size_t n) {
    if (params.size() != n)
      throw ConfigError(std::string(family_name(family)) + " takes " + std::to_string(n) +
                            " parameter(s)",
                        "disorder.params");
  };
  for (double p : params)
    if (!std::isfinite(p)) throw ConfigError("parameters must be finite", "disorder.params");

  DisorderSpec spec;
  spec.family = family;
  switch (family) {
    case DisorderFamily::uniform:
      need(2);
      if (!(params[0] < params[1])) throw ConfigError("uniform needs a < b", "disorder.params");
      spec.declared_alpha = 1.0;
      spec.declared_q = kAllMoments;
      break;
    case DisorderFamily::gaussian:
      need(2);
      if (!(params[1] > 0.0)) throw ConfigError("gaussian needs sigma > 0", "disorder.params");
      spec.declared_alpha = 1.0;
      spec.declared_q = kAllMoments;
      break;
    case DisorderFamily::power_regular:
      need(1);
      if (!(params[0] > 0.0 && params[0] <= 1.0))
        throw ConfigError("power_regular needs 0 < alpha <= 1", "disorder.params");
      spec.declared_alpha = params[0];
      spec.declared_q = kAllMoments;
      break;
    case DisorderFamily::heavy_tail:
      need(1);
      if (!(params[0] > 0.0)) throw ConfigError("heavy_tail needs q0 > 0", "disorder.params");
      spec.declared_alpha = 1.0;
      spec.declared_q = params[0];
      break;
  }
  spec.params = std::move(params);
  return spec;
}

inline DisorderSpec make_spec(std::string_view family, std::vector<double> params) {
  return make_spec(parse_family(family), std::move(params));
}

inline double sample(const DisorderSpec& spec, Rng& rng) {
  switch (spec.family) {
    case DisorderFamily::uniform:
      return rng.uniform(spec.params[0], spec.params[1]);
    case DisorderFamily::gaussian: {
      // Box-Muller, cosine branch only: exactly two words per draw.
      const double u1 = rng.uniform01_open_low();
      const double u2 = rng.uniform01();
      return spec.params[0] +
             spec.params[1] * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    case DisorderFamily::power_regular: {
      const double u = 2.0 * rng.uniform01() - 1.0;
      const double mag = std::pow(std::abs(u), 1.0 / spec.params[0]);
      return u < 0.0 ? -mag : mag;
    }
    case DisorderFamily::heavy_tail: {
      // P(|v| > t) = (1 + t)^(-q0); sign from the lowest bit of the same word.
      const std::uint64_t word = rng.next_u64();
      const double w = static_cast<double>((word >> 11) + 1) * 0x1.0p-53;
      const double mag = std::pow(w, -1.0 / spec.params[0]) - 1.0;
      return (word & 1U) != 0U ? -mag : mag;
    }
  }
  return 0.0;
}

/// Probability density of the law (used by quadrature). Zero outside support.
inline double density(const DisorderSpec& spec, double v) {
  switch (spec.family) {
    case DisorderFamily::uniform:
      return (v >= spec.params[0] && v <= spec.params[1]) ? 1.0 / (spec.params[1] - spec.params[0])
                                                          : 0.0;
    case DisorderFamily::gaussian: {
      const double z = (v - spec.params[0]) / spec.params[1];
      return std::exp(-0.5 * z * z) / (spec.params[1] * std::sqrt(2.0 * std::numbers::pi));
    }
    case DisorderFamily::power_regular: {
      const double a = spec.params[0];
      const double m = std::abs(v);
      if (m > 1.0) return 0.0;
      if (a == 1.0) return 0.5;
      return 0.5 * a * std::pow(m, a - 1.0);
    }
    case DisorderFamily::heavy_tail: {
      const double q0 = spec.params[0];
      return 0.5 * q0 * std::pow(1.0 + std::abs(v), -1.0 - q0);
    }
  }
  return 0.0;
}

/// Closed support interval, or (-inf, inf).
struct Support {
  double lo;
  double hi;
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
};

inline Support support(const DisorderSpec& spec) {
  switch (spec.family) {
    case DisorderFamily::uniform: return {spec.params[0], spec.params[1]};
    case DisorderFamily::power_regular: return {-1.0, 1.0};
    default: return {-HUGE_VAL, HUGE_VAL};
  }
}

/// Points where the density is singular or non-smooth.
inline std::vector<double> density_breakpoints(const DisorderSpec& spec) {
  switch (spec.family) {
    case DisorderFamily::power_regular:
    case DisorderFamily::heavy_tail: return {0.0};
    default: return {};
  }
}

/// Exact E|v|^p where the family admits a closed form; an upper bound for the
/// shifted gaussian. Requires has_moment(p).
inline double absolute_moment_bound(const DisorderSpec& spec, double p) {
  if (p < 0.0) throw ConfigError("moment order must be >= 0");
  if (p == 0.0) return 1.0;
  switch (spec.family) {
    case DisorderFamily::uniform: {
      const double a = spec.params[0], b = spec.params[1];
      // integral of |v|^p over [a, b] divided by (b - a)
      auto prim = [p](double x) { return std::copysign(std::pow(std::abs(x), p + 1.0), x) / (p + 1.0); };
      return (prim(b) - prim(a)) / (b - a);
    }
    case DisorderFamily::gaussian: {
      const double m = std::abs(spec.params[0]), sigma = spec.params[1];
      const double central = std::pow(sigma, p) * std::pow(2.0, p / 2.0) *
                             std::tgamma((p + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
      if (m == 0.0) return central;
      return std::pow(2.0, std::max(p - 1.0, 0.0)) * (std::pow(m, p) + central);
    }
    case DisorderFamily::power_regular: {
      const double a = spec.params[0];
      return a / (a + p);
    }
    case DisorderFamily::heavy_tail: {
      const double q0 = spec.params[0];
      if (!(p < q0)) throw ConfigError("heavy_tail moment of order >= q0 is infinite");
      return p * std::tgamma(p) * std::tgamma(q0 - p) / std::tgamma(q0);
    }
  }
  return 0.0;
}

/// Empirical C_A1: max over the grids of mu_n[t - eps, t + eps] / eps^alpha.
inline double regularity_probe(const DisorderSpec& spec, double alpha,
                               std::span<const double> t_grid, std::span<const double> eps_grid,
                               std::size_t n, Rng& rng) {
  if (t_grid.empty() || eps_grid.empty()) throw ConfigError("regularity_probe: empty grid");
  if (n < 10000) throw ConfigError("regularity_probe: need n >= 1e4 draws");
  std::vector<double> draws(n);
  for (auto& x : draws) x = sample(spec, rng);
  std::sort(draws.begin(), draws.end());

  double worst = 0.0;
  for (double t : t_grid)
    for (double eps : eps_grid) {
      if (!(eps > 0.0)) throw ConfigError("regularity_probe: eps must be > 0");
      const auto lo = std::lower_bound(draws.begin(), draws.end(), t - eps);
      const auto hi = std::upper_bound(draws.begin(), draws.end(), t + eps);
      const double mass = static_cast<double>(hi - lo) / static_cast<double>(n);
      worst = std::max(worst, mass / std::pow(eps, alpha));
    }
  return worst;
}

struct MomentProbe {
  double value = 0.0;
  double std_error = 0.0;
  bool unstable = false;  // q at or beyond the family's finite-moment range
};

/// Empirical <|v|^q>.
inline MomentProbe moment_probe(const DisorderSpec& spec, double q, std::size_t n, Rng& rng) {
  if (n < 10000) throw ConfigError("moment_probe: need n >= 1e4 draws");
  std::vector<double> xs(n);
  for (auto& x : xs) x = std::pow(std::abs(sample(spec, rng)), q);
  const auto s = summarize(xs);
  return {s.mean, s.std_error, !spec.has_moment(q)};
}

}  // namespace fmloc

#endif  // FMLOC_DISORDER_HPP
