#ifndef FMLOC_NUMERICS_HPP
#define FMLOC_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fmloc/core/dense.hpp"
#include "fmloc/core/error.hpp"
#include "fmloc/core/lu.hpp"
#include "fmloc/core/opnorm.hpp"
#include "fmloc/model.hpp"

namespace fmloc {

/// Implicit-QL iterations allowed per eigenvalue before giving up.
inline constexpr int kQlIterationCap = 50;

/// FNV-1a over the matrix bytes; identifies an instance in diagnostics.
inline std::uint64_t instance_digest(const HamiltonianInstance& h) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const cplx& z : h.matrix.data()) {
    unsigned char bytes[sizeof(cplx)];
    std::memcpy(bytes, &z, sizeof(cplx));
    for (unsigned char b : bytes) {
      hash ^= b;
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns of U) of
/// one instance, with the block layout needed to read site components.
struct SpectralDecomposition {
  std::vector<double> eigenvalues;
  CMatrix eigenvectors;
  std::size_t k = 1;
  std::uint64_t origin = 0;

  std::size_t dim() const noexcept { return eigenvalues.size(); }
  double spectral_radius() const {
    return eigenvalues.empty()
               ? 0.0
               : std::max(std::abs(eigenvalues.front()), std::abs(eigenvalues.back()));
  }
};

namespace detail {

// Householder reduction of a Hermitian matrix to Hermitian tridiagonal form,
// A = Q T Q*. On return `a` holds T in its three central diagonals and `q`
// the accumulated unitary.
inline void householder_tridiagonalize(CMatrix& a, CMatrix& q) {
  const std::size_t n = a.rows();
  q = CMatrix::identity(n);
  std::vector<cplx> u(n), w(n);
  for (std::size_t j = 0; j + 2 < n; ++j) {
    double xnorm2 = 0.0;
    for (std::size_t i = j + 1; i < n; ++i) xnorm2 += std::norm(a(i, j));
    const double tail2 = xnorm2 - std::norm(a(j + 1, j));
    if (tail2 == 0.0) continue;  // column already tridiagonal
    const double xnorm = std::sqrt(xnorm2);
    const cplx x0 = a(j + 1, j);
    const cplx phase = std::abs(x0) > 0.0 ? x0 / std::abs(x0) : cplx(1.0);
    const cplx alpha = -phase * xnorm;

    // u = (x - alpha e1) / ||x - alpha e1||, H = I - 2 u u*.
    std::fill(u.begin(), u.end(), cplx{});
    for (std::size_t i = j + 1; i < n; ++i) u[i] = a(i, j);
    u[j + 1] -= alpha;
    double unorm2 = 0.0;
    for (std::size_t i = j + 1; i < n; ++i) unorm2 += std::norm(u[i]);
    const double inv_unorm = 1.0 / std::sqrt(unorm2);
    for (std::size_t i = j + 1; i < n; ++i) u[i] *= inv_unorm;

    // Trailing block: A22 <- A22 - 2 u q* - 2 q u*, with w = A22 u and
    // q = w - (u* w) u.
    for (std::size_t r = j + 1; r < n; ++r) {
      cplx s{};
      for (std::size_t c = j + 1; c < n; ++c) s += a(r, c) * u[c];
      w[r] = s;
    }
    cplx uw{};
    for (std::size_t i = j + 1; i < n; ++i) uw += std::conj(u[i]) * w[i];
    const double c_real = uw.real();
    for (std::size_t i = j + 1; i < n; ++i) w[i] -= c_real * u[i];
    for (std::size_t r = j + 1; r < n; ++r)
      for (std::size_t c = j + 1; c < n; ++c)
        a(r, c) -= 2.0 * (u[r] * std::conj(w[c]) + w[r] * std::conj(u[c]));
    for (std::size_t r = j + 1; r < n; ++r) a(r, r) = a(r, r).real();

    a(j + 1, j) = alpha;
    a(j, j + 1) = std::conj(alpha);
    for (std::size_t i = j + 2; i < n; ++i) a(i, j) = a(j, i) = cplx{};

    // Q <- Q H.
    for (std::size_t r = 0; r < n; ++r) {
      cplx s{};
      for (std::size_t c = j + 1; c < n; ++c) s += q(r, c) * u[c];
      for (std::size_t c = j + 1; c < n; ++c) q(r, c) -= 2.0 * s * std::conj(u[c]);
    }
  }
}

// Implicit-shift QL on a real symmetric tridiagonal matrix (diagonal d,
// sub-diagonal e with e[i] coupling i and i+1), rotating the columns of z.
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e, CMatrix& z,
                           std::uint64_t origin) {
  const std::size_t n = d.size();
  if (n == 0) return;
  e.resize(n);
  e[n - 1] = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(d[i]) || !std::isfinite(e[i]))
      throw NumericalError("hermitian_eig: non-finite entry in instance " + std::to_string(origin));
  double f = 0.0, tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m + 1 < n && !(std::abs(e[m]) <= eps * tst1)) ++m;
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > kQlIterationCap)
          throw NumericalError("hermitian_eig: QL did not converge for instance " +
                               std::to_string(origin));
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          for (std::size_t row = 0; row < z.rows(); ++row) {
            const cplx zh = z(row, ii + 1);
            z(row, ii + 1) = s * z(row, ii) + c * zh;
            z(row, ii) = c * z(row, ii) - s * zh;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (!(std::abs(e[l]) <= eps * tst1));
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace detail

/// Dense Hermitian eigendecomposition: Householder tridiagonalization, a
/// diagonal phase change to a real tridiagonal, then implicit-shift QL with
/// accumulated transforms.
inline SpectralDecomposition hermitian_eig(const CMatrix& matrix, std::size_t k = 1,
                                           std::uint64_t origin = 0) {
  const std::size_t n = matrix.rows();
  if (n != matrix.cols()) throw ConfigError("hermitian_eig: matrix must be square");
  SpectralDecomposition sd;
  sd.k = k;
  sd.origin = origin;
  if (n == 0) return sd;

  CMatrix a = matrix;
  CMatrix q;
  detail::householder_tridiagonalize(a, q);

  // T = D T_real D* with D = diag(p), p_{j+1} = p_j e_j / |e_j|.
  std::vector<double> d(n), e(n, 0.0);
  std::vector<cplx> phase(n, cplx(1.0));
  for (std::size_t j = 0; j < n; ++j) d[j] = a(j, j).real();
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const cplx ej = a(j + 1, j);
    const double m = std::abs(ej);
    e[j] = m;
    phase[j + 1] = m > 0.0 ? phase[j] * (ej / m) : phase[j];
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) q(r, c) *= phase[c];

  detail::tridiagonal_ql(d, e, q, origin);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });
  sd.eigenvalues.resize(n);
  sd.eigenvectors = CMatrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    sd.eigenvalues[c] = d[order[c]];
    for (std::size_t r = 0; r < n; ++r) sd.eigenvectors(r, c) = q(r, order[c]);
  }
  return sd;
}

inline SpectralDecomposition hermitian_eig(const HamiltonianInstance& h) {
  return hermitian_eig(h.matrix, h.k, instance_digest(h));
}

/// k x k block G_z(x, y) of (H - z)^{-1}, z = lambda + i eps.
struct GreenBlock {
  CMatrix block;
  cplx z;
  Vertex x = 0;
  Vertex y = 0;
  double residual = 0.0;  // max |(H - z) X - E_y| of the column solve
};

/// Factorized shifted operator H - z, reusable for several right-hand sides.
class ShiftedResolvent {
 public:
  /// nullopt signals a singular factorization (resample).
  static std::optional<ShiftedResolvent> make(const HamiltonianInstance& h, cplx z) {
    CMatrix a = h.matrix;
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) -= z;
    auto lu = LuFactor::factor(a);
    if (!lu) return std::nullopt;
    return ShiftedResolvent(h, z, std::move(*lu));
  }

  cplx z() const noexcept { return z_; }

  /// G(., y): the k columns of the inverse belonging to site y.
  CMatrix column(Vertex y) const { return lu_.solve(unit_columns(y)); }

  /// G(x, .) as the transpose of the solution of (H - z)^T Y = E_x.
  /// Row block y of the result is G(x, y)^T.
  CMatrix row_transposed(Vertex x) const { return lu_.solve_transposed(unit_columns(x)); }

  /// All blocks G(x, y) for y = 0..N-1.
  std::vector<CMatrix> row_blocks(Vertex x) const {
    const CMatrix yt = row_transposed(x);
    std::vector<CMatrix> out(sites_);
    for (Vertex y = 0; y < sites_; ++y) {
      CMatrix b(k_, k_);
      for (std::size_t i = 0; i < k_; ++i)
        for (std::size_t j = 0; j < k_; ++j) b(i, j) = yt(y * k_ + j, i);
      out[y] = std::move(b);
    }
    return out;
  }

 private:
  ShiftedResolvent(const HamiltonianInstance& h, cplx z, LuFactor lu)
      : z_(z), k_(h.k), sites_(h.sites), lu_(std::move(lu)) {}

  CMatrix unit_columns(Vertex site) const {
    if (site >= sites_) throw ConfigError("site out of range");
    CMatrix e(sites_ * k_, k_);
    for (std::size_t i = 0; i < k_; ++i) e(site * k_ + i, i) = 1.0;
    return e;
  }

  cplx z_;
  std::size_t k_;
  std::size_t sites_;
  LuFactor lu_;
};

/// Max-norm residual of (H - z) X - E for a column solve X of site y.
inline double solve_residual(const HamiltonianInstance& h, cplx z, Vertex y, const CMatrix& x) {
  double r = 0.0;
  for (std::size_t i = 0; i < h.dim(); ++i)
    for (std::size_t c = 0; c < h.k; ++c) {
      cplx s = -z * x(i, c);
      for (std::size_t l = 0; l < h.dim(); ++l) s += h.matrix(i, l) * x(l, c);
      if (i == y * h.k + c) s -= 1.0;
      r = std::max(r, std::abs(s));
    }
  return r;
}

/// G_{lambda + i eps}(x, y), or nullopt when H - z is numerically singular
/// (only possible at eps = 0).
inline std::optional<GreenBlock> resolvent_block(const HamiltonianInstance& h, double lambda,
                                                 double eps, Vertex x, Vertex y) {
  if (eps < 0.0) throw ConfigError("resolvent_block: eps must be >= 0");
  if (x >= h.sites || y >= h.sites) throw ConfigError("resolvent_block: site out of range");
  const cplx z(lambda, eps);
  auto res = ShiftedResolvent::make(h, z);
  if (!res) return std::nullopt;
  const CMatrix col = res->column(y);
  GreenBlock gb;
  gb.block = block(col, x * h.k, 0, h.k, h.k);
  gb.z = z;
  gb.x = x;
  gb.y = y;
  gb.residual = solve_residual(h, z, y, col);
  return gb;
}

/// Projector block of one (clustered) eigenvalue: M = sum psi(m) psi(n)*.
struct ProjectorBlock {
  double nu = 0.0;
  CMatrix m;
};

/// Closed energy window [lo, hi]; empty when lo > hi.
struct EnergyInterval {
  double lo = 0.0;
  double hi = -1.0;
  bool contains(double e) const { return e >= lo && e <= hi; }
  bool empty() const { return lo > hi; }
};

/// Eigenvalue clusters: consecutive eigenvalues within 1e-8 (1 + ||H||)
/// share one entry.
inline std::vector<std::pair<std::size_t, std::size_t>> eigenvalue_clusters(
    const SpectralDecomposition& sd) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const double tol = 1e-8 * (1.0 + sd.spectral_radius());
  std::size_t start = 0;
  for (std::size_t i = 1; i <= sd.dim(); ++i)
    if (i == sd.dim() || sd.eigenvalues[i] - sd.eigenvalues[i - 1] > tol) {
      out.emplace_back(start, i);
      start = i;
    }
  return out;
}

inline std::vector<ProjectorBlock> projector_blocks(const SpectralDecomposition& sd,
                                                    EnergyInterval interval, Vertex m, Vertex n) {
  const std::size_t k = sd.k;
  if ((m + 1) * k > sd.dim() || (n + 1) * k > sd.dim())
    throw ConfigError("projector_blocks: site out of range");
  std::vector<ProjectorBlock> out;
  for (auto [lo, hi] : eigenvalue_clusters(sd)) {
    double nu = 0.0;
    for (std::size_t c = lo; c < hi; ++c) nu += sd.eigenvalues[c];
    nu /= static_cast<double>(hi - lo);
    if (!interval.contains(nu)) continue;
    ProjectorBlock pb{nu, CMatrix(k, k)};
    for (std::size_t c = lo; c < hi; ++c)
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
          pb.m(i, j) += sd.eigenvectors(m * k + i, c) * std::conj(sd.eigenvectors(n * k + j, c));
    out.push_back(std::move(pb));
  }
  return out;
}

/// e^{itH_I}(m, n) = delta_mn I + sum_{nu in I} (e^{it nu} - 1) M_nu, from
/// precomputed projector blocks of (m, n).
inline CMatrix evolve_block(std::span<const ProjectorBlock> blocks, std::size_t k, bool same_site,
                            double t) {
  CMatrix out = same_site ? CMatrix::identity(k) : CMatrix(k, k);
  for (const auto& pb : blocks) {
    const cplx f = std::polar(1.0, t * pb.nu) - 1.0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) out(i, j) += f * pb.m(i, j);
  }
  return out;
}

inline CMatrix evolve_block(const SpectralDecomposition& sd, EnergyInterval interval, double t,
                            Vertex m, Vertex n) {
  const auto blocks = projector_blocks(sd, interval, m, n);
  return evolve_block(blocks, sd.k, m == n, t);
}

}  // namespace fmloc

#endif  // FMLOC_NUMERICS_HPP
