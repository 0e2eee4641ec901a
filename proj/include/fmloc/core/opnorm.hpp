#ifndef FMLOC_CORE_OPNORM_HPP
#define FMLOC_CORE_OPNORM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fmloc/core/dense.hpp"
#include "fmloc/core/error.hpp"

namespace fmloc {

/// Largest block size accepted by the k x k kernels.
inline constexpr std::size_t kMaxBlock = 16;

/// Eigenvalues of a small Hermitian matrix by cyclic Jacobi rotations,
/// ascending. Only the upper triangle is read.
inline std::vector<double> jacobi_eigenvalues(CMatrix a) {
  const std::size_t n = a.rows();
  if (n != a.cols()) throw ConfigError("jacobi_eigenvalues: matrix must be square");
  if (n == 0) return {};
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = a(i, i).real();
    for (std::size_t j = i + 1; j < n; ++j) a(j, i) = std::conj(a(i, j));
  }

  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0, diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += std::norm(a(i, i));
      for (std::size_t j = i + 1; j < n; ++j) off += std::norm(a(i, j));
    }
    if (off <= 1e-34 * diag || off == 0.0) break;

    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double mag = std::abs(a(p, q));
        if (mag == 0.0) continue;
        // Phase rotation makes a(p, q) real, then a real Jacobi rotation.
        const cplx phase = std::conj(a(p, q)) / mag;  // e^{-i phi}
        const double app = a(p, p).real(), aqq = a(q, q).real();
        const double theta = (aqq - app) / (2.0 * mag);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // J = diag(1, phase) * [[c, s], [-s, c]] on the (p, q) plane.
        const cplx jpp = c, jpq = s, jqp = -s * phase, jqq = c * phase;
        for (std::size_t r = 0; r < n; ++r) {
          const cplx xp = a(r, p), xq = a(r, q);
          a(r, p) = xp * jpp + xq * jqp;
          a(r, q) = xp * jpq + xq * jqq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const cplx xp = a(p, r), xq = a(q, r);
          a(p, r) = std::conj(jpp) * xp + std::conj(jqp) * xq;
          a(q, r) = std::conj(jpq) * xp + std::conj(jqq) * xq;
        }
        a(p, q) = a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
  }

  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i).real();
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Largest and smallest singular values of a k x k (or k x m) block.
struct SingularRange {
  double largest = 0.0;
  double smallest = 0.0;
};

inline SingularRange singular_range(const CMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return {};
  if (m.rows() > kMaxBlock || m.cols() > kMaxBlock)
    throw ConfigError("block kernels support k <= 16");
  if (m.rows() == 1 && m.cols() == 1) {
    const double a = std::abs(m(0, 0));
    return {a, a};
  }
  // Gram matrix M* M, cols x cols.
  const std::size_t c = m.cols();
  CMatrix gram(c, c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i; j < c; ++j) {
      cplx s{};
      for (std::size_t r = 0; r < m.rows(); ++r) s += std::conj(m(r, i)) * m(r, j);
      gram(i, j) = s;
    }
  const auto ev = jacobi_eigenvalues(std::move(gram));
  SingularRange out;
  out.largest = std::sqrt(std::max(ev.back(), 0.0));
  out.smallest = m.rows() >= m.cols() ? std::sqrt(std::max(ev.front(), 0.0)) : 0.0;
  return out;
}

/// Operator (spectral) norm of a small block: the largest singular value.
inline double block_opnorm(const CMatrix& m) { return singular_range(m).largest; }

}  // namespace fmloc

#endif  // FMLOC_CORE_OPNORM_HPP
