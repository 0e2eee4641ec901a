#ifndef FMLOC_CORE_LU_HPP
#define FMLOC_CORE_LU_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "fmloc/core/dense.hpp"
#include "fmloc/core/error.hpp"

namespace fmloc {

/// Pivots below this magnitude mark the factorization as singular.
inline constexpr double kSingularPivot = 1e-30;

/// Complex LU factorization with partial pivoting, P A = L U, L unit lower.
class LuFactor {
 public:
  /// Returns nullopt when a pivot falls below kSingularPivot.
  static std::optional<LuFactor> factor(CMatrix a) {
    if (a.rows() != a.cols()) throw ConfigError("LU needs a square matrix");
    const std::size_t n = a.rows();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    int sign = 1;

    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      double best = std::abs(a(col, col));
      for (std::size_t r = col + 1; r < n; ++r) {
        const double m = std::abs(a(r, col));
        if (m > best) {
          best = m;
          piv = r;
        }
      }
      if (best < kSingularPivot) return std::nullopt;
      if (piv != col) {
        auto rp = a.row(piv);
        auto rc = a.row(col);
        for (std::size_t j = 0; j < n; ++j) std::swap(rp[j], rc[j]);
        std::swap(perm[piv], perm[col]);
        sign = -sign;
      }
      const cplx inv_pivot = 1.0 / a(col, col);
      for (std::size_t r = col + 1; r < n; ++r) {
        const cplx f = a(r, col) * inv_pivot;
        a(r, col) = f;
        if (f == cplx{}) continue;
        auto rr = a.row(r);
        auto rc = a.row(col);
        for (std::size_t j = col + 1; j < n; ++j) rr[j] -= f * rc[j];
      }
    }
    return LuFactor(std::move(a), std::move(perm), sign);
  }

  std::size_t size() const noexcept { return lu_.rows(); }

  /// Solves A X = B (B is n x m).
  CMatrix solve(const CMatrix& b) const {
    const std::size_t n = size();
    if (b.rows() != n) throw ConfigError("LU solve: dimension mismatch");
    CMatrix x(n, b.cols());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) x(i, j) = b(perm_[i], j);
    for (std::size_t j = 0; j < b.cols(); ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        cplx s = x(i, j);
        for (std::size_t l = 0; l < i; ++l) s -= lu_(i, l) * x(l, j);
        x(i, j) = s;
      }
      for (std::size_t ii = n; ii-- > 0;) {
        cplx s = x(ii, j);
        for (std::size_t l = ii + 1; l < n; ++l) s -= lu_(ii, l) * x(l, j);
        x(ii, j) = s / lu_(ii, ii);
      }
    }
    return x;
  }

  /// Solves A^T X = B (plain transpose, no conjugation).
  CMatrix solve_transposed(const CMatrix& b) const {
    const std::size_t n = size();
    if (b.rows() != n) throw ConfigError("LU solve: dimension mismatch");
    // A^T = U^T L^T P, so solve U^T y = b, L^T w = y, then x = P^T w.
    CMatrix w = b;
    for (std::size_t j = 0; j < b.cols(); ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        cplx s = w(i, j);
        for (std::size_t l = 0; l < i; ++l) s -= lu_(l, i) * w(l, j);
        w(i, j) = s / lu_(i, i);
      }
      for (std::size_t ii = n; ii-- > 0;) {
        cplx s = w(ii, j);
        for (std::size_t l = ii + 1; l < n; ++l) s -= lu_(l, ii) * w(l, j);
        w(ii, j) = s;
      }
    }
    CMatrix x(n, b.cols());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) x(perm_[i], j) = w(i, j);
    return x;
  }

  cplx determinant() const {
    cplx d = static_cast<double>(sign_);
    for (std::size_t i = 0; i < size(); ++i) d *= lu_(i, i);
    return d;
  }

 private:
  LuFactor(CMatrix lu, std::vector<std::size_t> perm, int sign)
      : lu_(std::move(lu)), perm_(std::move(perm)), sign_(sign) {}

  CMatrix lu_;
  std::vector<std::size_t> perm_;  // row i of P A is row perm_[i] of A
  int sign_ = 1;
};

/// Inverse of a small matrix, or nullopt if singular.
inline std::optional<CMatrix> inverse(const CMatrix& a) {
  auto lu = LuFactor::factor(a);
  if (!lu) return std::nullopt;
  return lu->solve(CMatrix::identity(a.rows()));
}

inline cplx determinant(const CMatrix& a) {
  auto lu = LuFactor::factor(a);
  return lu ? lu->determinant() : cplx{};
}

}  // namespace fmloc

#endif  // FMLOC_CORE_LU_HPP
