#ifndef FMLOC_CORE_DENSE_HPP
#define FMLOC_CORE_DENSE_HPP

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fmloc {

using cplx = std::complex<double>;

/// Row-major dense matrix with value semantics.
template <class T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }
  const T& operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }

  std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using CMatrix = Matrix<cplx>;
using RMatrix = Matrix<double>;

inline CMatrix adjoint(const CMatrix& m) {
  CMatrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = std::conj(m(i, j));
  return out;
}

inline CMatrix transpose(const CMatrix& m) {
  CMatrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

inline CMatrix operator*(const CMatrix& a, const CMatrix& b) {
  assert(a.cols() == b.rows());
  CMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const cplx ail = a(i, l);
      if (ail == cplx{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += ail * b(l, j);
    }
  return out;
}

inline CMatrix operator+(CMatrix a, const CMatrix& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
  return a;
}

inline CMatrix operator-(CMatrix a, const CMatrix& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] -= bd[i];
  return a;
}

inline CMatrix operator*(cplx c, CMatrix a) {
  for (auto& x : a.data()) x *= c;
  return a;
}

inline double max_abs(const CMatrix& m) {
  double r = 0.0;
  for (const auto& x : m.data()) r = std::max(r, std::abs(x));
  return r;
}

inline double max_abs_diff(const CMatrix& a, const CMatrix& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  double r = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) r = std::max(r, std::abs(ad[i] - bd[i]));
  return r;
}

/// Copy of the (r0.., c0..) sub-block of size rows x cols.
inline CMatrix block(const CMatrix& m, std::size_t r0, std::size_t c0, std::size_t rows,
                     std::size_t cols) {
  CMatrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = m(r0 + i, c0 + j);
  return out;
}

}  // namespace fmloc

#endif  // FMLOC_CORE_DENSE_HPP
