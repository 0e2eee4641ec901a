#ifndef FMLOC_MODEL_HPP
#define FMLOC_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fmloc/core/dense.hpp"
#include "fmloc/core/error.hpp"
#include "fmloc/core/opnorm.hpp"
#include "fmloc/topology.hpp"

namespace fmloc {

enum class ModelVariant { block, spencer, alloy };

inline std::string_view variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::block: return "block";
    case ModelVariant::spencer: return "spencer";
    case ModelVariant::alloy: return "alloy";
  }
  return "?";
}

/// Translation-invariant hopping kernel for one lattice displacement.
/// The block coupling x to y = x + offset is K(offset) / g.
struct HoppingTerm {
  std::vector<std::int64_t> offset;
  CMatrix kernel;
};

/// Alloy coefficient: V(n) gets coeff * v(n + offset).
struct AlloyTerm {
  std::vector<std::int64_t> offset;
  double coeff = 0.0;
};

/// Symbolic random operator. Build with the factory functions below, which
/// validate the assumptions and fill in the derived constants.
struct ModelSpec {
  ModelVariant variant = ModelVariant::block;
  std::size_t k = 1;  // internal degrees of freedom per site (1 for alloy)
  double g = 1.0;     // coupling; +inf means decoupled (no hopping)
  CMatrix A;          // block and spencer variants
  CMatrix B;
  double spencer_a = 0.0;
  std::vector<AlloyTerm> alloy;
  std::vector<HoppingTerm> hopping;  // empty: identity on every edge

  // Derived constants.
  double norm_a = 0.0;
  bool a_invertible = false;
  double c_b1 = 0.0;  // max(||A||, ||A^-1||), or ||A|| when A is singular
  double c_b2 = 0.0;  // ||B||
  double c_b3 = 1.0;  // max ||K||
  std::size_t alloy_support = 0;  // number of nonzero alloy coefficients
  bool alloy_sum_zero = false;

  double hopping_strength() const { return std::isinf(g) ? 0.0 : 1.0 / g; }

  /// Size of the site-potential degree of freedom used in exponent formulas:
  /// k for block models, the coefficient-support cardinality for alloys.
  std::size_t exponent_k() const { return variant == ModelVariant::alloy ? alloy_support : k; }

  /// Largest exponent covered by the decay bound: alpha q / (2 k alpha + k q).
  double max_exponent(double alpha, double q) const {
    const double kk = static_cast<double>(exponent_k());
    return alpha * q / (2.0 * kk * alpha + kk * q);
  }

  /// Kernel for the displacement x -> y, or nullptr when none is declared.
  const CMatrix* kernel_for(std::span<const std::int64_t> offset) const {
    for (const auto& h : hopping)
      if (std::equal(h.offset.begin(), h.offset.end(), offset.begin(), offset.end()))
        return &h.kernel;
    return nullptr;
  }
};

namespace detail {

inline void require_hermitian(const CMatrix& m, const char* name) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (std::abs(m(i, j) - std::conj(m(j, i))) > 1e-12 * (1.0 + max_abs(m)))
        throw ConfigError(std::string(name) + " must be Hermitian", std::string("model.") + name);
}

inline void check_coupling(double g) {
  if (!(g > 0.0)) throw ConfigError("coupling g must be > 0", "model.g");
}

inline void fill_block_constants(ModelSpec& m) {
  const auto sa = singular_range(m.A);
  m.norm_a = sa.largest;
  m.a_invertible = sa.smallest > 1e-12 * std::max(1.0, sa.largest);
  m.c_b1 = m.a_invertible ? std::max(sa.largest, 1.0 / sa.smallest) : sa.largest;
  m.c_b2 = block_opnorm(m.B);
  m.c_b3 = 1.0;
  if (!m.hopping.empty()) {
    m.c_b3 = 0.0;
    for (const auto& h : m.hopping) m.c_b3 = std::max(m.c_b3, block_opnorm(h.kernel));
  }
}

inline void validate_hopping(const ModelSpec& m) {
  for (const auto& h : m.hopping) {
    if (h.kernel.rows() != m.k || h.kernel.cols() != m.k)
      throw ConfigError("hopping kernel must be k x k", "model.hopping");
    std::int64_t l1 = 0;
    for (auto o : h.offset) l1 += std::llabs(o);
    if (l1 != 1) throw ConfigError("hopping offsets must be nearest-neighbour", "model.hopping");
    std::vector<std::int64_t> back(h.offset);
    for (auto& o : back) o = -o;
    const CMatrix* rev = m.kernel_for(back);
    if (!rev) throw ConfigError("hopping needs K(-o) for every K(o)", "model.hopping");
    if (max_abs_diff(*rev, adjoint(h.kernel)) > 1e-12 * (1.0 + max_abs(h.kernel)))
      throw ConfigError("hopping violates K(-o) = K(o)*", "model.hopping");
  }
}

}  // namespace detail

/// Block model V(x) = v(x) A + B with hopping kernel (default identity).
inline ModelSpec block_model(CMatrix A, CMatrix B, double g, std::vector<HoppingTerm> hopping = {}) {
  detail::check_coupling(g);
  if (A.rows() == 0 || A.rows() != A.cols()) throw ConfigError("A must be square", "model.A");
  if (B.rows() != A.rows() || B.cols() != A.cols())
    throw ConfigError("B must match A", "model.B");
  if (A.rows() > kMaxBlock) throw ConfigError("k must be <= 16", "model.A");
  detail::require_hermitian(A, "A");
  detail::require_hermitian(B, "B");

  ModelSpec m;
  m.variant = ModelVariant::block;
  m.k = A.rows();
  m.g = g;
  m.A = std::move(A);
  m.B = std::move(B);
  m.hopping = std::move(hopping);
  detail::validate_hopping(m);
  detail::fill_block_constants(m);
  return m;
}

/// Scalar Anderson model: k = 1, A = 1, B = 0, K = 1.
inline ModelSpec anderson_model(double g) {
  return block_model(CMatrix::identity(1), CMatrix(1, 1), g);
}

/// Spencer's 2 x 2 model: V = [[v, a], [a, -v]].
inline ModelSpec spencer_model(double a, double g) {
  CMatrix A(2, 2), B(2, 2);
  A(0, 0) = 1.0;
  A(1, 1) = -1.0;
  B(0, 1) = a;
  B(1, 0) = a;
  auto m = block_model(std::move(A), std::move(B), g);
  m.variant = ModelVariant::spencer;
  m.spencer_a = a;
  return m;
}

/// k = 3 example with singular A = diag(1, 0, -1) and
/// B = [[0, 1, 0], [1, 0, 2], [0, 2, 0]], covered by the averaged
/// invertibility condition instead of B1.
inline ModelSpec b1prime_example_model(double g) {
  CMatrix A(3, 3), B(3, 3);
  A(0, 0) = 1.0;
  A(2, 2) = -1.0;
  B(0, 1) = B(1, 0) = 1.0;
  B(1, 2) = B(2, 1) = 2.0;
  return block_model(std::move(A), std::move(B), g);
}

/// Alloy model on scalar ambient space: V(n) = sum_o coeff_o v(n + o).
inline ModelSpec alloy_model(std::vector<AlloyTerm> coeffs, double g) {
  detail::check_coupling(g);
  ModelSpec m;
  m.variant = ModelVariant::alloy;
  m.k = 1;
  m.g = g;
  double sum = 0.0, abs_sum = 0.0;
  for (const auto& t : coeffs) {
    if (!std::isfinite(t.coeff)) throw ConfigError("alloy coefficients must be finite", "model.alloy");
    if (t.coeff != 0.0) ++m.alloy_support;
    sum += t.coeff;
    abs_sum += std::abs(t.coeff);
  }
  if (m.alloy_support == 0) throw ConfigError("alloy support must be non-empty", "model.alloy");
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    for (std::size_t j = i + 1; j < coeffs.size(); ++j)
      if (coeffs[i].offset == coeffs[j].offset)
        throw ConfigError("duplicate alloy offset", "model.alloy");
  m.alloy_sum_zero = std::abs(sum) <= 1e-12 * abs_sum;
  m.alloy = std::move(coeffs);
  m.A = CMatrix::identity(1);
  m.B = CMatrix(1, 1);
  m.norm_a = 1.0;
  m.c_b3 = 1.0;
  return m;
}

/// One disorder realization of a model on a graph. Site x occupies rows
/// [x k, (x + 1) k).
struct HamiltonianInstance {
  std::size_t sites = 0;
  std::size_t k = 1;
  std::vector<double> disorder;
  CMatrix matrix;

  std::size_t dim() const noexcept { return sites * k; }
  std::size_t row_offset(Vertex x) const noexcept { return x * k; }
  CMatrix site_block(Vertex x, Vertex y) const {
    return block(matrix, row_offset(x), row_offset(y), k, k);
  }
};

/// Assemble H for disorder vector v (one value per vertex). Every
/// off-diagonal pair is written from a single source so H is exactly
/// Hermitian.
inline HamiltonianInstance assemble(const ModelSpec& model, const GraphTopology& topo,
                                    std::span<const double> v) {
  if (v.size() != topo.size()) throw ConfigError("disorder vector length must equal vertex count");
  HamiltonianInstance h;
  h.sites = topo.size();
  h.k = model.k;
  h.disorder.assign(v.begin(), v.end());
  h.matrix = CMatrix(h.dim(), h.dim());
  const std::size_t k = h.k;

  auto write_hermitian = [&](std::size_t r0, std::size_t c0, const CMatrix& blk, bool diagonal) {
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        if (diagonal && j < i) continue;
        const cplx val = (diagonal && i == j) ? cplx(blk(i, j).real(), 0.0) : blk(i, j);
        h.matrix(r0 + i, c0 + j) = val;
        h.matrix(c0 + j, r0 + i) = std::conj(val);
      }
  };

  if (model.variant == ModelVariant::alloy) {
    if (!topo.has_coords()) throw ConfigError("alloy models need lattice coordinates");
    std::vector<std::int64_t> c(topo.dimension());
    for (Vertex x = 0; x < topo.size(); ++x) {
      double pot = 0.0;
      const auto cx = topo.coords(x);
      for (const auto& t : model.alloy) {
        if (t.offset.size() != topo.dimension())
          throw ConfigError("alloy offset dimension does not match topology", "model.alloy");
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = cx[i] + t.offset[i];
        if (auto w = topo.vertex_at(c)) pot += t.coeff * v[*w];
      }
      h.matrix(x, x) = pot;
    }
  } else {
    CMatrix pot(k, k);
    for (Vertex x = 0; x < topo.size(); ++x) {
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) pot(i, j) = v[x] * model.A(i, j) + model.B(i, j);
      write_hermitian(h.row_offset(x), h.row_offset(x), pot, true);
    }
  }

  const double t = model.hopping_strength();
  if (t == 0.0) return h;
  const CMatrix unit = CMatrix::identity(k);
  for (Vertex x = 0; x < topo.size(); ++x)
    for (Vertex y : topo.neighbors(x)) {
      if (y <= x) continue;
      const CMatrix* kern = &unit;
      if (!model.hopping.empty()) {
        if (!topo.has_coords()) throw ConfigError("custom hopping needs lattice coordinates");
        kern = model.kernel_for(topo.offset(x, y));
        if (!kern) continue;
      }
      write_hermitian(h.row_offset(x), h.row_offset(y), t * *kern, false);
    }
  return h;
}

/// Principal submatrix on a sub-box; hopping across the boundary is dropped.
inline HamiltonianInstance restrict(const HamiltonianInstance& h, const SubBox& sub) {
  for (Vertex p : sub.to_parent)
    if (p >= h.sites) throw ConfigError("sub-box does not belong to this instance");
  HamiltonianInstance r;
  r.sites = sub.to_parent.size();
  r.k = h.k;
  r.disorder.reserve(r.sites);
  for (Vertex p : sub.to_parent) r.disorder.push_back(h.disorder[p]);
  r.matrix = CMatrix(r.dim(), r.dim());
  for (std::size_t a = 0; a < r.sites; ++a)
    for (std::size_t b = 0; b < r.sites; ++b)
      for (std::size_t i = 0; i < h.k; ++i)
        for (std::size_t j = 0; j < h.k; ++j)
          r.matrix(a * h.k + i, b * h.k + j) =
              h.matrix(sub.to_parent[a] * h.k + i, sub.to_parent[b] * h.k + j);
  return r;
}

/// max |H_ij - conj(H_ji)|.
inline double hermiticity_residual(const HamiltonianInstance& h) {
  double r = 0.0;
  for (std::size_t i = 0; i < h.dim(); ++i)
    for (std::size_t j = i; j < h.dim(); ++j)
      r = std::max(r, std::abs(h.matrix(i, j) - std::conj(h.matrix(j, i))));
  return r;
}

}  // namespace fmloc

#endif  // FMLOC_MODEL_HPP
