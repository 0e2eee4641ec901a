#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "fmloc/numerics.hpp"

using namespace fmloc;

namespace {
GraphTopology chain(std::size_t n, bool periodic = false) {
  const std::array<std::size_t, 1> sides{n};
  return make_lattice_box(1, sides, periodic);
}

CMatrix random_hermitian(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  CMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = nd(gen);
    for (std::size_t j = i + 1; j < n; ++j) {
      a(i, j) = cplx(nd(gen), nd(gen));
      a(j, i) = std::conj(a(i, j));
    }
  }
  return a;
}

CMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  CMatrix a(r, c);
  for (auto& z : a.data()) z = cplx(nd(gen), nd(gen));
  return a;
}

Eigen::MatrixXcd to_eigen(const CMatrix& m) {
  Eigen::MatrixXcd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

CMatrix random_unitary(std::size_t n, std::mt19937_64& gen) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(to_eigen(random_matrix(n, n, gen)));
  Eigen::MatrixXcd q = qr.householderQ();
  CMatrix u(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) u(i, j) = q(i, j);
  return u;
}

HamiltonianInstance instance(const ModelSpec& m, const GraphTopology& g, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(g.size());
  for (auto& x : v) x = u(gen);
  return assemble(m, g, v);
}

double reconstruction_residual(const SpectralDecomposition& sd, const CMatrix& h) {
  const std::size_t n = sd.dim();
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      cplx s{};
      for (std::size_t c = 0; c < n; ++c)
        s += sd.eigenvectors(i, c) * sd.eigenvalues[c] * std::conj(sd.eigenvectors(j, c));
      r = std::max(r, std::abs(s - h(i, j)));
    }
  return r;
}

double orthonormality_residual(const CMatrix& u) {
  return max_abs_diff(adjoint(u) * u, CMatrix::identity(u.cols()));
}
}  // namespace

TEST_CASE("hermitian_eig: examples", "[numerics]") {
  SECTION("[[0,1],[1,0]]") {
    CMatrix a(2, 2);
    a(0, 1) = a(1, 0) = 1.0;
    const auto sd = hermitian_eig(a);
    REQUIRE(sd.eigenvalues[0] == Catch::Approx(-1.0));
    REQUIRE(sd.eigenvalues[1] == Catch::Approx(1.0));
  }
  SECTION("diag(3, 1, 2)") {
    CMatrix a(3, 3);
    a(0, 0) = 3.0;
    a(1, 1) = 1.0;
    a(2, 2) = 2.0;
    const auto sd = hermitian_eig(a);
    REQUIRE(sd.eigenvalues == std::vector<double>{1.0, 2.0, 3.0});
    // Permutation eigenvectors up to phase.
    const std::array<std::size_t, 3> where{1, 2, 0};
    for (std::size_t c = 0; c < 3; ++c) REQUIRE(std::abs(sd.eigenvectors(where[c], c)) ==
                                                Catch::Approx(1.0));
  }
  SECTION("1 x 1 and empty") {
    CMatrix a(1, 1);
    a(0, 0) = -2.5;
    REQUIRE(hermitian_eig(a).eigenvalues == std::vector<double>{-2.5});
    REQUIRE(hermitian_eig(CMatrix(0, 0)).dim() == 0);
  }
  SECTION("fully degenerate") {
    const auto sd = hermitian_eig(4.0 * CMatrix::identity(5));
    for (double e : sd.eigenvalues) REQUIRE(e == Catch::Approx(4.0));
    REQUIRE(orthonormality_residual(sd.eigenvectors) < 1e-12);
  }
}

TEST_CASE("hermitian_eig: random matrices against Eigen", "[numerics][property]") {
  std::mt19937_64 gen(11);
  for (std::size_t n : {2, 3, 8, 17, 40, 96}) {
    const CMatrix a = random_hermitian(n, gen);
    const auto sd = hermitian_eig(a);
    const double scale = 1.0 + max_abs(a);
    REQUIRE(reconstruction_residual(sd, a) <= 1e-10 * scale);
    REQUIRE(orthonormality_residual(sd.eigenvectors) <= 1e-10);
    REQUIRE(std::is_sorted(sd.eigenvalues.begin(), sd.eigenvalues.end()));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ref(to_eigen(a), Eigen::EigenvaluesOnly);
    for (std::size_t i = 0; i < n; ++i)
      REQUIRE(std::abs(sd.eigenvalues[i] - ref.eigenvalues()(i)) < 1e-11 * scale * n);
  }
}

TEST_CASE("hermitian_eig on assembled instances records the digest", "[numerics]") {
  const auto h = instance(spencer_model(1.0, 3.0), chain(10), 4);
  const auto sd = hermitian_eig(h);
  REQUIRE(sd.k == 2);
  REQUIRE(sd.origin == instance_digest(h));
  REQUIRE(reconstruction_residual(sd, h.matrix) <= 1e-10 * (1.0 + max_abs(h.matrix)));
  REQUIRE(instance_digest(h) != instance_digest(instance(spencer_model(1.0, 3.0), chain(10), 5)));
}

TEST_CASE("LU kernels", "[numerics]") {
  std::mt19937_64 gen(3);
  for (std::size_t n : {1, 4, 12}) {
    const CMatrix a = random_matrix(n, n, gen);
    const CMatrix b = random_matrix(n, 3, gen);
    const auto lu = LuFactor::factor(a);
    REQUIRE(lu);
    REQUIRE(max_abs(a * lu->solve(b) - b) < 1e-11);
    REQUIRE(max_abs(transpose(a) * lu->solve_transposed(b) - b) < 1e-11);
    const cplx det = to_eigen(a).determinant();
    REQUIRE(std::abs(lu->determinant() - det) < 1e-10 * (1.0 + std::abs(det)));
    REQUIRE(max_abs(a * *inverse(a) - CMatrix::identity(n)) < 1e-11);
  }
  REQUIRE_FALSE(LuFactor::factor(CMatrix(3, 3)));
  REQUIRE_FALSE(inverse(CMatrix(2, 2)));
}

TEST_CASE("block_opnorm", "[numerics]") {
  REQUIRE(block_opnorm(CMatrix::identity(4)) == Catch::Approx(1.0));
  CMatrix d(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = -4.0;
  REQUIRE(block_opnorm(d) == Catch::Approx(4.0));
  CMatrix nil(2, 2);
  nil(0, 1) = 2.0;
  REQUIRE(block_opnorm(nil) == Catch::Approx(2.0));
  REQUIRE(singular_range(nil).smallest == Catch::Approx(0.0).margin(1e-12));
  REQUIRE_THROWS_AS(block_opnorm(CMatrix::identity(17)), ConfigError);

  SECTION("against Eigen's SVD and under unitary invariance") {
    std::mt19937_64 gen(8);
    for (std::size_t k : {1, 2, 3, 5, 8, 16}) {
      for (int rep = 0; rep < 5; ++rep) {
        const CMatrix m = random_matrix(k, k, gen);
        const double ref = Eigen::JacobiSVD<Eigen::MatrixXcd>(to_eigen(m)).singularValues()(0);
        const double got = block_opnorm(m);
        REQUIRE(got == Catch::Approx(ref).epsilon(1e-8));
        REQUIRE(block_opnorm(adjoint(m)) == Catch::Approx(got).epsilon(1e-8));
        const CMatrix u = random_unitary(k, gen), v = random_unitary(k, gen);
        REQUIRE(block_opnorm(u * m * v) == Catch::Approx(got).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("resolvent_block: examples", "[numerics]") {
  SECTION("one site") {
    const std::array<double, 1> v{0.3};
    const auto h = assemble(anderson_model(1.0), chain(1), v);
    const auto gb = resolvent_block(h, 0.1, 0.01, 0, 0);
    REQUIRE(gb);
    REQUIRE(std::abs(gb->block(0, 0) - 1.0 / (0.3 - cplx(0.1, 0.01))) < 1e-14);
  }
  SECTION("two-site chain") {
    const double g = 3.0;
    const std::array<double, 2> v{0.4, -0.6};
    const auto h = assemble(anderson_model(g), chain(2), v);
    for (double eps : {1e-3, 0.5}) {
      const cplx z(0.2, eps);
      const cplx ref = -(1.0 / g) / ((v[0] - z) * (v[1] - z) - 1.0 / (g * g));
      const auto gb = resolvent_block(h, 0.2, eps, 0, 1);
      REQUIRE(std::abs(gb->block(0, 0) - ref) < 1e-12 * std::abs(ref));
      REQUIRE(gb->residual <= 1e-10 * (1.0 + std::abs(z)));
    }
  }
  SECTION("decoupled off-diagonal is zero") {
    const auto h = instance(spencer_model(1.0, INFINITY), chain(4), 2);
    const auto gb = resolvent_block(h, 0.0, 1e-3, 0, 2);
    REQUIRE(max_abs(gb->block) == 0.0);
  }
  SECTION("eps = 0 on a singular shift signals resample") {
    const std::array<double, 1> v{0.25};
    const auto h = assemble(anderson_model(1.0), chain(1), v);
    REQUIRE_FALSE(resolvent_block(h, 0.25, 0.0, 0, 0));
    REQUIRE(resolvent_block(h, 0.0, 0.0, 0, 0));
  }
  SECTION("errors") {
    const auto h = instance(anderson_model(1.0), chain(3), 1);
    REQUIRE_THROWS_AS(resolvent_block(h, 0.0, -1.0, 0, 0), ConfigError);
    REQUIRE_THROWS_AS(resolvent_block(h, 0.0, 1.0, 0, 3), ConfigError);
  }
}

TEST_CASE("resolvent: residuals, rows and symmetry", "[numerics][property]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const auto& model : {anderson_model(2.0), spencer_model(1.0, 2.0),
                              b1prime_example_model(2.0)}) {
      const auto h = instance(model, chain(6), seed);
      const cplx z(0.3, 1e-3);
      const auto res = ShiftedResolvent::make(h, z);
      REQUIRE(res);
      const auto rows = res->row_blocks(1);
      for (Vertex y = 0; y < h.sites; ++y) {
        const CMatrix col = res->column(y);
        REQUIRE(solve_residual(h, z, y, col) <= 1e-10 * (1.0 + std::abs(z)));
        const CMatrix gxy = block(col, h.row_offset(1), 0, h.k, h.k);
        REQUIRE(max_abs_diff(rows[y], gxy) <= 1e-10 * (1.0 + max_abs(gxy)));
        // Real-symmetric instances: G(x, y) = G(y, x)^T.
        const CMatrix gyx = block(res->column(1), h.row_offset(y), 0, h.k, h.k);
        REQUIRE(max_abs_diff(gxy, transpose(gyx)) <= 1e-10 * (1.0 + max_abs(gxy)));
      }
    }
  }
}

TEST_CASE("resolvent from factorization agrees with the spectral sum", "[numerics][property]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const auto& model : {anderson_model(1.5), spencer_model(0.5, 1.5)}) {
      const auto h = instance(model, chain(6), 100 + seed);
      const auto sd = hermitian_eig(h);
      const EnergyInterval all{-1e9, 1e9};
      const cplx z(-0.2, 0.05);
      for (Vertex x = 0; x < 6; x += 2)
        for (Vertex y = 0; y < 6; ++y) {
          CMatrix spectral(h.k, h.k);
          for (const auto& pb : projector_blocks(sd, all, x, y))
            spectral = spectral + (1.0 / (pb.nu - z)) * pb.m;
          const auto gb = resolvent_block(h, z.real(), z.imag(), x, y);
          REQUIRE(max_abs_diff(gb->block, spectral) <= 1e-8 * (max_abs(gb->block) + 1e-12));
        }
    }
  }
}

TEST_CASE("projector_blocks", "[numerics]") {
  CMatrix a(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  const auto sd = hermitian_eig(a);
  const EnergyInterval all{-10.0, 10.0};
  SECTION("2 x 2 swap: M = +-1/2") {
    const auto same = projector_blocks(sd, all, 0, 0);
    REQUIRE(same.size() == 2);
    for (const auto& pb : same) REQUIRE(pb.m(0, 0).real() == Catch::Approx(0.5));
    const auto cross = projector_blocks(sd, all, 0, 1);
    REQUIRE(cross[0].nu == Catch::Approx(-1.0));
    REQUIRE(cross[0].m(0, 0).real() == Catch::Approx(-0.5));
    REQUIRE(cross[1].m(0, 0).real() == Catch::Approx(0.5));
  }
  SECTION("interval selects clusters") {
    REQUIRE(projector_blocks(sd, {0.0, 2.0}, 0, 0).size() == 1);
    REQUIRE(projector_blocks(sd, {2.0, 1.0}, 0, 0).empty());
  }
  SECTION("completeness and orthogonality on random instances") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto h = instance(spencer_model(1.0, 2.0), chain(5), seed);
      const auto s = hermitian_eig(h);
      for (Vertex m = 0; m < 5; ++m)
        for (Vertex n = 0; n < 5; ++n) {
          CMatrix sum(2, 2);
          for (const auto& pb : projector_blocks(s, all, m, n)) sum = sum + pb.m;
          const CMatrix expect = m == n ? CMatrix::identity(2) : CMatrix(2, 2);
          REQUIRE(max_abs_diff(sum, expect) < 1e-12);
        }
    }
  }
  SECTION("degenerate eigenvalues merge") {
    const auto d = hermitian_eig(CMatrix::identity(3));
    const auto blocks = projector_blocks(d, all, 1, 1);
    REQUIRE(blocks.size() == 1);
    REQUIRE(blocks[0].m(0, 0).real() == Catch::Approx(1.0));
  }
}

TEST_CASE("evolve_block", "[numerics]") {
  CMatrix a(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  const auto sd = hermitian_eig(a);
  const EnergyInterval all{-10.0, 10.0};
  REQUIRE(max_abs_diff(evolve_block(sd, all, 0.0, 0, 0), CMatrix::identity(1)) < 1e-15);
  REQUIRE(max_abs(evolve_block(sd, all, 0.0, 0, 1)) < 1e-15);
  for (double t : {0.3, 1.0, 2.5, -4.0}) {
    REQUIRE(max_abs_diff(evolve_block(sd, {3.0, 2.0}, t, 0, 0), CMatrix::identity(1)) == 0.0);
    REQUIRE(max_abs(evolve_block(sd, {3.0, 2.0}, t, 0, 1)) == 0.0);
    const cplx e = evolve_block(sd, all, t, 0, 1)(0, 0);
    REQUIRE(std::abs(e - cplx(0.0, std::sin(t))) < 1e-12);
  }

  SECTION("unitary when the window holds the spectrum") {
    const auto h = instance(spencer_model(0.8, 2.0), chain(4), 9);
    const auto s = hermitian_eig(h);
    const std::size_t k = h.k, n = h.sites;
    for (double t : {0.7, 13.0}) {
      CMatrix e(n * k, n * k);
      for (Vertex m = 0; m < n; ++m)
        for (Vertex p = 0; p < n; ++p) {
          const CMatrix blk = evolve_block(s, all, t, m, p);
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) e(m * k + i, p * k + j) = blk(i, j);
        }
      REQUIRE(max_abs_diff(adjoint(e) * e, CMatrix::identity(n * k)) <= 1e-8);
    }
  }
}

TEST_CASE("non-finite input raises a numerical error with the digest", "[numerics]") {
  std::vector<double> d{1.0, 2.0, 3.0}, e{std::nan(""), 1.0, 0.0};
  CMatrix z = CMatrix::identity(3);
  REQUIRE_THROWS_WITH(detail::tridiagonal_ql(d, e, z, 77), Catch::Matchers::ContainsSubstring("77"));
  CMatrix a = CMatrix::identity(3);
  a(1, 1) = INFINITY;
  REQUIRE_THROWS_AS(hermitian_eig(a), NumericalError);
}
