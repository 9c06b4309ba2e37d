#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>

#include "rmbound/sampling.hpp"
#include "rmbound/specnorm.hpp"

using namespace rmb;

namespace {

double svd_norm(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<DenseMatrix> svd(a);
  return svd.singularValues()(0);
}

DenseMatrix random_symmetric(Index n, std::uint64_t seed, double density = 1.0) {
  Rng r(SeedSpec{seed, 0});
  DenseMatrix a = DenseMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j)
      if (r.uniform() < density) a(i, j) = a(j, i) = r.normal();
  return a;
}

Matrix to_sparse(const DenseMatrix& a) {
  std::vector<Entry> e;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) e.push_back({i, j, a(i, j)});
  return Matrix::from_entries(a.rows(), a.cols(), e, 1);
}

}  // namespace

TEST(SpectralNorm, MethodsAgreeOnSymmetric) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const DenseMatrix a = random_symmetric(60, seed);
    const double want = svd_norm(a);
    for (auto method : {NormMethod::dense_eig, NormMethod::lanczos, NormMethod::power}) {
      const auto r = spectral_norm(Matrix(a), 1e-9, method);
      EXPECT_NEAR(r.value / want, 1.0, 1e-7) << to_string(method);
      EXPECT_EQ(r.method, method);
    }
  }
}

TEST(SpectralNorm, MethodsAgreeOnRectangular) {
  Rng r(SeedSpec{8, 0});
  for (auto [n, m] : {std::pair<Index, Index>{30, 50}, {50, 30}, {1, 7}, {7, 1}}) {
    DenseMatrix a(n, m);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) a(i, j) = r.normal();
    const double want = svd_norm(a);
    for (auto method : {NormMethod::dense_eig, NormMethod::lanczos, NormMethod::power}) {
      EXPECT_NEAR(spectral_norm(Matrix(a), 1e-9, method).value / want, 1.0, 1e-7) << to_string(method);
    }
    EXPECT_NEAR(spectral_norm(to_sparse(a)).value / want, 1.0, 1e-9);
  }
}

TEST(SpectralNorm, SparseComponentsMatchDense) {
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    const DenseMatrix a = random_symmetric(80, seed, 0.02);
    EXPECT_NEAR(spectral_norm(to_sparse(a)).value, svd_norm(a), 1e-10 * std::max(1.0, svd_norm(a)));
  }
}

TEST(SpectralNorm, DiagonalAndBlockDiagonalAreExact) {
  const auto diag = sample_matrix(diagonal_pattern(5000), EntryDistribution::gaussian(), SeedSpec{1, 0});
  double mx = 0.0;
  diag.for_each_nonzero([&](Index, Index, double v) { mx = std::max(mx, std::abs(v)); });
  EXPECT_EQ(spectral_norm(diag).value, mx);

  const auto blocks = sample_matrix(block_diagonal_pattern(3000, 3), EntryDistribution::rademacher(), SeedSpec{2, 0});
  const DenseMatrix d = blocks.to_dense();
  double want = 0.0;
  for (Index b = 0; b < 3000; b += 3) want = std::max(want, svd_norm(d.block(b, b, 3, 3)));
  EXPECT_NEAR(spectral_norm(blocks).value, want, 1e-12 * want);
}

TEST(SpectralNorm, LanczosAboveDenseThreshold) {
  const auto x = sample_matrix(band_pattern(2500, 6), EntryDistribution::gaussian(), SeedSpec{3, 0});
  const auto iterative = spectral_norm(x, 1e-8);
  EXPECT_EQ(iterative.method, NormMethod::lanczos);
  const auto dense = spectral_norm(x, 1e-8, NormMethod::dense_eig);
  EXPECT_NEAR(iterative.value / dense.value, 1.0, 1e-7);
}

TEST(SpectralNorm, EdgeCases) {
  EXPECT_EQ(spectral_norm(Matrix::zeros(10, 10)).value, 0.0);
  EXPECT_EQ(spectral_norm(Matrix(DenseMatrix::Zero(4, 4))).value, 0.0);
  DenseMatrix one(1, 1);
  one << -2.5;
  EXPECT_EQ(spectral_norm(Matrix(one)).value, 2.5);
  DenseMatrix bad = DenseMatrix::Ones(3, 3);
  bad(1, 1) = INFINITY;
  EXPECT_THROW(spectral_norm(Matrix(bad)), DataError);
  EXPECT_THROW(spectral_norm(Matrix(one), 0.0), ParameterError);
}

TEST(SpectralNorm, NonConvergenceCarriesEstimate) {
  const DenseMatrix a = random_symmetric(200, 4);
  NormOptions opt;
  opt.method = NormMethod::power;
  opt.max_power_iterations = 3;
  opt.tol = 1e-14;
  try {
    spectral_norm(Matrix(a), opt);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_GT(e.estimate(), 0.0);
    EXPECT_LE(e.estimate(), svd_norm(a) * (1 + 1e-12));
    EXPECT_GT(e.rel_error(), 0.0);
  }
}

TEST(Spectrum, FullSpectrum) {
  const DenseMatrix a = random_symmetric(40, 6);
  const auto ev = eigenvalues_all(Matrix(a));
  ASSERT_EQ(ev.size(), 40u);
  double sum = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    sum += ev[i];
    if (i) EXPECT_GE(ev[i - 1], ev[i]);
  }
  EXPECT_NEAR(sum, a.trace(), 1e-10);
  EXPECT_NEAR(std::max(std::abs(ev.front()), std::abs(ev.back())), svd_norm(a), 1e-10);
  EXPECT_THROW(eigenvalues_all(Matrix(DenseMatrix::Ones(2, 3))), KindError);
  EXPECT_THROW(eigenvalues_all(diagonal_pattern(kFullSpectrumMax + 1).matrix()), SizeError);
}

TEST(Spectrum, MaxColumnNorm) {
  DenseMatrix a(2, 3);
  a << 3, 0, 1, 4, 0, 1;
  EXPECT_DOUBLE_EQ(max_row_norm(Matrix(a)), 5.0);
}
