#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rmbound/sampling.hpp"

using namespace rmb;

namespace {

// E|g|^q by Simpson's rule on [0, 40].
double abs_normal_moment_quadrature(double q) {
  const int steps = 200000;
  const double h = 40.0 / steps;
  auto f = [&](double x) { return (x == 0.0 && q == 0.0 ? 1.0 : std::pow(x, q)) * std::exp(-x * x / 2); };
  double s = f(0) + f(40.0);
  for (int i = 1; i < steps; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return 2.0 * s * h / 3.0 / std::sqrt(2 * std::numbers::pi);
}

}  // namespace

TEST(Rng, StreamsAreDeterministicAndDistinct) {
  Rng a(SeedSpec{1, 2}), b(SeedSpec{1, 2}), c(SeedSpec{1, 3}), d(SeedSpec{2, 2});
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

TEST(Rng, UniformRangeAndBelow) {
  Rng r(SeedSpec{9, 0});
  int counts[7] = {};
  for (int i = 0; i < 70000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double v = r.uniform_open_low();
    ASSERT_GT(v, 0.0);
    ASSERT_LE(v, 1.0);
    ++counts[r.below(7)];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);  // 5 sd of a binomial count
}

TEST(Moments, NamedFamilies) {
  EXPECT_DOUBLE_EQ(distribution_moment(EntryDistribution::gaussian(), 2), 1.0);
  EXPECT_DOUBLE_EQ(distribution_moment(EntryDistribution::gaussian(), 8), 105.0);
  EXPECT_DOUBLE_EQ(distribution_moment(EntryDistribution::rademacher(), 6), 1.0);
  // sqrt(3) U, U uniform on [-1, 1]: 3^p / (2p + 1).
  EXPECT_NEAR(distribution_moment(EntryDistribution::bounded_uniform(), 2), 1.0, 1e-15);
  EXPECT_NEAR(distribution_moment(EntryDistribution::bounded_uniform(), 4), 9.0 / 5.0, 1e-15);
  EXPECT_THROW(distribution_moment(EntryDistribution::gaussian(), 3), ParameterError);
}

TEST(Moments, HeavyTailedAgainstQuadrature) {
  for (double beta : {1.0, 1.5, 2.0, 2.5, 3.0}) {
    const auto raw = EntryDistribution::heavy_tailed(beta, false);
    const auto unit = EntryDistribution::heavy_tailed(beta, true);
    const double var = abs_normal_moment_quadrature(2 * (beta - 1));
    for (int order : {2, 4, 6}) {
      const double want = abs_normal_moment_quadrature(order) * abs_normal_moment_quadrature(order * (beta - 1));
      EXPECT_NEAR(distribution_moment(raw, order) / want, 1.0, 1e-8) << beta << " " << order;
      EXPECT_NEAR(distribution_moment(unit, order) / (want / std::pow(var, order / 2)), 1.0, 1e-8);
    }
    EXPECT_NEAR(distribution_moment(unit, 2), 1.0, 1e-12);
  }
  EXPECT_THROW(EntryDistribution::heavy_tailed(0.5), ParameterError);
}

TEST(Moments, EmpiricalMatchesExact) {
  for (const auto& d : {EntryDistribution::gaussian(), EntryDistribution::rademacher(),
                        EntryDistribution::bounded_uniform(), EntryDistribution::heavy_tailed(1.5)}) {
    Rng r(SeedSpec{5, 0});
    const int n = 200000;
    double m1 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = draw(d, r);
      m1 += x;
      m2 += x * x;
      m4 += x * x * x * x;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    const double m4_exact = distribution_moment(d, 4);
    const double sd4 = std::sqrt((distribution_moment(d, 8) - m4_exact * m4_exact) / n);
    EXPECT_NEAR(m1, 0.0, 5.0 / std::sqrt(n)) << d.code();
    EXPECT_NEAR(m2, 1.0, 5.0 * std::sqrt((m4_exact - 1.0) / n) + 1e-12) << d.code();
    EXPECT_NEAR(m4, m4_exact, 5.0 * sd4 + 1e-12) << d.code();
  }
}

TEST(Distribution, ParseCodes) {
  EXPECT_EQ(parse_distribution("gaussian").family, Family::gaussian);
  EXPECT_EQ(parse_distribution("uniform").family, Family::bounded_uniform);
  EXPECT_DOUBLE_EQ(parse_distribution("heavy:2").beta, 2.0);
  EXPECT_THROW(parse_distribution("cauchy"), ParameterError);
  EXPECT_THROW(parse_distribution("heavy:abc"), ParameterError);
}

TEST(Sample, SymmetricSupportAndScaling) {
  DenseMatrix b = DenseMatrix::Zero(4, 4);
  b(0, 0) = 2;
  b(0, 3) = b(3, 0) = 0.5;
  b(2, 2) = 1;
  const auto c = CoefficientMatrix::symmetric(Matrix(b));
  const Matrix x = sample_matrix(c, EntryDistribution::rademacher(), SeedSpec{4, 0});
  const DenseMatrix xd = x.to_dense();
  EXPECT_TRUE(xd == xd.transpose());
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) EXPECT_EQ(std::abs(xd(i, j)), b(i, j));
}

TEST(Sample, DenseAndSparseStorageAgree) {
  const auto band = band_pattern(200, 2);
  const auto dense = CoefficientMatrix::symmetric(Matrix(band.matrix().to_dense()));
  ASSERT_NE(band.matrix().is_sparse(), dense.matrix().is_sparse());
  for (std::uint64_t t = 0; t < 5; ++t) {
    const auto a = sample_matrix(band, EntryDistribution::gaussian(), SeedSpec{77, t}).to_dense();
    const auto d = sample_matrix(dense, EntryDistribution::gaussian(), SeedSpec{77, t}).to_dense();
    EXPECT_TRUE(a == d);
  }
}

TEST(Sample, RectangularUsesEveryEntry) {
  const auto c = ones_pattern(3, 5);
  const DenseMatrix x = sample_matrix(c, EntryDistribution::gaussian(), SeedSpec{1, 1}).to_dense();
  EXPECT_EQ(x.rows(), 3);
  EXPECT_EQ(x.cols(), 5);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 5; ++j) EXPECT_NE(x(i, j), 0.0);
}

TEST(Sample, PerEntryVarianceWigner64) {
  const auto c = wigner_pattern(64);
  const int trials = 10000;
  DenseMatrix sum = DenseMatrix::Zero(64, 64), sq = DenseMatrix::Zero(64, 64);
  for (int t = 0; t < trials; ++t) {
    const DenseMatrix x = sample_matrix(c, EntryDistribution::gaussian(), SeedSpec{2024, static_cast<std::uint64_t>(t)}).to_dense();
    sum += x;
    sq += x.cwiseProduct(x);
  }
  // Var of a sample variance is about 2/trials; 6 sd covers all 2080 entries,
  // and the pooled mean must sit within 4 pooled sd of 1.
  const double sd = std::sqrt(2.0 / trials);
  double pooled = 0;
  int count = 0;
  for (Index i = 0; i < 64; ++i)
    for (Index j = i; j < 64; ++j) {
      const double mean = sum(i, j) / trials;
      const double var = sq(i, j) / trials - mean * mean;
      ASSERT_NEAR(var, 1.0, 6 * sd) << i << "," << j;
      pooled += var;
      ++count;
    }
  EXPECT_NEAR(pooled / count, 1.0, 4 * sd / std::sqrt(static_cast<double>(count)));
}

TEST(Sample, SymmetrizedDifferenceHasDoubleVariance) {
  const auto c = diagonal_pattern(2000);
  const DenseMatrix x = symmetrized_difference(c, EntryDistribution::bounded_uniform(), SeedSpec{3, 0}).to_dense();
  double s = 0;
  for (Index i = 0; i < 2000; ++i) s += x(i, i) * x(i, i);
  EXPECT_NEAR(s / 2000, 2.0, 0.2);
}

TEST(Sample, CustomSampler) {
  auto d = EntryDistribution::custom([](Rng&) { return 3.0; }, "three");
  const DenseMatrix x = sample_matrix(diagonal_pattern(3), d, SeedSpec{0, 0}).to_dense();
  EXPECT_EQ(x(1, 1), 3.0);
  EXPECT_THROW(distribution_moment(d, 2), ParameterError);
}
