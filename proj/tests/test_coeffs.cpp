#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rmbound/coeffs.hpp"

using namespace rmb;

namespace {

// Direct row-norm / max-entry oracle over a dense copy.
struct Oracle {
  double sigma1 = 0, sigma2 = 0, sigma_star = 0;
};

Oracle dense_oracle(const DenseMatrix& b) {
  Oracle o;
  for (Index i = 0; i < b.rows(); ++i) {
    double s = 0;
    for (Index j = 0; j < b.cols(); ++j) {
      s += b(i, j) * b(i, j);
      o.sigma_star = std::max(o.sigma_star, std::abs(b(i, j)));
    }
    o.sigma1 = std::max(o.sigma1, std::sqrt(s));
  }
  for (Index j = 0; j < b.cols(); ++j) {
    double s = 0;
    for (Index i = 0; i < b.rows(); ++i) s += b(i, j) * b(i, j);
    o.sigma2 = std::max(o.sigma2, std::sqrt(s));
  }
  return o;
}

std::vector<Index> row_degrees(const CoefficientMatrix& c) {
  std::vector<Index> d(static_cast<std::size_t>(c.rows()), 0);
  c.matrix().for_each_nonzero([&](Index i, Index, double) { ++d[static_cast<std::size_t>(i)]; });
  return d;
}

}  // namespace

TEST(Patterns, StructuralParameters) {
  const auto w = structural_params(wigner_pattern(64));
  EXPECT_DOUBLE_EQ(w.sigma, 8.0);
  EXPECT_DOUBLE_EQ(w.sigma_star, 1.0);

  const auto b = structural_params(band_pattern(100, 3));
  EXPECT_NEAR(b.sigma * b.sigma, 7.0, 1e-12);

  const auto blk = structural_params(block_diagonal_pattern(96, 8));
  EXPECT_NEAR(blk.sigma * blk.sigma, 8.0, 1e-12);

  const auto d = structural_params(diagonal_pattern(10));
  EXPECT_DOUBLE_EQ(d.sigma, 1.0);

  const auto z = structural_params(zero_pattern(5));
  EXPECT_DOUBLE_EQ(z.sigma, 0.0);
  EXPECT_DOUBLE_EQ(z.sigma_star, 0.0);
}

TEST(Patterns, BandEdgeCases) {
  EXPECT_EQ(band_pattern(6, 0).matrix().nonzeros(), 6);
  EXPECT_THROW(band_pattern(6, 6), Error);
  EXPECT_THROW(block_diagonal_pattern(10, 3), Error);
  // A wide band is wigner.
  const auto wide = structural_params(band_pattern(5, 4));
  EXPECT_DOUBLE_EQ(wide.sigma, std::sqrt(5.0));
}

TEST(Patterns, CyclicBandIsRegular) {
  const auto c = cyclic_band_pattern(50, 4);
  for (Index d : row_degrees(c)) EXPECT_EQ(d, 9);
  EXPECT_EQ(c.matrix().asymmetry(), 0.0);
  EXPECT_THROW(cyclic_band_pattern(8, 4), Error);
}

TEST(Patterns, LogDecayDiagonalCapped) {
  const auto c = log_decay_diagonal_pattern(100);
  const DenseMatrix b = c.matrix().to_dense();
  EXPECT_DOUBLE_EQ(b(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(b(1, 1), 1.0);  // 1/sqrt(log 2) > 1
  EXPECT_NEAR(b(99, 99), 1.0 / std::sqrt(std::log(100.0)), 1e-15);
  EXPECT_LE(structural_params(c).sigma_star, 1.0);
}

TEST(Patterns, SingleEntry) {
  const auto c = single_entry_pattern(7);
  EXPECT_EQ(c.matrix().nonzeros(), 1);
  EXPECT_DOUBLE_EQ(c(0, 0), 1.0);
}

TEST(Patterns, RegularRandomDegrees) {
  for (Index k : {1, 2, 3, 6, 7}) {
    const auto c = regular_random_pattern(40, k, 11);
    for (Index d : row_degrees(c)) EXPECT_EQ(d, k) << "k=" << k;
    EXPECT_EQ(c.matrix().asymmetry(), 0.0);
    c.matrix().for_each_nonzero([](Index, Index, double v) { EXPECT_EQ(v, 1.0); });
  }
  const auto a = regular_random_pattern(30, 4, 5).matrix().to_dense();
  const auto b = regular_random_pattern(30, 4, 5).matrix().to_dense();
  EXPECT_TRUE(a == b);
  const auto c = regular_random_pattern(30, 4, 6).matrix().to_dense();
  EXPECT_FALSE(a == c);
  EXPECT_THROW(regular_random_pattern(5, 6, 1), ConstructionError);
}

TEST(Coefficients, ParamsMatchOracleOnRandomInstances) {
  Rng rng(SeedSpec{123, 0});
  for (int rep = 0; rep < 40; ++rep) {
    const Index n = 1 + static_cast<Index>(rng.below(12));
    const Index m = 1 + static_cast<Index>(rng.below(12));
    DenseMatrix b = DenseMatrix::Zero(n, m);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j)
        if (rng.uniform() < 0.4) b(i, j) = rng.normal();
    const auto o = dense_oracle(b);
    for (int force : {0, 1}) {
      std::vector<Entry> e;
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j)
          if (b(i, j) != 0) e.push_back({i, j, b(i, j)});
      const auto c = CoefficientMatrix::rectangular(Matrix::from_entries(n, m, e, force));
      const auto p = structural_params(c);
      EXPECT_NEAR(p.sigma1, o.sigma1, 1e-12);
      EXPECT_NEAR(p.sigma2, o.sigma2, 1e-12);
      EXPECT_NEAR(p.sigma, std::max(o.sigma1, o.sigma2), 1e-12);
      EXPECT_EQ(p.sigma_star, o.sigma_star);
    }
  }
}

TEST(Coefficients, SymmetryValidation) {
  DenseMatrix b(2, 2);
  b << 1, 2, 2.5, 1;
  EXPECT_THROW(CoefficientMatrix::symmetric(Matrix(b)), ValidationError);
  b(1, 0) = 2 + 1e-13;
  EXPECT_THROW(CoefficientMatrix::symmetric(Matrix(b)), ValidationError);
  const auto c = CoefficientMatrix::symmetric(Matrix(b), kFileSymmetryTolerance);
  EXPECT_EQ(c(1, 0), c(0, 1));
  EXPECT_THROW(CoefficientMatrix::symmetric(Matrix(DenseMatrix::Ones(2, 3))), ValidationError);
  DenseMatrix bad = DenseMatrix::Ones(2, 2);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(CoefficientMatrix::symmetric(Matrix(bad)), DataError);
}

TEST(Coefficients, EntrywiseNormAndCounts) {
  const auto w = wigner_pattern(4);
  EXPECT_NEAR(lp_entrywise_norm(w, 1.0), 16.0, 1e-12);
  EXPECT_NEAR(lp_entrywise_norm(w, 1.5), std::pow(16.0, 1 / 1.5), 1e-12);
  EXPECT_EQ(large_entry_count(w, 1.0), 16u);
  EXPECT_TRUE(lower_bound_applicable(diagonal_pattern(9), 1.0, 1.0));
  EXPECT_FALSE(lower_bound_applicable(single_entry_pattern(9), 1.0, 0.5));
  EXPECT_THROW(large_entry_count(zero_pattern(3), 1.0), DataError);
}

TEST(Io, DenseAndTripleRoundTrip) {
  const auto c = band_pattern(6, 1);
  std::stringstream dense;
  write_dense_csv(dense, c.matrix());
  const Matrix back = read_dense_csv(dense);
  EXPECT_TRUE(back.to_dense() == c.matrix().to_dense());

  std::stringstream triples;
  write_triples_csv(triples, c.matrix(), true);
  const Matrix t = read_triples_csv(triples, true, 6, 6);
  EXPECT_TRUE(t.to_dense() == c.matrix().to_dense());
}

TEST(Io, TripleErrors) {
  std::stringstream lower("1,0,2.0\n");
  EXPECT_THROW(read_triples_csv(lower, true), Error);
  std::stringstream junk("0,0,abc\n");
  EXPECT_THROW(read_triples_csv(junk, false), Error);
  std::stringstream ragged("1,2\n3\n");
  EXPECT_THROW(read_dense_csv(ragged), Error);
}

TEST(Spec, ParseAndBuild) {
  const auto s = parse_pattern_spec("band:4096,16");
  EXPECT_EQ(s.name, "band");
  ASSERT_EQ(s.params.size(), 2u);
  EXPECT_EQ(s.params[1], 16);
  EXPECT_EQ(build_pattern("wigner:3").rows(), 3);
  EXPECT_EQ(build_pattern("ones:2,5").cols(), 5);
  EXPECT_THROW(build_pattern("band:10"), ConstructionError);
  EXPECT_THROW(build_pattern("nonsense:1"), ConstructionError);
  EXPECT_THROW(build_pattern("wigner:x"), ParameterError);
  EXPECT_THROW(build_pattern("triples:/nonexistent/file.csv"), Error);
}
