#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rmbound/experiments.hpp"

using namespace rmb;

namespace {

// Semicircle CDF by Simpson integration of the density sqrt(4 - x^2) / (2 pi).
double semicircle_quadrature(double x) {
  if (x <= -2) return 0;
  if (x >= 2) return 1;
  const int steps = 20000;
  const double h = (x + 2) / steps;
  auto f = [](double t) { return std::sqrt(std::max(0.0, 4 - t * t)) / (2 * std::numbers::pi); };
  double s = f(-2) + f(x);
  for (int i = 1; i < steps; ++i) s += (i % 2 ? 4 : 2) * f(-2 + i * h);
  return s * h / 3;
}

TrialOptions quick(int trials, std::uint64_t seed, unsigned threads = 1) {
  TrialOptions o;
  o.trials = trials;
  o.seed = seed;
  o.threads = threads;
  return o;
}

}  // namespace

TEST(ExpectedNorm, ZeroMatrix) {
  const auto e = estimate_expected_norm(zero_pattern(20), EntryDistribution::gaussian(), quick(5, 1));
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_EQ(e.std_error, 0.0);
  EXPECT_EQ(e.trials, 5);
}

TEST(ExpectedNorm, StdErrorDefinition) {
  const auto e = estimate_expected_norm(wigner_pattern(20), EntryDistribution::gaussian(), quick(30, 2));
  double mean = 0, ss = 0;
  for (double v : e.per_trial_values) mean += v;
  mean /= 30;
  for (double v : e.per_trial_values) ss += (v - mean) * (v - mean);
  EXPECT_NEAR(e.mean, mean, 1e-12);
  EXPECT_NEAR(e.std_error, std::sqrt(ss / 29) / std::sqrt(30.0), 1e-12);
  EXPECT_THROW(estimate_expected_norm(wigner_pattern(3), EntryDistribution::gaussian(), quick(1, 0)),
               ParameterError);
}

TEST(ExpectedNorm, ThreadCountDoesNotChangeValues) {
  const auto c = band_pattern(300, 4);
  const auto a = estimate_norms(c, EntryDistribution::rademacher(), quick(12, 99, 1));
  const auto b = estimate_norms(c, EntryDistribution::rademacher(), quick(12, 99, 4));
  EXPECT_EQ(a.norm.per_trial_values, b.norm.per_trial_values);
  EXPECT_EQ(a.column_max.per_trial_values, b.column_max.per_trial_values);
  EXPECT_EQ(a.norm.mean, b.norm.mean);
}

TEST(ExpectedNorm, ColumnMaxBelowNorm) {
  const auto s = estimate_norms(wigner_pattern(50), EntryDistribution::gaussian(), quick(10, 3));
  for (std::size_t t = 0; t < 10; ++t)
    EXPECT_LE(s.column_max.per_trial_values[t], s.norm.per_trial_values[t] * (1 + 1e-9));
}

TEST(ExpectedNorm, NonConvergenceAbortsStudy) {
  TrialOptions o = quick(3, 1);
  o.tol = 1e-300;
  o.method = NormMethod::power;
  const auto c = wigner_pattern(30);
  EXPECT_THROW(estimate_expected_norm(c, EntryDistribution::gaussian(), o), NonConvergence);
}

TEST(KRule, ParseAndTarget) {
  EXPECT_EQ(parse_k_rule("const(3)").target(100), 3);
  EXPECT_EQ(parse_k_rule("const:5").name(), "const(5)");
  EXPECT_EQ(parse_k_rule("log_sq").target(16384), static_cast<long long>(std::ceil(std::pow(std::log(16384.0), 2))));
  EXPECT_EQ(parse_k_rule("c_log(2)").target(1000), static_cast<long long>(std::ceil(2 * std::log(1000.0))));
  EXPECT_EQ(parse_k_rule("sqrt").target(1000), 32);
  EXPECT_THROW(parse_k_rule("const(0)"), ParameterError);
  EXPECT_THROW(parse_k_rule("cube"), ParameterError);
  EXPECT_THROW(parse_k_rule("c_log(-1)"), ParameterError);
}

TEST(PhaseScan, CellDegrees) {
  const auto c3 = phase_cell(PhasePattern::cyclic_band, 100, 3, 0);
  EXPECT_EQ(c3.degree, 3);
  const auto c95 = phase_cell(PhasePattern::cyclic_band, 1000, 95, 0);
  EXPECT_EQ(c95.degree, 95);
  EXPECT_EQ(phase_cell(PhasePattern::cyclic_band, 1000, 4, 0).degree, 5);
  EXPECT_EQ(phase_cell(PhasePattern::regular_random, 100, 6, 3).degree, 6);
  EXPECT_THROW(phase_cell(PhasePattern::cyclic_band, 10, 10, 0), ParameterError);
  // Normalization uses the true max row degree of the pattern.
  for (auto pat : {PhasePattern::cyclic_band, PhasePattern::truncated_band, PhasePattern::regular_random}) {
    const auto cell = phase_cell(pat, 200, 7, 1);
    EXPECT_NEAR(structural_params(cell.pattern).sigma, std::sqrt(static_cast<double>(cell.degree)), 1e-12);
  }
}

TEST(PhaseScan, RowsAndRatioDecreasingInK) {
  const auto opt = quick(6, 5);
  double prev = INFINITY;
  for (int k : {3, 9, 31}) {
    const auto r = phase_scan(PhasePattern::cyclic_band, {1024}, KRule{KRuleKind::constant, double(k)},
                              EntryDistribution::gaussian(), opt);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].k, k);
    EXPECT_NEAR(r.rows[0].ratio_mean, r.rows[0].norm_mean / std::sqrt(k), 1e-12);
    EXPECT_LT(r.rows[0].ratio_mean, prev);
    prev = r.rows[0].ratio_mean;
  }
  const auto csv = phase_csv(phase_scan(PhasePattern::regular_random, {64, 128}, parse_k_rule("sqrt"),
                                        EntryDistribution::gaussian(), opt));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Tails, SurvivalMonotoneAndBounded) {
  auto opt = quick(200, 8);
  const auto t = tail_empirics(wigner_pattern(32), EntryDistribution::gaussian(), 0.5, {0, 1, 2, 3}, opt);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.second_form, "gaussian");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_LE(t.rows[i].empirical_survival, 1.0);
    EXPECT_LE(t.rows[i].empirical_survival, t.rows[i].bound_value + 3 * t.rows[i].binomial_stderr);
    ASSERT_TRUE(t.rows[i].second_survival.has_value());
    EXPECT_LE(*t.rows[i].second_survival, *t.rows[i].second_bound + 1e-12 + 3 * std::sqrt(0.25 / 200));
    if (i) {
      EXPECT_LE(t.rows[i].empirical_survival, t.rows[i - 1].empirical_survival);
      EXPECT_LE(*t.rows[i].second_survival, *t.rows[i - 1].second_survival);
    }
  }
  const auto rad = tail_empirics(wigner_pattern(16), EntryDistribution::rademacher(), 0.5, {0}, quick(10, 1));
  EXPECT_EQ(rad.second_form, "bounded");
  const auto heavy = tail_empirics(wigner_pattern(16), EntryDistribution::heavy_tailed(2), 0.5, {0}, quick(10, 1));
  EXPECT_FALSE(heavy.rows[0].second_bound.has_value());
}

TEST(Density, SemicircleCdf) {
  EXPECT_EQ(semicircle_cdf(-2.0), 0.0);
  EXPECT_EQ(semicircle_cdf(2.0), 1.0);
  EXPECT_NEAR(semicircle_cdf(0.0), 0.5, 1e-15);
  for (double x = -1.9; x < 2; x += 0.1) EXPECT_NEAR(semicircle_cdf(x), semicircle_quadrature(x), 1e-6);
}

TEST(Density, KsDistance) {
  EXPECT_NEAR(ks_to_semicircle({0.0}), 0.5, 1e-15);
  EXPECT_NEAR(ks_to_semicircle({5.0, 6.0}), 1.0, 1e-15);
  const auto wig = spectral_density_check(wigner_pattern(400), EntryDistribution::gaussian(), 3);
  EXPECT_LT(wig.ks_distance, 0.05);
  EXPECT_EQ(wig.degree, 400);
  EXPECT_THROW(spectral_density_check(band_pattern(50, 2), EntryDistribution::gaussian(), 1), PreconditionError);
}

TEST(Seginer, RoundingAndSingleBlock) {
  const auto rows = seginer_block_experiment({1000}, EntryDistribution::rademacher(), quick(4, 2));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].k, 3);  // ceil(sqrt(log 1000)) = ceil(2.63)
  EXPECT_EQ(rows[0].n, 999);
  // n = k: one small block.
  const auto one = seginer_block_experiment({2}, EntryDistribution::rademacher(), quick(4, 2));
  EXPECT_EQ(one[0].k, 1);
  EXPECT_EQ(one[0].norm_mean, 1.0);
}

TEST(Report, DiagnosticsAndChecks) {
  const auto rep = bounds_vs_empirical_report(wigner_pattern(64), EntryDistribution::gaussian(), 0.25, quick(20, 4));
  ASSERT_TRUE(rep.lower.has_value());
  EXPECT_GT(rep.column_ratio, 1.0);
  bool saw_main = false;
  for (const auto& c : rep.checks) saw_main = saw_main || c.name == "empirical<=main";
  EXPECT_TRUE(saw_main);
  EXPECT_TRUE(rep.all_hold());
  const auto j = report_json(rep);
  EXPECT_TRUE(j.contains("upper_bounds"));
  const auto rad = bounds_vs_empirical_report(diagonal_pattern(30), EntryDistribution::rademacher(), 0.25, quick(5, 1));
  EXPECT_FALSE(rad.lower.has_value());
  bool saw_rad = false;
  for (const auto& b : rad.upper) saw_rad = saw_rad || b.bound_name == "rademacher";
  EXPECT_TRUE(saw_rad);
}
