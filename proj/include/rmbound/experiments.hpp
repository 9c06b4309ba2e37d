#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmbound/bounds.hpp"
#include "rmbound/coeffs.hpp"
#include "rmbound/error.hpp"
#include "rmbound/estimate.hpp"
#include "rmbound/format.hpp"
#include "rmbound/parallel.hpp"
#include "rmbound/rng.hpp"
#include "rmbound/sampling.hpp"
#include "rmbound/specnorm.hpp"

namespace rmb {

inline constexpr int kDefaultNormTrials = 200;
inline constexpr int kDefaultTailTrials = 2000;

/// Shared knobs for Monte Carlo studies.
struct TrialOptions {
  int trials = kDefaultNormTrials;
  std::uint64_t seed = 0;
  double tol = kDefaultNormTol;
  unsigned threads = 1;
  std::optional<NormMethod> method;  ///< default: chosen per matrix size
};

/// ||X|| together with max_i ||X e_i|| over the same draws.
struct NormStudy {
  NormEstimate norm;
  NormEstimate column_max;
};

namespace detail {

/// Runs body(t) for every trial; a NonConvergence in any trial aborts the
/// study, reporting how many trials did finish.
template <typename Body>
void run_trials(int trials, unsigned threads, Body&& body) {
  std::vector<char> done(static_cast<std::size_t>(trials), 0);
  try {
    parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
      body(t);
      done[t] = 1;
    });
  } catch (const NonConvergence& e) {
    const auto finished = std::count(done.begin(), done.end(), 1);
    throw NonConvergence(std::string(e.what()) + " (study aborted; " + std::to_string(finished) + " of " +
                             std::to_string(trials) + " trials completed)",
                         e.estimate(), e.rel_error());
  }
}

}  // namespace detail

inline NormStudy estimate_norms(const CoefficientMatrix& c, const EntryDistribution& dist,
                                const TrialOptions& opt) {
  if (opt.trials < 2) throw ParameterError("trials must be >= 2");
  std::vector<double> norms(static_cast<std::size_t>(opt.trials));
  std::vector<double> cols(static_cast<std::size_t>(opt.trials));
  detail::run_trials(opt.trials, opt.threads, [&](std::size_t t) {
    const Matrix x = sample_matrix(c, dist, SeedSpec{opt.seed, t});
    norms[t] = spectral_norm(x, opt.tol, opt.method).value;
    cols[t] = max_row_norm(x);
  });
  return {summarize(std::move(norms), opt.seed), summarize(std::move(cols), opt.seed)};
}

inline NormEstimate estimate_expected_norm(const CoefficientMatrix& c, const EntryDistribution& dist,
                                           const TrialOptions& opt) {
  return estimate_norms(c, dist, opt).norm;
}

// ---------------------------------------------------------------- phase scan

enum class KRuleKind { constant, c_log, log_sq, sqrt };

struct KRule {
  KRuleKind kind = KRuleKind::log_sq;
  double value = 0.0;

  std::string name() const {
    switch (kind) {
      case KRuleKind::constant: return "const(" + format_double(value) + ")";
      case KRuleKind::c_log: return "c_log(" + format_double(value) + ")";
      case KRuleKind::log_sq: return "log_sq";
      case KRuleKind::sqrt: return "sqrt";
    }
    return "?";
  }

  /// Target row degree at dimension n (natural logarithm).
  long long target(long long n) const {
    const double l = std::log(static_cast<double>(n));
    switch (kind) {
      case KRuleKind::constant: return static_cast<long long>(value);
      case KRuleKind::c_log: return static_cast<long long>(std::ceil(value * l));
      case KRuleKind::log_sq: return static_cast<long long>(std::ceil(l * l));
      case KRuleKind::sqrt: return static_cast<long long>(std::ceil(std::sqrt(static_cast<double>(n))));
    }
    return 0;
  }
};

/// "const(3)", "const:3", "c_log(2)", "c_log:2", "log_sq", "sqrt".
inline KRule parse_k_rule(std::string_view text) {
  auto arg = [&](std::string_view prefix) -> std::optional<double> {
    if (text.substr(0, prefix.size()) != prefix) return std::nullopt;
    auto rest = text.substr(prefix.size());
    if (!rest.empty() && (rest.front() == '(' || rest.front() == ':')) {
      const bool paren = rest.front() == '(';
      rest.remove_prefix(1);
      if (paren) {
        if (rest.empty() || rest.back() != ')') throw ParameterError("bad k-rule: " + std::string(text));
        rest.remove_suffix(1);
      }
      return parse_double(rest);
    }
    throw ParameterError("bad k-rule: " + std::string(text));
  };
  if (text == "log_sq") return {KRuleKind::log_sq, 0.0};
  if (text == "sqrt") return {KRuleKind::sqrt, 0.0};
  if (auto v = arg("const")) {
    if (*v < 1.0 || *v != std::floor(*v)) throw ParameterError("const k-rule needs an integer >= 1");
    return {KRuleKind::constant, *v};
  }
  if (auto v = arg("c_log")) {
    if (!(*v > 0.0)) throw ParameterError("c_log k-rule needs c > 0");
    return {KRuleKind::c_log, *v};
  }
  throw ParameterError("unknown k-rule: " + std::string(text));
}

enum class PhasePattern { cyclic_band, truncated_band, regular_random };

inline const char* to_string(PhasePattern p) {
  switch (p) {
    case PhasePattern::cyclic_band: return "cyclic_band";
    case PhasePattern::truncated_band: return "band";
    case PhasePattern::regular_random: return "regular_random";
  }
  return "?";
}

/// "band" and "cyclic_band" mean the wrap-around band; "truncated_band" the plain one.
inline PhasePattern parse_phase_pattern(std::string_view s) {
  if (s == "band" || s == "cyclic_band") return PhasePattern::cyclic_band;
  if (s == "truncated_band") return PhasePattern::truncated_band;
  if (s == "regular_random") return PhasePattern::regular_random;
  throw ParameterError("phase pattern must be band, cyclic_band, truncated_band or regular_random");
}

struct PhaseCell {
  CoefficientMatrix pattern;
  long long degree = 0;  ///< max row degree used in the ratio
};

/// Pattern for one grid cell. Bands are built with half-width
/// ceil((k-1)/2), so their degree is the odd number 2h+1 >= k.
inline PhaseCell phase_cell(PhasePattern pattern, long long n, long long k, std::uint64_t seed) {
  if (n < 2) throw ParameterError("phase scan needs n >= 2");
  if (k < 1) throw ParameterError("k-rule gave k < 1");
  switch (pattern) {
    case PhasePattern::cyclic_band: {
      const long long h = k / 2;  // ceil((k-1)/2)
      if (2 * h + 1 >= n) throw ParameterError("cyclic band degree must be < n");
      return {cyclic_band_pattern(n, h), 2 * h + 1};
    }
    case PhasePattern::truncated_band: {
      const long long h = k / 2;  // ceil((k-1)/2)
      if (2 * h + 1 >= n) throw ParameterError("band degree must be < n");
      return {band_pattern(n, h), 2 * h + 1};
    }
    case PhasePattern::regular_random:
      if (k >= n) throw ParameterError("regular_random degree must be < n");
      return {regular_random_pattern(n, k, seed), k};
  }
  throw ParameterError("unknown phase pattern");
}

struct PhaseRow {
  long long n = 0;
  long long k = 0;         ///< actual degree
  long long k_target = 0;  ///< value from the k-rule
  double ratio_mean = 0.0;
  double ratio_stderr = 0.0;
  double norm_mean = 0.0;
  double norm_stderr = 0.0;
  int trials = 0;
  std::string k_rule;
};

struct PhaseGridResult {
  std::string pattern;
  std::vector<PhaseRow> rows;
};

/// E||X|| / sqrt(k) per grid cell. Cell i draws its trials from the
/// sub-seed SeedSpec{seed, i}.
inline PhaseGridResult phase_scan(PhasePattern pattern, const std::vector<long long>& n_grid, const KRule& rule,
                                  const EntryDistribution& dist, const TrialOptions& opt) {
  PhaseGridResult out;
  out.pattern = to_string(pattern);
  for (std::size_t cell = 0; cell < n_grid.size(); ++cell) {
    const long long n = n_grid[cell];
    const std::uint64_t cell_seed = SeedSpec{opt.seed, cell}.stream_seed();
    const long long target = rule.target(n);
    const auto pc = phase_cell(pattern, n, target, mix64(cell_seed ^ 0x9e3779b97f4a7c15ULL));
    TrialOptions cell_opt = opt;
    cell_opt.seed = cell_seed;
    auto est = estimate_expected_norm(pc.pattern, dist, cell_opt);
    const double root = std::sqrt(static_cast<double>(pc.degree));
    std::vector<double> ratios = est.per_trial_values;
    for (auto& r : ratios) r /= root;
    const auto summary = summarize(std::move(ratios), cell_seed);
    out.rows.push_back({n, pc.degree, target, summary.mean, summary.std_error, est.mean, est.std_error,
                        est.trials, rule.name()});
  }
  return out;
}

// ------------------------------------------------------------------- tails

struct TailRow {
  double t = 0.0;
  double threshold = 0.0;
  double empirical_survival = 0.0;
  double binomial_stderr = 0.0;   ///< sqrt(q (1-q) / trials) at q = min(1, bound)
  double bound_value = 0.0;
  // Second form: threshold (1+eps) 2 sigma + t, bound min(1, n exp(-t^2/(c sigma_*^2))).
  std::optional<double> second_threshold;
  std::optional<double> second_survival;
  std::optional<double> second_bound;
};

struct TailTable {
  double epsilon = 0.0;
  int trials = 0;
  std::string second_form;  ///< "gaussian", "bounded" or empty
  std::vector<TailRow> rows;
};

namespace detail {

inline double binomial_stderr(double q, int trials) {
  q = std::clamp(q, 0.0, 1.0);
  return std::sqrt(q * (1.0 - q) / static_cast<double>(trials));
}

inline double survival(const std::vector<double>& norms, double level) {
  const auto hits = std::count_if(norms.begin(), norms.end(), [&](double v) { return v >= level; });
  return static_cast<double>(hits) / static_cast<double>(norms.size());
}

/// sup |xi| for the bounded families, for which the sup-based sigma_* is
/// this times max |b_ij|.
inline std::optional<double> entry_sup(const EntryDistribution& d) {
  if (d.family == Family::rademacher) return 1.0;
  if (d.family == Family::bounded_uniform) return std::sqrt(3.0);
  return std::nullopt;
}

}  // namespace detail

/// Empirical P[||X|| >= threshold + t] beside the analytic tail bounds.
inline TailTable tail_empirics(const CoefficientMatrix& c, const EntryDistribution& dist, double eps,
                               const std::vector<double>& t_grid, const TrialOptions& opt) {
  check_epsilon(eps);
  detail::require_symmetric(c, "tail_empirics");
  if (opt.trials < 2) throw ParameterError("trials must be >= 2");
  for (double t : t_grid)
    if (!(t >= 0.0)) throw ParameterError("t grid values must be >= 0");
  const auto norms = estimate_expected_norm(c, dist, opt).per_trial_values;
  const auto s = structural_params(c);
  const double n = static_cast<double>(c.rows());

  TailTable out;
  out.epsilon = eps;
  out.trials = opt.trials;
  std::optional<TailVariant> variant;
  double sigma_star_tail = s.sigma_star;
  if (dist.family == Family::gaussian) {
    variant = TailVariant::gaussian;
    out.second_form = "gaussian";
  } else if (auto sup = detail::entry_sup(dist)) {
    variant = TailVariant::bounded;
    sigma_star_tail = s.sigma_star * *sup;
    out.second_form = "bounded";
  }
  for (double t : t_grid) {
    TailRow row;
    row.t = t;
    const auto tb = tail_bound(c, MatrixKind::symmetric, eps, t);
    row.threshold = tb.threshold;
    row.bound_value = tb.probability;
    row.empirical_survival = detail::survival(norms, tb.threshold);
    row.binomial_stderr = detail::binomial_stderr(tb.probability, opt.trials);
    if (variant) {
      const auto sf = tail_bound_second_form(s.sigma, sigma_star_tail, n, eps, t, *variant);
      row.second_threshold = sf.threshold;
      row.second_bound = sf.probability;
      row.second_survival = detail::survival(norms, sf.threshold);
    }
    out.rows.push_back(row);
  }
  return out;
}

// ----------------------------------------------------------------- density

/// CDF of the semicircle law on [-2, 2].
inline double semicircle_cdf(double x) {
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  constexpr double pi = 3.14159265358979323846;
  return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * pi) + std::asin(x / 2.0) / pi;
}

/// Kolmogorov-Smirnov distance of a sample to the semicircle CDF.
inline double ks_to_semicircle(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = semicircle_cdf(values[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

struct DensityResult {
  double ks_distance = 0.0;
  Index n = 0;
  Index degree = 0;
};

/// One realization X; KS distance between the spectrum of X / sqrt(k) and
/// the semicircle, where every row of C has exactly k nonzeros.
inline DensityResult spectral_density_check(const CoefficientMatrix& c, const EntryDistribution& dist,
                                            std::uint64_t seed) {
  detail::require_symmetric(c, "spectral_density_check");
  const Index n = c.rows();
  if (n > kFullSpectrumMax)
    throw SizeError("spectral density check limited to n <= " + std::to_string(kFullSpectrumMax));
  std::vector<Index> degree(static_cast<std::size_t>(n), 0);
  c.matrix().for_each_nonzero([&](Index i, Index, double) { ++degree[static_cast<std::size_t>(i)]; });
  const Index k = degree.empty() ? 0 : degree.front();
  if (k == 0 || std::any_of(degree.begin(), degree.end(), [&](Index d) { return d != k; }))
    throw PreconditionError("spectral density check needs every row to have the same number of nonzeros");
  const Matrix x = sample_matrix(c, dist, SeedSpec{seed, 0});
  auto eig = eigenvalues_all(x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  for (auto& v : eig) v *= scale;
  return {ks_to_semicircle(std::move(eig)), n, k};
}

// ----------------------------------------------------------------- seginer

struct SeginerRow {
  long long n_requested = 0;
  long long n = 0;  ///< rounded down to a multiple of k
  long long k = 0;  ///< block size ceil(sqrt(log n))
  double norm_mean = 0.0;
  double norm_stderr = 0.0;
  double ratio_mean = 0.0;  ///< E||X|| / sqrt(log n)
  double ratio_stderr = 0.0;
};

/// Block-diagonal matrices with k x k blocks, k = ceil(sqrt(log n)).
inline std::vector<SeginerRow> seginer_block_experiment(const std::vector<long long>& n_grid,
                                                        const EntryDistribution& dist, const TrialOptions& opt) {
  std::vector<SeginerRow> out;
  for (std::size_t cell = 0; cell < n_grid.size(); ++cell) {
    const long long req = n_grid[cell];
    if (req < 2) throw ParameterError("Seginer experiment needs n >= 2");
    const long long k = static_cast<long long>(std::ceil(std::sqrt(std::log(static_cast<double>(req)))));
    const long long n = req / k * k;
    TrialOptions cell_opt = opt;
    cell_opt.seed = SeedSpec{opt.seed, cell}.stream_seed();
    const auto est = estimate_expected_norm(block_diagonal_pattern(n, k), dist, cell_opt);
    const double root = std::sqrt(std::log(static_cast<double>(n)));
    out.push_back({req, n, k, est.mean, est.std_error, est.mean / root, est.std_error / root});
  }
  return out;
}

// ------------------------------------------------------------------ report

struct ReportCheck {
  std::string name;
  bool holds = false;
  std::string detail;
};

struct EmpiricalReport {
  std::optional<NormEstimate> lower;  ///< Gaussian entries only
  NormStudy empirical;
  std::vector<BoundReport> upper;
  std::vector<ReportCheck> checks;
  double column_ratio = 0.0;  ///< E||X|| / E max_i ||X e_i||, diagnostic only
  bool all_hold() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.holds; });
  }
};

/// Lower estimate, MC means and every applicable upper bound side by
/// side. Checks: lower <= MC mean (within 3 combined standard errors) and
/// MC mean + 3 stderr <= each explicit-constant bound whose hypotheses the
/// entry law satisfies (Gaussian entries).
inline EmpiricalReport bounds_vs_empirical_report(const CoefficientMatrix& c, const EntryDistribution& dist,
                                                  double eps, const TrialOptions& opt, double dimfree_p = 1.5) {
  check_epsilon(eps);
  EmpiricalReport rep;
  rep.empirical = estimate_norms(c, dist, opt);
  const auto& mc = rep.empirical.norm;
  rep.column_ratio = rep.empirical.column_max.mean > 0.0 ? mc.mean / rep.empirical.column_max.mean : 0.0;
  const bool gaussian = dist.family == Family::gaussian;
  const bool nonzero = structural_params(c).sigma_star > 0.0;

  if (c.is_symmetric()) {
    rep.upper.push_back(bound_main(c, eps));
    rep.upper.push_back(bound_reference(c, ReferenceKind::nck));
    rep.upper.push_back(bound_reference(c, ReferenceKind::gordon));
    if (nonzero) rep.upper.push_back(bound_dimfree(c, dimfree_p));
    if (nonzero && c.rows() >= 2) rep.upper.push_back(bound_seginer(c));
    if (dist.family == Family::rademacher) rep.upper.push_back(bound_rademacher(c, eps));
  } else {
    rep.upper.push_back(bound_rect(c, eps));
    if (nonzero) rep.upper.push_back(bound_dimfree(c, dimfree_p));
  }

  if (gaussian) {
    const auto lower = lower_bound_estimate(c, opt.trials, SeedSpec{opt.seed, 0x6c6f776572ULL}.stream_seed());
    const double se = std::sqrt(lower.std_error * lower.std_error + mc.std_error * mc.std_error);
    rep.checks.push_back({"lower<=empirical", lower.mean <= mc.mean + 3.0 * se,
                          format_double(lower.mean) + " <= " + format_double(mc.mean) + " + 3*" + format_double(se)});
    rep.lower = lower;
    for (const auto& b : rep.upper) {
      if (b.constant_mode != ConstantMode::explicit_constants) continue;
      rep.checks.push_back({"empirical<=" + b.bound_name, mc.mean + 3.0 * mc.std_error <= b.value,
                            format_double(mc.mean) + " + 3*" + format_double(mc.std_error) + " <= " +
                                format_double(b.value)});
    }
  }
  return rep;
}

// ----------------------------------------------------------------- writers

namespace detail {

inline std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace detail

inline std::string phase_csv(const PhaseGridResult& r) {
  std::ostringstream out;
  out << "pattern,n,k,k_target,k_rule,trials,ratio_mean,ratio_stderr,norm_mean,norm_stderr\n";
  for (const auto& row : r.rows)
    out << r.pattern << ',' << row.n << ',' << row.k << ',' << row.k_target << ',' << row.k_rule << ','
        << row.trials << ',' << format_double(row.ratio_mean) << ',' << format_double(row.ratio_stderr) << ','
        << format_double(row.norm_mean) << ',' << format_double(row.norm_stderr) << '\n';
  return out.str();
}

inline std::string tails_csv(const TailTable& r) {
  std::ostringstream out;
  out << "t,threshold,empirical_survival,binomial_stderr,bound_value,second_threshold,second_survival,"
         "second_bound\n";
  for (const auto& row : r.rows)
    out << format_double(row.t) << ',' << format_double(row.threshold) << ','
        << format_double(row.empirical_survival) << ',' << format_double(row.binomial_stderr) << ','
        << format_double(row.bound_value) << ',' << detail::opt_field(row.second_threshold) << ','
        << detail::opt_field(row.second_survival) << ',' << detail::opt_field(row.second_bound) << '\n';
  return out.str();
}

inline std::string seginer_csv(const std::vector<SeginerRow>& rows) {
  std::ostringstream out;
  out << "n_requested,n,k,norm_mean,norm_stderr,ratio_mean,ratio_stderr\n";
  for (const auto& r : rows)
    out << r.n_requested << ',' << r.n << ',' << r.k << ',' << format_double(r.norm_mean) << ','
        << format_double(r.norm_stderr) << ',' << format_double(r.ratio_mean) << ','
        << format_double(r.ratio_stderr) << '\n';
  return out.str();
}

/// Per-trial values, one row per trial.
inline std::string trials_csv(const NormEstimate& e) {
  std::ostringstream out;
  out << "trial,value\n";
  for (std::size_t t = 0; t < e.per_trial_values.size(); ++t)
    out << t << ',' << format_double(e.per_trial_values[t]) << '\n';
  return out.str();
}

inline nlohmann::json estimate_json(const NormEstimate& e) {
  return {{"mean", e.mean},
          {"std_error", e.std_error},
          {"trials", e.trials},
          {"seed", e.seed}};
}

inline nlohmann::json report_json(const EmpiricalReport& r) {
  nlohmann::json j;
  if (r.lower) j["lower_bound_estimate"] = estimate_json(*r.lower);
  j["empirical_norm"] = estimate_json(r.empirical.norm);
  j["empirical_column_max"] = estimate_json(r.empirical.column_max);
  j["column_ratio"] = r.column_ratio;
  j["upper_bounds"] = nlohmann::json::array();
  for (const auto& b : r.upper) j["upper_bounds"].push_back(to_json(b));
  j["checks"] = nlohmann::json::array();
  for (const auto& c : r.checks) j["checks"].push_back({{"name", c.name}, {"holds", c.holds}, {"detail", c.detail}});
  j["all_hold"] = r.all_hold();
  return j;
}

}  // namespace rmb
