#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "rmbound/coeffs.hpp"
#include "rmbound/error.hpp"
#include "rmbound/estimate.hpp"
#include "rmbound/sampling.hpp"
#include "rmbound/specnorm.hpp"

namespace rmb {

/// explicit: the value carries the published constants. structural: the
/// bracketed expression with constant 1 ("up to a universal constant").
enum class ConstantMode { explicit_constants, structural };

inline const char* to_string(ConstantMode m) {
  return m == ConstantMode::explicit_constants ? "explicit" : "structural";
}

struct BoundReport {
  std::string bound_name;
  double value = 0.0;
  double epsilon_or_alpha = 0.0;  ///< epsilon, alpha, beta or p depending on the bound
  ConstantMode constant_mode = ConstantMode::structural;
  StructuralParams inputs;
  Index n = 0;
  Index m = 0;
  std::optional<double> minimizer;  ///< u* for the Seginer bound
  std::string note;
};

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j = {{"bound_name", r.bound_name},
                      {"value", r.value},
                      {"constant_mode", to_string(r.constant_mode)},
                      {"epsilon", r.epsilon_or_alpha},
                      {"sigma", r.inputs.sigma},
                      {"sigma_star", r.inputs.sigma_star},
                      {"sigma1", r.inputs.sigma1},
                      {"sigma2", r.inputs.sigma2},
                      {"n", r.n},
                      {"m", r.m}};
  if (r.minimizer) j["minimizer"] = *r.minimizer;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline void check_epsilon(double eps) {
  if (!(eps > 0.0 && eps <= 0.5)) throw ParameterError("epsilon must be in (0, 1/2]");
}

inline void check_alpha(double alpha) {
  if (!(alpha >= 3.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be >= 3");
}

/// sqrt(log n), zero for n = 1.
inline double sqrt_log(double n) { return n > 1.0 ? std::sqrt(std::log(n)) : 0.0; }

// -- closed forms on structural parameters -------------------------------

/// (1+eps) {2 sigma + 6/sqrt(log(1+eps)) sigma_* sqrt(log n)}
inline double main_bound_value(double sigma, double sigma_star, double n, double eps) {
  check_epsilon(eps);
  return (1.0 + eps) *
         (2.0 * sigma + 6.0 / std::sqrt(std::log1p(eps)) * sigma_star * sqrt_log(n));
}

/// (1+eps) {sigma1 + sigma2 + 5/sqrt(log(1+eps)) sigma_* sqrt(log min(n,m))}
inline double rect_bound_value(double sigma1, double sigma2, double sigma_star, double n, double m,
                               double eps) {
  check_epsilon(eps);
  return (1.0 + eps) * (sigma1 + sigma2 +
                        5.0 / std::sqrt(std::log1p(eps)) * sigma_star * sqrt_log(std::min(n, m)));
}

/// e^(2/alpha) {2 sigma + 14 alpha M sqrt(log n)}
inline double bounded_entries_value(double sigma, double max_moment, double n, double alpha) {
  check_alpha(alpha);
  return std::exp(2.0 / alpha) * (2.0 * sigma + 14.0 * alpha * max_moment * sqrt_log(n));
}

/// sigma + sigma_* (log n)^(max(beta,1)/2)
inline double heavy_bound_value(double sigma, double sigma_star, double n, double beta) {
  if (!(beta > 0.0)) throw ParameterError("beta must be > 0");
  const double l = n > 1.0 ? std::log(n) : 0.0;
  return sigma + sigma_star * std::pow(l, std::max(beta, 1.0) / 2.0);
}

/// Minimizer u* = sigma / (log n)^(1/4) of sigma + u sqrt(log n) + sigma^2/u
/// and the minimum sigma + 2 sigma (log n)^(1/4).
inline std::pair<double, double> seginer_closed_form(double sigma, double log_n) {
  const double q = std::pow(log_n, 0.25);
  return {sigma / q, sigma + 2.0 * sigma * q};
}

inline double seginer_objective(double sigma, double log_n, double u) {
  return sigma + u * std::sqrt(log_n) + sigma * sigma / u;
}

/// 2 sqrt(r) + 2 sqrt(2p), or sqrt(r) + sqrt(r') + 2 sqrt(p) with r'.
inline double gaussian_moment_bounds(long long r, long long p, std::optional<long long> rprime = {}) {
  if (p < 2) throw ParameterError("moment bound requires p >= 2");
  if (r < 1 || (rprime && *rprime < 1)) throw ParameterError("dimensions must be positive");
  const double rd = static_cast<double>(r), pd = static_cast<double>(p);
  if (!rprime) return 2.0 * std::sqrt(rd) + 2.0 * std::sqrt(2.0 * pd);
  return std::sqrt(rd) + std::sqrt(static_cast<double>(*rprime)) + 2.0 * std::sqrt(pd);
}

// -- reports on a coefficient matrix -------------------------------------

namespace detail {

inline BoundReport make_report(const CoefficientMatrix& c, std::string name, double value,
                               double param, ConstantMode mode) {
  BoundReport r;
  r.bound_name = std::move(name);
  r.value = value;
  r.epsilon_or_alpha = param;
  r.constant_mode = mode;
  r.inputs = structural_params(c);
  r.n = c.rows();
  r.m = c.cols();
  return r;
}

inline void require_symmetric(const CoefficientMatrix& c, const char* what) {
  if (!c.is_symmetric()) throw KindError(std::string(what) + " requires a symmetric coefficient matrix");
}

}  // namespace detail

inline BoundReport bound_main(const CoefficientMatrix& c, double eps) {
  check_epsilon(eps);
  detail::require_symmetric(c, "bound_main");
  const auto p = structural_params(c);
  return detail::make_report(c, "main",
                             main_bound_value(p.sigma, p.sigma_star, static_cast<double>(c.rows()), eps),
                             eps, ConstantMode::explicit_constants);
}

/// Any C is read as an n x m matrix (a symmetric C is viewed as square).
inline BoundReport bound_rect(const CoefficientMatrix& c, double eps) {
  check_epsilon(eps);
  const auto p = structural_params(c.as_rectangular());
  auto r = detail::make_report(
      c, "rect",
      rect_bound_value(p.sigma1, p.sigma2, p.sigma_star, static_cast<double>(c.rows()),
                       static_cast<double>(c.cols()), eps),
      eps, ConstantMode::explicit_constants);
  r.inputs = p;
  return r;
}

enum class ReferenceKind { nck, gordon };

/// sigma sqrt(log n) (noncommutative Khintchine) or sigma_* sqrt(n) (Gordon).
inline BoundReport bound_reference(const CoefficientMatrix& c, ReferenceKind kind) {
  detail::require_symmetric(c, "bound_reference");
  const auto p = structural_params(c);
  const double n = static_cast<double>(c.rows());
  if (kind == ReferenceKind::nck)
    return detail::make_report(c, "nck", p.sigma * sqrt_log(n), 0.0, ConstantMode::structural);
  return detail::make_report(c, "gordon", p.sigma_star * std::sqrt(n), 0.0, ConstantMode::structural);
}

/// Centered subgaussian entries: the Gaussian value, valid only up to a
/// constant depending on the subgaussian tail parameters.
inline BoundReport bound_subgaussian(const CoefficientMatrix& c, double eps) {
  auto r = c.is_symmetric() ? bound_main(c, eps) : bound_rect(c, eps);
  r.bound_name = c.is_symmetric() ? "subgaussian" : "subgaussian_rect";
  r.constant_mode = ConstantMode::structural;
  r.note = "extra universal constant depending on the subgaussian tail parameters";
  return r;
}

inline BoundReport bound_heavy(const CoefficientMatrix& c, double beta) {
  detail::require_symmetric(c, "bound_heavy");
  const auto p = structural_params(c);
  return detail::make_report(c, "heavy",
                             heavy_bound_value(p.sigma, p.sigma_star, static_cast<double>(c.rows()), beta),
                             beta, ConstantMode::structural);
}

/// entry_moment(i, j, q) must return || xi_ij b_ij ||_q.
using EntryMoment = std::function<double(Index, Index, int)>;

/// Moment order 2 ceil(alpha log n) used by the bounded-entries bound.
inline int bounded_entries_order(double alpha, Index n) {
  const double l = n > 1 ? std::log(static_cast<double>(n)) : 0.0;
  return std::max(2, 2 * static_cast<int>(std::ceil(alpha * l)));
}

inline BoundReport bound_bounded_entries(const CoefficientMatrix& c, double alpha,
                                         const EntryMoment& entry_moment) {
  check_alpha(alpha);
  detail::require_symmetric(c, "bound_bounded_entries");
  const int q = bounded_entries_order(alpha, c.rows());
  double worst = 0.0;
  c.matrix().for_each_nonzero([&](Index i, Index j, double) {
    if (i > j) return;
    const double v = entry_moment(i, j, q);
    if (!std::isfinite(v) || v < 0.0) throw DataError("entry moment must be finite and >= 0");
    worst = std::max(worst, v);
  });
  const auto p = structural_params(c);
  auto r = detail::make_report(
      c, "bounded_entries",
      bounded_entries_value(p.sigma, worst, static_cast<double>(c.rows()), alpha), alpha,
      ConstantMode::explicit_constants);
  return r;
}

/// || xi b_ij ||_q computed from the exact moments of a named family.
inline EntryMoment entry_moment_from(const CoefficientMatrix& c, const EntryDistribution& d) {
  return [&c, d](Index i, Index j, int q) {
    return std::abs(c(i, j)) * std::pow(distribution_moment(d, q), 1.0 / q);
  };
}

/// sigma + sigma_* sqrt(max(0, log(|b|_p / sigma_*))); rectangular uses
/// sigma1 + sigma2 as the leading term.
inline BoundReport bound_dimfree(const CoefficientMatrix& c, double p) {
  if (!(p >= 1.0 && p < 2.0)) throw ParameterError("dimension-free bound needs 1 <= p < 2");
  const auto s = structural_params(c);
  if (s.sigma_star == 0.0) throw DataError("dimension-free bound needs a nonzero matrix");
  const double lp = lp_entrywise_norm(c, p);
  const double tail = s.sigma_star * std::sqrt(std::max(0.0, std::log(lp / s.sigma_star)));
  const double lead = c.is_symmetric() ? s.sigma : s.sigma1 + s.sigma2;
  return detail::make_report(c, c.is_symmetric() ? "dimfree" : "dimfree_rect", lead + tail, p,
                             ConstantMode::structural);
}

inline BoundReport bound_seginer(const CoefficientMatrix& c) {
  detail::require_symmetric(c, "bound_seginer");
  if (c.rows() < 2) throw ParameterError("Seginer bound needs n >= 2");
  const auto s = structural_params(c);
  if (s.sigma == 0.0) throw DataError("Seginer bound needs a nonzero matrix");
  const auto [u, value] = seginer_closed_form(s.sigma, std::log(static_cast<double>(c.rows())));
  auto r = detail::make_report(c, "seginer", value, 0.0, ConstantMode::structural);
  r.minimizer = u;
  return r;
}

/// min(main bound, ||B||) with B = (|b_ij|).
inline BoundReport bound_rademacher(const CoefficientMatrix& c, double eps) {
  check_epsilon(eps);
  detail::require_symmetric(c, "bound_rademacher");
  const double main = bound_main(c, eps).value;
  const Matrix abs_b = c.matrix().map([](double v) { return std::abs(v); });
  const double b_norm = spectral_norm(abs_b).value;
  auto r = detail::make_report(c, "rademacher", std::min(main, b_norm), eps, ConstantMode::structural);
  return r;
}

/// sigma + E max_ij |b_ij g_ij| (sigma1 + sigma2 + ... when rectangular),
/// the max estimated by Monte Carlo over `trials` Gaussian draws.
inline NormEstimate lower_bound_estimate(const CoefficientMatrix& c, int trials, std::uint64_t seed) {
  if (trials < 1) throw ParameterError("trials must be >= 1");
  const auto s = structural_params(c);
  const double lead = c.is_symmetric() ? s.sigma : s.sigma1 + s.sigma2;
  std::vector<double> maxima(static_cast<std::size_t>(trials));
  const auto g = EntryDistribution::gaussian();
  for (int t = 0; t < trials; ++t) {
    const Matrix x = sample_matrix(c, g, SeedSpec{seed, static_cast<std::uint64_t>(t)});
    double mx = 0.0;
    x.for_each_nonzero([&](Index, Index, double v) { mx = std::max(mx, std::abs(v)); });
    maxima[static_cast<std::size_t>(t)] = mx;
  }
  auto est = summarize(std::move(maxima), seed);
  est.mean += lead;
  for (auto& v : est.per_trial_values) v += lead;
  return est;
}

struct TailBound {
  double threshold = 0.0;
  double probability = 1.0;
};

/// P[||X|| >= bound + t] <= exp(-t^2 / (4 sigma_*^2)) (symmetric) or
/// exp(-t^2 / (2 sigma_*^2)) (rectangular).
inline TailBound tail_bound(const CoefficientMatrix& c, MatrixKind shape, double eps, double t) {
  check_epsilon(eps);
  if (!(t >= 0.0)) throw ParameterError("t must be >= 0");
  const auto s = shape == MatrixKind::symmetric ? structural_params(c) : structural_params(c.as_rectangular());
  const double base = shape == MatrixKind::symmetric ? bound_main(c, eps).value : bound_rect(c, eps).value;
  const double denom = (shape == MatrixKind::symmetric ? 4.0 : 2.0) * s.sigma_star * s.sigma_star;
  const double prob = t == 0.0 ? 1.0 : (denom > 0.0 ? std::exp(-t * t / denom) : 0.0);
  return {base + t, prob};
}

/// c_eps = (2 + C'_eps)^2 with C'_eps = 6 (1+eps) / sqrt(log(1+eps)).
inline double c_epsilon(double eps) {
  check_epsilon(eps);
  const double cp = 6.0 * (1.0 + eps) / std::sqrt(std::log1p(eps));
  return (2.0 + cp) * (2.0 + cp);
}

/// Bounded-entry analogue: C'_eps replaced by e^(2/alpha) 14 alpha with
/// e^(2/alpha) = 1 + eps.
inline double c_tilde_epsilon(double eps) {
  check_epsilon(eps);
  const double alpha = 2.0 / std::log1p(eps);
  const double cp = (1.0 + eps) * 14.0 * alpha;
  return (2.0 + cp) * (2.0 + cp);
}

enum class TailVariant { gaussian, bounded };

/// min(1, n exp(-t^2 / (c sigma_*^2))) above the threshold (1+eps) 2 sigma.
/// For `bounded`, sigma and sigma_* are the variance-based and sup-based
/// parameters supplied by the caller.
inline TailBound tail_bound_second_form(double sigma, double sigma_star, double n, double eps,
                                        double t, TailVariant variant) {
  check_epsilon(eps);
  if (!(t >= 0.0)) throw ParameterError("t must be >= 0");
  const double c = variant == TailVariant::gaussian ? c_epsilon(eps) : c_tilde_epsilon(eps);
  const double denom = c * sigma_star * sigma_star;
  const double prob = denom > 0.0 ? std::min(1.0, n * std::exp(-t * t / denom)) : (t > 0.0 ? 0.0 : 1.0);
  return {(1.0 + eps) * 2.0 * sigma + t, prob};
}

inline TailBound tail_bound_second_form(const CoefficientMatrix& c, double eps, double t) {
  detail::require_symmetric(c, "tail_bound_second_form");
  const auto s = structural_params(c);
  return tail_bound_second_form(s.sigma, s.sigma_star, static_cast<double>(c.rows()), eps, t,
                                TailVariant::gaussian);
}

struct ReferenceTails {
  double concentration = 1.0;  ///< min(1, n exp(-t^2 / (8 sigma^2)))
  double bernstein = 1.0;      ///< min(1, n exp(-t^2 / (c (s^2 + s_* t))))
};

inline ReferenceTails reference_tail_curves(double sigma, double sigma_tilde,
                                            double sigma_tilde_star, double n, double t,
                                            double c = 8.0) {
  if (!(t >= 0.0)) throw ParameterError("t must be >= 0");
  ReferenceTails r;
  if (sigma > 0.0) r.concentration = std::min(1.0, n * std::exp(-t * t / (8.0 * sigma * sigma)));
  const double bd = c * (sigma_tilde * sigma_tilde + sigma_tilde_star * t);
  if (bd > 0.0) r.bernstein = std::min(1.0, n * std::exp(-t * t / bd));
  return r;
}

}  // namespace rmb
