#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <string_view>

#include "rmbound/coeffs.hpp"
#include "rmbound/error.hpp"
#include "rmbound/format.hpp"
#include "rmbound/matrix.hpp"
#include "rmbound/rng.hpp"

namespace rmb {

enum class Family { gaussian, rademacher, bounded_uniform, heavy_tailed, custom };

/// Law of the i.i.d. multipliers xi_ij.
///
/// heavy_tailed(beta) is the law of g * |g'|^(beta - 1) for independent
/// standard normals g, g'. With `normalize` it is divided by its exact
/// standard deviation. `custom` draws from a caller-supplied sampler and is
/// the hook for asymmetric laws (e.g. to exercise symmetrization).
struct EntryDistribution {
  Family family = Family::gaussian;
  double beta = 1.0;
  bool normalize = true;
  std::function<double(Rng&)> sampler;
  std::string label;

  static EntryDistribution gaussian() { return {Family::gaussian, 1.0, true, {}, "gaussian"}; }
  static EntryDistribution rademacher() {
    return {Family::rademacher, 1.0, true, {}, "rademacher"};
  }
  static EntryDistribution bounded_uniform() {
    return {Family::bounded_uniform, 1.0, true, {}, "uniform"};
  }
  static EntryDistribution heavy_tailed(double beta, bool normalize = true) {
    if (!(beta >= 1.0) || !std::isfinite(beta))
      throw ParameterError("heavy-tailed law needs beta >= 1");
    return {Family::heavy_tailed, beta, normalize, {}, "heavy:" + format_double(beta)};
  }
  static EntryDistribution custom(std::function<double(Rng&)> f, std::string label = "custom") {
    return {Family::custom, 1.0, false, std::move(f), std::move(label)};
  }

  std::string code() const { return label; }
};

/// CLI codes: "gaussian" | "rademacher" | "uniform" | "heavy:<beta>".
inline EntryDistribution parse_distribution(std::string_view code) {
  if (code == "gaussian") return EntryDistribution::gaussian();
  if (code == "rademacher") return EntryDistribution::rademacher();
  if (code == "uniform") return EntryDistribution::bounded_uniform();
  if (code.substr(0, 6) == "heavy:") return EntryDistribution::heavy_tailed(parse_double(code.substr(6)));
  throw ParameterError("unknown distribution '" + std::string(code) + "'");
}

/// E|g|^q for a standard normal g and real q > -1.
inline double abs_gaussian_moment(double q) {
  if (q == 0.0) return 1.0;
  return std::exp(q / 2.0 * std::log(2.0) + std::lgamma((q + 1.0) / 2.0)) /
         std::sqrt(std::numbers::pi);
}

/// (order - 1)!! as a double for even order.
inline double double_factorial_odd(int order) {
  double r = 1.0;
  for (int k = order - 1; k > 1; k -= 2) r *= k;
  return r;
}

/// Exact E[xi^order] for even positive order.
inline double distribution_moment(const EntryDistribution& d, int order) {
  if (order <= 0 || order % 2 != 0) throw ParameterError("moment order must be even and positive");
  const int p = order / 2;
  switch (d.family) {
    case Family::gaussian:
      return double_factorial_odd(order);
    case Family::rademacher:
      return 1.0;
    case Family::bounded_uniform:
      return std::pow(3.0, p) / (2.0 * p + 1.0);
    case Family::heavy_tailed: {
      const double q = order * (d.beta - 1.0);
      double m;
      const double qr = std::round(q);
      if (std::abs(q - qr) < 1e-12 && static_cast<long long>(qr) % 2 == 0) {
        m = double_factorial_odd(order) * double_factorial_odd(static_cast<int>(qr));
      } else {
        // 2^(p beta) / pi * Gamma(p + 1/2) * Gamma(p (beta - 1) + 1/2)
        m = std::exp(p * d.beta * std::log(2.0) + std::lgamma(p + 0.5) +
                     std::lgamma(p * (d.beta - 1.0) + 0.5)) /
            std::numbers::pi;
      }
      if (d.normalize) m /= std::pow(abs_gaussian_moment(2.0 * (d.beta - 1.0)), p);
      return m;
    }
    case Family::custom:
      break;
  }
  throw ParameterError("no closed-form moments for a custom distribution");
}

/// One draw of xi.
inline double draw(const EntryDistribution& d, Rng& rng) {
  switch (d.family) {
    case Family::gaussian:
      return rng.normal();
    case Family::rademacher:
      return rng.coin() ? 1.0 : -1.0;
    case Family::bounded_uniform:
      return std::numbers::sqrt3 * (2.0 * rng.uniform() - 1.0);
    case Family::heavy_tailed: {
      const double g = rng.normal();
      const double h = rng.normal();
      double v = g * std::pow(std::abs(h), d.beta - 1.0);
      if (d.normalize) v /= std::sqrt(abs_gaussian_moment(2.0 * (d.beta - 1.0)));
      return v;
    }
    case Family::custom:
      if (!d.sampler) throw ParameterError("custom distribution without a sampler");
      return d.sampler(rng);
  }
  throw ParameterError("unknown distribution family");
}

/// X_ij = xi_ij b_ij drawn from an existing stream.
///
/// Draws are consumed only at nonzero coefficients, in row-major order over
/// the upper triangle (i <= j) for symmetric C and over all entries
/// otherwise, so dense and sparse storage of one pattern give the same X.
inline Matrix sample_matrix(const CoefficientMatrix& c, const EntryDistribution& d, Rng& rng) {
  const Matrix& b = c.matrix();
  if (b.is_sparse()) {
    SparseMatrix x = b.sparse();
    const auto& mirror = c.mirror_slots();
    const int* outer = x.outerIndexPtr();
    const int* inner = x.innerIndexPtr();
    double* values = x.valuePtr();
    for (Index i = 0; i < x.outerSize(); ++i) {
      for (int k = outer[i]; k < outer[i + 1]; ++k) {
        if (c.is_symmetric() && inner[k] < i) continue;
        const double v = values[k] * draw(d, rng);
        values[k] = v;
        if (c.is_symmetric()) values[mirror[static_cast<std::size_t>(k)]] = v;
      }
    }
    return Matrix(std::move(x));
  }
  const DenseMatrix& bd = b.dense();
  DenseMatrix x = DenseMatrix::Zero(bd.rows(), bd.cols());
  for (Index i = 0; i < bd.rows(); ++i) {
    for (Index j = c.is_symmetric() ? i : 0; j < bd.cols(); ++j) {
      if (bd(i, j) == 0.0) continue;
      const double v = bd(i, j) * draw(d, rng);
      x(i, j) = v;
      if (c.is_symmetric()) x(j, i) = v;
    }
  }
  return Matrix(std::move(x));
}

inline Matrix sample_matrix(const CoefficientMatrix& c, const EntryDistribution& d,
                            const SeedSpec& seed) {
  Rng rng(seed);
  return sample_matrix(c, d, rng);
}

/// X - X' for two independent draws taken consecutively from one stream.
inline Matrix symmetrized_difference(const CoefficientMatrix& c, const EntryDistribution& d,
                                     const SeedSpec& seed) {
  Rng rng(seed);
  const Matrix x = sample_matrix(c, d, rng);
  const Matrix y = sample_matrix(c, d, rng);
  if (x.is_sparse()) return Matrix(SparseMatrix(x.sparse() - y.sparse()));
  return Matrix(DenseMatrix(x.dense() - y.dense()));
}

}  // namespace rmb
