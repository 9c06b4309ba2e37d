#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "rmbound/error.hpp"
#include "rmbound/matrix.hpp"
#include "rmbound/rng.hpp"

namespace rmb {

enum class NormMethod { dense_eig, lanczos, power };

inline const char* to_string(NormMethod m) {
  switch (m) {
    case NormMethod::dense_eig: return "dense_eig";
    case NormMethod::lanczos: return "lanczos";
    case NormMethod::power: return "power";
  }
  return "?";
}

struct NormResult {
  double value = 0.0;
  NormMethod method = NormMethod::dense_eig;
  int iterations = 0;
  double rel_error_bound = 0.0;
};

/// Largest dimension handled by the dense symmetric eigensolver.
inline constexpr Index kDenseThreshold = 2048;
/// Largest dimension for which eigenvalues_all computes a full spectrum.
inline constexpr Index kFullSpectrumMax = 4096;
inline constexpr double kDefaultNormTol = 1e-6;

struct NormOptions {
  double tol = kDefaultNormTol;
  std::optional<NormMethod> method;
  int krylov_cap = 300;
  int max_restarts = 60;
  int max_power_iterations = 200000;
  bool split_components = true;
};

namespace detail {

using LinearOp = std::function<Vector(const Vector&)>;

inline Vector start_vector(Index n) {
  Rng rng(SeedSpec{0x6c616e637a6f73ULL, static_cast<std::uint64_t>(n)});
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v / v.norm();
}

/// Lanczos with full reorthogonalization for max |eigenvalue| of a
/// symmetric operator. Tracks both extreme Ritz values; restarts from the
/// sum of the two extreme Ritz vectors when the Krylov cap is reached or
/// orthogonality is lost.
inline NormResult lanczos_abs_max(const LinearOp& op, Index n, const NormOptions& opt) {
  const Index cap = std::max<Index>(1, std::min<Index>(opt.krylov_cap, n));
  constexpr Index kCheckEvery = 10;
  DenseMatrix basis(n, cap + 1);
  Vector v = start_vector(n);
  int total = 0;
  double best = 0.0;
  double best_rel = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    std::vector<double> alpha, beta;
    basis.col(0) = v;
    double scale = 0.0;
    Eigen::SelfAdjointEigenSolver<DenseMatrix> tri;
    Index dom = 0, opp = 0, m = 0;
    bool need_restart = false;
    for (Index j = 0; j < cap; ++j) {
      Vector w = op(basis.col(j));
      ++total;
      const double a = basis.col(j).dot(w);
      w -= a * basis.col(j);
      if (j > 0) w -= beta.back() * basis.col(j - 1);
      for (int pass = 0; pass < 2; ++pass) {
        const Vector h = basis.leftCols(j + 1).transpose() * w;
        w -= basis.leftCols(j + 1) * h;
      }
      const double b = w.norm();
      alpha.push_back(a);
      beta.push_back(b);
      scale = std::max(scale, std::abs(a) + b + (j > 0 ? beta[beta.size() - 2] : 0.0));
      const bool breakdown = b <= 1e-12 * scale || scale == 0.0;
      bool lost = false;
      if (!breakdown) {
        const double leak = (basis.leftCols(j + 1).transpose() * (w / b)).cwiseAbs().maxCoeff();
        lost = leak > 1e-8;
      }
      m = j + 1;
      if ((m % kCheckEvery) == 0 || breakdown || lost || m == cap) {
        Vector diag = Eigen::Map<const Vector>(alpha.data(), m);
        Vector sub = Eigen::Map<const Vector>(beta.data(), m - 1);
        tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        const auto& theta = tri.eigenvalues();
        const bool top_is_max = std::abs(theta(m - 1)) >= std::abs(theta(0));
        dom = top_is_max ? m - 1 : 0;
        opp = top_is_max ? 0 : m - 1;
        const double val = std::abs(theta(dom));
        const double res_d = std::abs(b * tri.eigenvectors()(m - 1, dom));
        const double res_o = std::abs(b * tri.eigenvectors()(m - 1, opp));
        best = val;
        best_rel = val > 0.0 ? res_d / val : 0.0;
        if (val == 0.0 || breakdown) return {val, NormMethod::lanczos, total, breakdown ? 0.0 : best_rel};
        const bool converged =
            res_d <= opt.tol * val &&
            (std::abs(theta(opp)) + res_o <= val * (1.0 + opt.tol) || res_o <= opt.tol * val);
        if (converged) return {val, NormMethod::lanczos, total, best_rel};
        if (lost || m == cap) {
          need_restart = true;
          break;
        }
      }
      basis.col(j + 1) = w / b;
    }
    if (!need_restart) break;
    Vector y = tri.eigenvectors().col(dom);
    if (opp != dom) y += tri.eigenvectors().col(opp);
    v = basis.leftCols(m) * y;
    v /= v.norm();
  }
  throw NonConvergence("Lanczos did not converge", best, best_rel);
}

/// Power iteration on the Gram operator; returns sqrt of its top eigenvalue.
inline NormResult power_gram(const LinearOp& gram, Index n, const NormOptions& opt) {
  Vector v = start_vector(n);
  double theta = 0.0, rel = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opt.max_power_iterations; ++it) {
    Vector w = gram(v);
    theta = v.dot(w);
    if (theta <= 0.0) return {0.0, NormMethod::power, it, 0.0};
    rel = (w - theta * v).norm() / theta;
    // Relative error of sqrt(theta) is half that of theta.
    if (rel / 2.0 <= opt.tol) return {std::sqrt(theta), NormMethod::power, it, rel / 2.0};
    v = w / w.norm();
  }
  throw NonConvergence("power iteration did not converge", std::sqrt(std::max(theta, 0.0)), rel / 2.0);
}

inline bool exactly_symmetric(const Matrix& m) {
  return m.rows() == m.cols() && m.asymmetry() == 0.0;
}

inline NormResult dense_norm(const Matrix& m, bool symmetric) {
  const double eps = std::numeric_limits<double>::epsilon();
  if (symmetric) {
    if (m.rows() == 1) return {std::abs(m(0, 0)), NormMethod::dense_eig, 0, 0.0};
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(m.to_dense(), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return {std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1))), NormMethod::dense_eig, 0,
            eps * static_cast<double>(m.rows())};
  }
  const DenseMatrix d = m.to_dense();
  const DenseMatrix gram = d.rows() <= d.cols() ? DenseMatrix(d * d.transpose())
                                                : DenseMatrix(d.transpose() * d);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(gram, Eigen::EigenvaluesOnly);
  const double top = std::max(0.0, es.eigenvalues().maxCoeff());
  return {std::sqrt(top), NormMethod::dense_eig, 0,
          eps * static_cast<double>(std::max(d.rows(), d.cols()))};
}

inline NormResult connected_norm(const Matrix& m, bool symmetric, const NormOptions& opt) {
  const Index n = m.rows(), k = m.cols();
  NormMethod method;
  if (opt.method) {
    method = *opt.method;
  } else if (symmetric) {
    method = n <= kDenseThreshold ? NormMethod::dense_eig : NormMethod::lanczos;
  } else {
    method = std::min(n, k) <= kDenseThreshold ? NormMethod::dense_eig : NormMethod::lanczos;
  }
  if (method == NormMethod::dense_eig) return dense_norm(m, symmetric);
  if (method == NormMethod::lanczos) {
    if (symmetric) return lanczos_abs_max([&](const Vector& x) { return m.multiply(x); }, n, opt);
    // Symmetric dilation [[0, X], [X^T, 0]] has the same norm as X.
    return lanczos_abs_max(
        [&](const Vector& x) {
          Vector y(n + k);
          y.head(n) = m.multiply(x.tail(k));
          y.tail(k) = m.multiply_transpose(x.head(n));
          return y;
        },
        n + k, opt);
  }
  if (symmetric)
    return power_gram([&](const Vector& x) { return m.multiply(m.multiply(x)); }, n, opt);
  return power_gram([&](const Vector& x) { return m.multiply_transpose(m.multiply(x)); }, k, opt);
}

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), Index(0));
  }
  Index find(Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      auto& p = parent[static_cast<std::size_t>(x)];
      p = parent[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

}  // namespace detail

/// Spectral norm ||M||: max |eigenvalue| for exactly symmetric M, largest
/// singular value otherwise.
///
/// Sparse inputs are split into the connected components of their support
/// graph (rows and columns as separate vertices when M is not symmetric);
/// the norm is the maximum over components, each solved by the default
/// method for its own size.
inline NormResult spectral_norm(const Matrix& m, const NormOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw ParameterError("tolerance must be > 0");
  if (!m.all_finite()) throw DataError("matrix has NaN or Inf entries");
  const bool symmetric = detail::exactly_symmetric(m);
  if (!m.is_sparse() || !opt.split_components || opt.method)
    return detail::connected_norm(m, symmetric, opt);

  const Index n = m.rows(), k = m.cols();
  const Index offset = symmetric ? 0 : n;
  detail::UnionFind uf(symmetric ? n : n + k);
  m.for_each_nonzero([&](Index i, Index j, double) { uf.unite(i, j + offset); });
  std::vector<Index> root(static_cast<std::size_t>(symmetric ? n : n + k));
  for (Index v = 0; v < static_cast<Index>(root.size()); ++v) root[static_cast<std::size_t>(v)] = uf.find(v);

  // Group entries by component.
  std::vector<Index> comp_id(root.size(), -1);
  Index ncomp = 0;
  for (std::size_t v = 0; v < root.size(); ++v) {
    auto& id = comp_id[static_cast<std::size_t>(root[v])];
    if (id < 0) id = ncomp++;
  }
  if (ncomp == 1) return detail::connected_norm(m, symmetric, opt);

  std::vector<Index> local(root.size(), 0);
  std::vector<Index> comp_rows(static_cast<std::size_t>(ncomp), 0), comp_cols(static_cast<std::size_t>(ncomp), 0);
  for (std::size_t v = 0; v < root.size(); ++v) {
    const auto c = static_cast<std::size_t>(comp_id[static_cast<std::size_t>(root[v])]);
    if (symmetric || static_cast<Index>(v) < n) {
      local[v] = comp_rows[c]++;
    } else {
      local[v] = comp_cols[c]++;
    }
  }
  std::vector<std::vector<Entry>> parts(static_cast<std::size_t>(ncomp));
  m.for_each_nonzero([&](Index i, Index j, double val) {
    const auto c = static_cast<std::size_t>(comp_id[static_cast<std::size_t>(root[static_cast<std::size_t>(i)])]);
    parts[c].push_back({local[static_cast<std::size_t>(i)],
                        local[static_cast<std::size_t>(j + offset)], val});
  });

  NormResult out{0.0, NormMethod::dense_eig, 0, 0.0};
  for (std::size_t c = 0; c < parts.size(); ++c) {
    if (parts[c].empty()) continue;
    const Index r = comp_rows[c];
    const Index q = symmetric ? r : comp_cols[c];
    NormResult sub;
    if (parts[c].size() == 1) {
      sub = {std::abs(parts[c][0].value), NormMethod::dense_eig, 0, 0.0};
    } else {
      sub = detail::connected_norm(Matrix::from_entries(r, q, std::move(parts[c])), symmetric, opt);
    }
    out.iterations += sub.iterations;
    out.rel_error_bound = std::max(out.rel_error_bound, sub.rel_error_bound);
    if (sub.value > out.value) {
      out.value = sub.value;
      out.method = sub.method;
    }
  }
  return out;
}

inline NormResult spectral_norm(const Matrix& m, double tol,
                                std::optional<NormMethod> method = std::nullopt) {
  NormOptions opt;
  opt.tol = tol;
  opt.method = method;
  return spectral_norm(m, opt);
}

/// max_i ||M e_i|| (largest Euclidean column norm).
inline double max_row_norm(const Matrix& m) {
  std::vector<double> sq(static_cast<std::size_t>(m.cols()), 0.0);
  m.for_each_nonzero([&](Index, Index j, double v) { sq[static_cast<std::size_t>(j)] += v * v; });
  return std::sqrt(sq.empty() ? 0.0 : *std::max_element(sq.begin(), sq.end()));
}

/// Full spectrum of a symmetric matrix, descending.
inline std::vector<double> eigenvalues_all(const Matrix& m) {
  if (!detail::exactly_symmetric(m)) throw KindError("eigenvalues_all needs a symmetric matrix");
  if (m.rows() > kFullSpectrumMax)
    throw SizeError("full spectrum limited to n <= " + std::to_string(kFullSpectrumMax) +
                    "; sample Ritz values from Lanczos for larger matrices");
  if (!m.all_finite()) throw DataError("matrix has NaN or Inf entries");
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(m.to_dense(), Eigen::EigenvaluesOnly);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::reverse(ev.begin(), ev.end());
  return ev;
}

}  // namespace rmb
