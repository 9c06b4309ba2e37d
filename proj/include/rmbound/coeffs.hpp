#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "rmbound/error.hpp"
#include "rmbound/format.hpp"
#include "rmbound/matrix.hpp"
#include "rmbound/rng.hpp"

namespace rmb {

enum class MatrixKind { symmetric, rectangular };

inline const char* to_string(MatrixKind k) {
  return k == MatrixKind::symmetric ? "symmetric" : "rectangular";
}

/// Symmetric patterns built in code must be exactly symmetric.
inline constexpr double kBuiltSymmetryTolerance = 0.0;
/// Matrices read from files may deviate by rounding noise.
inline constexpr double kFileSymmetryTolerance = 1e-12;

/// The deterministic coefficient pattern (b_ij) of a random matrix.
///
/// A symmetric coefficient matrix is exactly symmetric after construction.
/// Values are immutable, so instances can be shared across threads.
class CoefficientMatrix {
 public:
  CoefficientMatrix() = default;

  static CoefficientMatrix symmetric(Matrix m, double tolerance = kBuiltSymmetryTolerance) {
    if (m.rows() != m.cols())
      throw ValidationError("symmetric coefficient matrix must be square");
    if (!m.all_finite()) throw DataError("coefficient entries must be finite");
    const double asym = m.asymmetry();
    if (asym > tolerance)
      throw ValidationError("coefficient matrix is not symmetric (max |b_ij - b_ji| = " +
                            format_double(asym) + ")");
    if (asym > 0.0) m = mirror_upper(m);
    CoefficientMatrix c;
    c.kind_ = MatrixKind::symmetric;
    c.matrix_ = std::move(m);
    c.index_mirror();
    return c;
  }

  static CoefficientMatrix rectangular(Matrix m) {
    if (!m.all_finite()) throw DataError("coefficient entries must be finite");
    CoefficientMatrix c;
    c.kind_ = MatrixKind::rectangular;
    c.matrix_ = std::move(m);
    return c;
  }

  MatrixKind kind() const { return kind_; }
  bool is_symmetric() const { return kind_ == MatrixKind::symmetric; }
  Index rows() const { return matrix_.rows(); }
  Index cols() const { return matrix_.cols(); }
  const Matrix& matrix() const { return matrix_; }
  double operator()(Index i, Index j) const { return matrix_(i, j); }

  /// Same coefficients viewed as a general n x m matrix.
  CoefficientMatrix as_rectangular() const { return rectangular(matrix_); }

  /// For sparse symmetric storage: CSR slot of the transposed entry.
  const std::vector<std::int64_t>& mirror_slots() const { return mirror_; }

 private:
  static Matrix mirror_upper(const Matrix& m) {
    std::vector<Entry> e;
    m.for_each_nonzero([&](Index i, Index j, double v) {
      if (i <= j) {
        e.push_back({i, j, v});
        if (i != j) e.push_back({j, i, v});
      }
    });
    // Entries present only below the diagonal.
    m.for_each_nonzero([&](Index i, Index j, double v) {
      if (i > j && m(j, i) == 0.0) {
        e.push_back({i, j, v});
        e.push_back({j, i, v});
      }
    });
    return Matrix::from_entries(m.rows(), m.cols(), std::move(e), m.is_sparse() ? 1 : 0);
  }

  void index_mirror() {
    mirror_.clear();
    if (!matrix_.is_sparse()) return;
    const auto& s = matrix_.sparse();
    mirror_.assign(static_cast<std::size_t>(s.nonZeros()), -1);
    const int* outer = s.outerIndexPtr();
    const int* inner = s.innerIndexPtr();
    for (Index i = 0; i < s.outerSize(); ++i) {
      for (int k = outer[i]; k < outer[i + 1]; ++k) {
        const Index j = inner[k];
        const int* lo = inner + outer[j];
        const int* hi = inner + outer[j + 1];
        const int* pos = std::lower_bound(lo, hi, static_cast<int>(i));
        mirror_[static_cast<std::size_t>(k)] = pos - inner;
      }
    }
  }

  MatrixKind kind_ = MatrixKind::symmetric;
  Matrix matrix_;
  std::vector<std::int64_t> mirror_;
};

/// Structural parameters of (b_ij).
struct StructuralParams {
  double sigma = 0.0;       ///< max Euclidean row norm (dilation value for rectangular)
  double sigma_star = 0.0;  ///< max |b_ij|
  double sigma1 = 0.0;      ///< max row norm
  double sigma2 = 0.0;      ///< max column norm
};

inline StructuralParams structural_params(const CoefficientMatrix& c) {
  std::vector<double> row_sq(static_cast<std::size_t>(c.rows()), 0.0);
  std::vector<double> col_sq(static_cast<std::size_t>(c.cols()), 0.0);
  double star = 0.0;
  c.matrix().for_each_nonzero([&](Index i, Index j, double v) {
    row_sq[static_cast<std::size_t>(i)] += v * v;
    col_sq[static_cast<std::size_t>(j)] += v * v;
    star = std::max(star, std::abs(v));
  });
  StructuralParams p;
  p.sigma_star = star;
  p.sigma1 = std::sqrt(*std::max_element(row_sq.begin(), row_sq.end()));
  p.sigma2 = std::sqrt(*std::max_element(col_sq.begin(), col_sq.end()));
  if (c.is_symmetric()) {
    p.sigma = p.sigma1;
    p.sigma2 = p.sigma1;
  } else {
    p.sigma = std::max(p.sigma1, p.sigma2);
  }
  return p;
}

/// [sum over all ordered (i,j) of |b_ij|^p]^(1/p).
inline double lp_entrywise_norm(const CoefficientMatrix& c, double p) {
  if (!(p >= 1.0)) throw ParameterError("lp norm requires p >= 1");
  double star = 0.0;
  c.matrix().for_each_nonzero([&](Index, Index, double v) { star = std::max(star, std::abs(v)); });
  if (star == 0.0) return 0.0;
  // Scale by the max entry so large p neither overflows nor underflows.
  double sum = 0.0;
  c.matrix().for_each_nonzero(
      [&](Index, Index, double v) { sum += std::pow(std::abs(v) / star, p); });
  return star * std::pow(sum, 1.0 / p);
}

/// Number of ordered pairs (i,j) with |b_ij| >= c * sigma_star.
inline std::size_t large_entry_count(const CoefficientMatrix& m, double c) {
  if (!(c > 0.0 && c <= 1.0)) throw ParameterError("threshold fraction c must be in (0, 1]");
  const double star = structural_params(m).sigma_star;
  if (star == 0.0) throw DataError("large_entry_count needs a nonzero coefficient matrix");
  const double threshold = c * star;
  std::size_t count = 0;
  m.matrix().for_each_nonzero([&](Index, Index, double v) {
    if (std::abs(v) >= threshold) ++count;
  });
  return count;
}

/// Whether enough large coefficients exist for the two-sided estimate
/// E||X|| ~ sigma + sigma_star sqrt(log n) to hold.
inline bool lower_bound_applicable(const CoefficientMatrix& m, double c, double alpha) {
  if (!m.is_symmetric()) throw KindError("lower_bound_applicable requires a symmetric matrix");
  if (!(alpha > 0.0)) throw ParameterError("alpha must be > 0");
  const auto count = static_cast<double>(large_entry_count(m, c));
  return count >= std::pow(static_cast<double>(m.rows()), alpha);
}

// ---------------------------------------------------------------------------
// Pattern construction

namespace detail {

inline Matrix symmetric_from_upper(Index n, const std::vector<Entry>& upper) {
  std::vector<Entry> all;
  all.reserve(upper.size() * 2);
  for (const auto& e : upper) {
    all.push_back(e);
    if (e.row != e.col) all.push_back({e.col, e.row, e.value});
  }
  return Matrix::from_entries(n, n, std::move(all));
}

inline void require_dim(long long n, const char* what) {
  if (n < 1) throw ConstructionError(std::string(what) + ": dimension must be >= 1");
}

}  // namespace detail

inline CoefficientMatrix wigner_pattern(Index n) {
  detail::require_dim(n, "wigner");
  return CoefficientMatrix::symmetric(Matrix(DenseMatrix::Ones(n, n)));
}

inline CoefficientMatrix zero_pattern(Index n) {
  detail::require_dim(n, "zero");
  return CoefficientMatrix::symmetric(Matrix::zeros(n, n));
}

inline CoefficientMatrix diagonal_pattern(Index n) {
  detail::require_dim(n, "diagonal");
  std::vector<Entry> e;
  for (Index i = 0; i < n; ++i) e.push_back({i, i, 1.0});
  return CoefficientMatrix::symmetric(detail::symmetric_from_upper(n, e));
}

/// b_ij = 1 iff |i - j| <= k.
inline CoefficientMatrix band_pattern(Index n, Index k) {
  detail::require_dim(n, "band");
  if (k < 0 || k >= n) throw ConstructionError("band: requires 0 <= k < n");
  std::vector<Entry> e;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j <= std::min(n - 1, i + k); ++j) e.push_back({i, j, 1.0});
  return CoefficientMatrix::symmetric(detail::symmetric_from_upper(n, e));
}

/// Wrap-around band: b_ij = 1 iff the cyclic distance of i and j is <= k.
/// Every row has exactly 2k+1 ones.
inline CoefficientMatrix cyclic_band_pattern(Index n, Index k) {
  detail::require_dim(n, "cyclic_band");
  if (k < 0 || 2 * k + 1 > n) throw ConstructionError("cyclic_band: requires 0 <= k and 2k+1 <= n");
  std::vector<Entry> e;
  for (Index i = 0; i < n; ++i) {
    e.push_back({i, i, 1.0});
    for (Index d = 1; d <= k; ++d) {
      const Index j = (i + d) % n;
      e.push_back({std::min(i, j), std::max(i, j), 1.0});
    }
  }
  return CoefficientMatrix::symmetric(detail::symmetric_from_upper(n, e));
}

/// n/k diagonal blocks of size k filled with ones.
inline CoefficientMatrix block_diagonal_pattern(Index n, Index k) {
  detail::require_dim(n, "block_diagonal");
  if (k < 1 || n % k != 0) throw ConstructionError("block_diagonal: block size must divide n");
  std::vector<Entry> e;
  for (Index b = 0; b < n; b += k)
    for (Index i = b; i < b + k; ++i)
      for (Index j = i; j < b + k; ++j) e.push_back({i, j, 1.0});
  return CoefficientMatrix::symmetric(detail::symmetric_from_upper(n, e));
}

inline CoefficientMatrix single_entry_pattern(Index n) {
  detail::require_dim(n, "single_entry");
  return CoefficientMatrix::symmetric(Matrix::from_entries(n, n, {{0, 0, 1.0}}));
}

/// Diagonal with b_ii = min(1, 1/sqrt(log i)) for 1-based i; b_11 = 1.
inline CoefficientMatrix log_decay_diagonal_pattern(Index n) {
  detail::require_dim(n, "log_decay_diagonal");
  std::vector<Entry> e;
  for (Index i = 0; i < n; ++i) {
    const double one_based = static_cast<double>(i + 1);
    const double v = i == 0 ? 1.0 : std::min(1.0, 1.0 / std::sqrt(std::log(one_based)));
    e.push_back({i, i, v});
  }
  return CoefficientMatrix::symmetric(detail::symmetric_from_upper(n, e));
}

/// n x m all-ones rectangular pattern.
inline CoefficientMatrix ones_pattern(Index n, Index m) {
  detail::require_dim(n, "ones");
  detail::require_dim(m, "ones");
  return CoefficientMatrix::rectangular(Matrix(DenseMatrix::Ones(n, m)));
}

/// Symmetric 0/1 pattern with exactly k ones in every row.
///
/// Starts from the circulant with k ones per row (the diagonal is used
/// when k is odd) and randomizes it with degree-preserving double-edge
/// switches on off-diagonal edges, rejecting switches that would create a
/// loop or a repeated edge.
inline CoefficientMatrix regular_random_pattern(Index n, Index k, std::uint64_t seed,
                                                int sweeps = 10) {
  detail::require_dim(n, "regular_random");
  if (k < 1 || k > n) throw ConstructionError("regular_random: requires 1 <= k <= n");
  const bool use_diag = (k % 2 == 1);
  const Index half = use_diag ? (k - 1) / 2 : k / 2;
  if (k == n) return wigner_pattern(n);

  using Edge = std::pair<Index, Index>;
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index d = 1; d <= half; ++d) {
      const Index j = (i + d) % n;
      edges.emplace_back(std::min(i, j), std::max(i, j));
    }
  auto key = [n](Index a, Index b) {
    return static_cast<std::uint64_t>(std::min(a, b)) * static_cast<std::uint64_t>(n) +
           static_cast<std::uint64_t>(std::max(a, b));
  };
  std::unordered_set<std::uint64_t> present;
  present.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) present.insert(key(a, b));

  Rng rng(SeedSpec{seed, 0x5eedULL});
  const std::size_t attempts = static_cast<std::size_t>(sweeps) * edges.size();
  for (std::size_t t = 0; t < attempts && edges.size() >= 2; ++t) {
    const auto x = static_cast<std::size_t>(rng.below(edges.size()));
    const auto y = static_cast<std::size_t>(rng.below(edges.size()));
    if (x == y) continue;
    auto [a, b] = edges[x];
    auto [c, d] = edges[y];
    if (rng.coin()) std::swap(c, d);
    // (a,b),(c,d) -> (a,d),(c,b)
    if (a == d || c == b) continue;
    if (present.count(key(a, d)) || present.count(key(c, b))) continue;
    present.erase(key(a, b));
    present.erase(key(c, d));
    present.insert(key(a, d));
    present.insert(key(c, b));
    edges[x] = {std::min(a, d), std::max(a, d)};
    edges[y] = {std::min(c, b), std::max(c, b)};
  }
  std::vector<Entry> e;
  e.reserve(edges.size() + static_cast<std::size_t>(n));
  for (const auto& [a, b] : edges) e.push_back({a, b, 1.0});
  if (use_diag)
    for (Index i = 0; i < n; ++i) e.push_back({i, i, 1.0});
  return CoefficientMatrix::symmetric(detail::symmetric_from_upper(n, e));
}

// ---------------------------------------------------------------------------
// File formats

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                   : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace detail

/// Dense CSV: one matrix row per line, no header.
inline Matrix read_dense_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    std::vector<double> r;
    for (auto f : detail::split_fields(line)) {
      try {
        r.push_back(parse_double(f));
      } catch (const ParameterError&) {
        throw ValidationError("dense csv line " + std::to_string(lineno) + ": bad number");
      }
    }
    if (!rows.empty() && r.size() != rows.front().size())
      throw ValidationError("dense csv line " + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("dense csv: no rows");
  const auto n = static_cast<Index>(rows.size());
  const auto m = static_cast<Index>(rows.front().size());
  std::vector<Entry> e;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) {
      const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (!std::isfinite(v)) throw DataError("dense csv: non-finite entry");
      if (v != 0.0) e.push_back({i, j, v});
    }
  return Matrix::from_entries(n, m, std::move(e));
}

/// Sparse CSV of "i,j,value" triples with 0-based indices.
///
/// With `symmetric`, only the upper triangle (i <= j) may appear and the
/// lower triangle is mirrored. Dimensions default to max index + 1.
inline Matrix read_triples_csv(std::istream& in, bool symmetric, Index rows = 0, Index cols = 0) {
  std::vector<Entry> e;
  std::string line;
  std::size_t lineno = 0;
  Index max_i = -1, max_j = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    auto f = detail::split_fields(line);
    if (f.size() != 3)
      throw ValidationError("triples csv line " + std::to_string(lineno) + ": expected i,j,value");
    Index i, j;
    double v;
    try {
      i = static_cast<Index>(parse_integer(f[0]));
      j = static_cast<Index>(parse_integer(f[1]));
      v = parse_double(f[2]);
    } catch (const ParameterError&) {
      throw ValidationError("triples csv line " + std::to_string(lineno) + ": bad field");
    }
    if (i < 0 || j < 0) throw ValidationError("triples csv: negative index");
    if (!std::isfinite(v)) throw DataError("triples csv: non-finite entry");
    if (symmetric && i > j)
      throw ValidationError("triples csv line " + std::to_string(lineno) +
                            ": symmetric input must list the upper triangle only");
    max_i = std::max(max_i, i);
    max_j = std::max(max_j, j);
    e.push_back({i, j, v});
  }
  if (symmetric) {
    const Index n = std::max({rows, cols, max_i + 1, max_j + 1});
    const auto upper_count = e.size();
    for (std::size_t k = 0; k < upper_count; ++k)
      if (e[k].row != e[k].col) e.push_back({e[k].col, e[k].row, e[k].value});
    return Matrix::from_entries(n, n, std::move(e), 1);
  }
  const Index n = std::max(rows, max_i + 1);
  const Index m = std::max(cols, max_j + 1);
  return Matrix::from_entries(n, m, std::move(e), 1);
}

inline void write_dense_csv(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

/// Triples for the nonzeros; upper triangle only when `symmetric`.
inline void write_triples_csv(std::ostream& out, const Matrix& m, bool symmetric) {
  m.for_each_nonzero([&](Index i, Index j, double v) {
    if (symmetric && i > j) return;
    out << i << ',' << j << ',' << format_double(v) << '\n';
  });
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open matrix file '" + path + "'");
  return in;
}

/// Adjacency/coefficient file, dense CSV, validated as symmetric.
inline CoefficientMatrix from_adjacency_file(const std::string& path) {
  auto in = open_input(path);
  return CoefficientMatrix::symmetric(read_dense_csv(in), kFileSymmetryTolerance);
}

// ---------------------------------------------------------------------------
// "name:params" pattern specifications

struct PatternSpec {
  std::string name;
  std::vector<long long> params;
  std::string path;  // file-backed patterns
};

inline PatternSpec parse_pattern_spec(std::string_view text) {
  PatternSpec spec;
  const auto colon = text.find(':');
  spec.name = std::string(text.substr(0, colon));
  if (colon == std::string_view::npos) return spec;
  const auto rest = text.substr(colon + 1);
  static const char* file_kinds[] = {"adjacency", "csv", "triples", "rect_csv", "rect_triples"};
  for (const char* fk : file_kinds)
    if (spec.name == fk) {
      spec.path = std::string(rest);
      return spec;
    }
  for (auto f : detail::split_fields(rest)) spec.params.push_back(parse_integer(f));
  return spec;
}

inline CoefficientMatrix build_pattern(const PatternSpec& spec) {
  const auto& p = spec.params;
  auto need = [&](std::size_t count) {
    if (p.size() != count)
      throw ConstructionError("pattern '" + spec.name + "' takes " + std::to_string(count) +
                              " integer parameter(s)");
  };
  const auto& name = spec.name;
  if (name == "wigner") {
    need(1);
    return wigner_pattern(p[0]);
  }
  if (name == "zero") {
    need(1);
    return zero_pattern(p[0]);
  }
  if (name == "diagonal") {
    need(1);
    return diagonal_pattern(p[0]);
  }
  if (name == "band") {
    need(2);
    return band_pattern(p[0], p[1]);
  }
  if (name == "cyclic_band") {
    need(2);
    return cyclic_band_pattern(p[0], p[1]);
  }
  if (name == "block_diagonal") {
    need(2);
    return block_diagonal_pattern(p[0], p[1]);
  }
  if (name == "single_entry") {
    need(1);
    return single_entry_pattern(p[0]);
  }
  if (name == "log_decay_diagonal") {
    need(1);
    return log_decay_diagonal_pattern(p[0]);
  }
  if (name == "ones") {
    need(2);
    return ones_pattern(p[0], p[1]);
  }
  if (name == "regular_random") {
    if (p.size() != 2 && p.size() != 3)
      throw ConstructionError("pattern 'regular_random' takes n,k[,seed]");
    return regular_random_pattern(p[0], p[1], p.size() == 3 ? static_cast<std::uint64_t>(p[2]) : 0);
  }
  if (name == "adjacency" || name == "csv") return from_adjacency_file(spec.path);
  if (name == "triples") {
    auto in = open_input(spec.path);
    return CoefficientMatrix::symmetric(read_triples_csv(in, true), kFileSymmetryTolerance);
  }
  if (name == "rect_csv") {
    auto in = open_input(spec.path);
    return CoefficientMatrix::rectangular(read_dense_csv(in));
  }
  if (name == "rect_triples") {
    auto in = open_input(spec.path);
    return CoefficientMatrix::rectangular(read_triples_csv(in, false));
  }
  throw ConstructionError("unknown pattern '" + name + "'");
}

inline CoefficientMatrix build_pattern(std::string_view text) {
  return build_pattern(parse_pattern_spec(text));
}

}  // namespace rmb
