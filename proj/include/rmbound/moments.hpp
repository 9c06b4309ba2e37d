#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rmbound/coeffs.hpp"
#include "rmbound/error.hpp"
#include "rmbound/sampling.hpp"

namespace rmb {

using BigInt = boost::multiprecision::cpp_int;

inline constexpr int kMaxShapeHalfLength = 6;
inline constexpr double kBruteForceTupleLimit = 1e8;
inline constexpr double kShapeWeightLimit = 1e7;

/// E[g^i] for a standard normal: 0 for odd i, (i-1)!! for even i.
inline BigInt gaussian_moment(int i) {
  if (i < 0) throw ParameterError("moment order must be >= 0");
  if (i % 2 != 0) return 0;
  BigInt r = 1;
  for (int k = i - 1; k > 1; k -= 2) r *= k;
  return r;
}

/// Canonical shape of an even closed walk on the complete graph with
/// self-loops: vertices relabeled 1, 2, ... in order of first appearance.
struct CycleShape {
  std::vector<int> seq;
  int m = 0;                                  ///< distinct vertices
  std::map<int, int> edge_multiplicities;     ///< multiplicity -> number of edges

  friend bool operator==(const CycleShape& a, const CycleShape& b) { return a.seq == b.seq; }
  friend bool operator<(const CycleShape& a, const CycleShape& b) { return a.seq < b.seq; }
};

/// Shape of a closed walk on the complete bipartite graph. Odd positions
/// (1-based) are left vertices, even positions right vertices; each side is
/// labeled in order of first appearance.
struct BipartiteShape {
  std::vector<int> seq;
  int m1 = 0;  ///< distinct right vertices
  int m2 = 0;  ///< distinct left vertices
  std::map<int, int> edge_multiplicities;

  friend bool operator==(const BipartiteShape& a, const BipartiteShape& b) { return a.seq == b.seq; }
};

namespace detail {

using EdgeKey = std::pair<long long, long long>;

/// Multiplicity of each undirected edge of the closed walk w_0 -> ... -> w_0.
template <typename Seq>
std::map<EdgeKey, int> walk_edges(const Seq& w) {
  std::map<EdgeKey, int> e;
  const std::size_t len = w.size();
  for (std::size_t j = 0; j < len; ++j) {
    const long long a = w[j], b = w[(j + 1) % len];
    ++e[{std::min(a, b), std::max(a, b)}];
  }
  return e;
}

/// Bipartite walk: left vertex at even 0-based index, right at odd. Right
/// vertices are offset so the two sides never collide.
template <typename Seq>
std::map<EdgeKey, int> bipartite_edges(const Seq& w) {
  std::map<EdgeKey, int> e;
  const std::size_t len = w.size();
  for (std::size_t j = 0; j < len; ++j) {
    const long long a = w[j], b = w[(j + 1) % len];
    const long long left = j % 2 == 0 ? a : b;
    const long long right = j % 2 == 0 ? b : a;
    ++e[{left, right}];
  }
  return e;
}

inline std::map<int, int> multiplicity_census(const std::map<EdgeKey, int>& edges) {
  std::map<int, int> out;
  for (const auto& [edge, count] : edges) ++out[count];
  return out;
}

inline bool all_even(const std::map<int, int>& census) {
  return std::all_of(census.begin(), census.end(), [](const auto& kv) { return kv.first % 2 == 0; });
}

/// prod_i E[g^i]^{n_i}.
inline BigInt gaussian_weight(const std::map<int, int>& census) {
  BigInt w = 1;
  for (const auto& [mult, count] : census)
    for (int c = 0; c < count; ++c) w *= gaussian_moment(mult);
  return w;
}

/// (r-1)(r-2)...(r-k+1): zero once a factor reaches 0.
inline BigInt falling_tail(long long r, int k) {
  BigInt out = 1;
  for (int i = 1; i < k; ++i) out *= (r - i);
  return out;
}

/// r (r-1) ... (r-k+1).
inline BigInt falling(long long r, int k) {
  BigInt out = 1;
  for (int i = 0; i < k; ++i) out *= (r - i);
  return out;
}

inline void guard_half_length(int p) {
  if (p < 1) throw ParameterError("p must be >= 1");
  if (p > kMaxShapeHalfLength)
    throw SizeError("shape enumeration is limited to p <= " + std::to_string(kMaxShapeHalfLength));
}

/// Sum of 64-bit terms with checked overflow, promoting to BigInt.
class CheckedSum {
 public:
  void add(std::int64_t v) {
    std::int64_t out;
    if (__builtin_add_overflow(small_, v, &out)) {
      big_ += small_;
      small_ = v;
    } else {
      small_ = out;
    }
  }
  void add(const BigInt& v) { big_ += v; }
  BigInt total() const { return big_ + small_; }

 private:
  std::int64_t small_ = 0;
  BigInt big_ = 0;
};

}  // namespace detail

/// Relabels a walk's vertices in order of first appearance (1-based).
template <typename Seq>
std::vector<int> canonicalize(const Seq& walk) {
  std::map<long long, int> label;
  std::vector<int> out;
  out.reserve(walk.size());
  for (const auto& v : walk) {
    auto it = label.find(static_cast<long long>(v));
    if (it == label.end()) it = label.emplace(static_cast<long long>(v), static_cast<int>(label.size()) + 1).first;
    out.push_back(it->second);
  }
  return out;
}

/// True if every distinct edge of the closed walk is visited an even number of times.
template <typename Seq>
bool is_even_cycle(const Seq& walk) {
  return detail::all_even(detail::multiplicity_census(detail::walk_edges(walk)));
}

inline CycleShape make_shape(std::vector<int> seq) {
  CycleShape s;
  s.m = seq.empty() ? 0 : *std::max_element(seq.begin(), seq.end());
  s.edge_multiplicities = detail::multiplicity_census(detail::walk_edges(seq));
  s.seq = std::move(seq);
  return s;
}

/// Every shape of an even cycle of length 2p, in lexicographic order.
///
/// Depth-first over restricted growth strings with incremental edge
/// counts; a branch is cut once the open (odd-multiplicity) edges outnumber
/// the remaining steps, since each step closes at most one of them.
inline std::vector<CycleShape> enumerate_shapes(int p) {
  detail::guard_half_length(p);
  const int len = 2 * p;
  std::vector<int> seq(static_cast<std::size_t>(len), 0);
  seq[0] = 1;
  std::map<detail::EdgeKey, int> counts;
  int odd = 0;
  std::vector<CycleShape> out;

  auto bump = [&](int a, int b, int delta) {
    auto& c = counts[{std::min(a, b), std::max(a, b)}];
    const bool was_odd = c % 2 != 0;
    c += delta;
    odd += (c % 2 != 0) - was_odd;
  };

  auto rec = [&](auto&& self, int j, int maxlabel) -> void {
    if (j == len) {
      bump(seq[len - 1], seq[0], 1);
      if (odd == 0) out.push_back(make_shape(seq));
      bump(seq[len - 1], seq[0], -1);
      return;
    }
    for (int v = 1; v <= maxlabel + 1; ++v) {
      seq[static_cast<std::size_t>(j)] = v;
      bump(seq[static_cast<std::size_t>(j - 1)], v, 1);
      // Steps left: len - j, counting the closing edge.
      if (odd <= len - j) self(self, j + 1, std::max(maxlabel, v));
      bump(seq[static_cast<std::size_t>(j - 1)], v, -1);
    }
  };
  rec(rec, 1, 1);
  return out;
}

inline BipartiteShape make_bipartite_shape(std::vector<int> seq) {
  BipartiteShape s;
  for (std::size_t j = 0; j < seq.size(); ++j) {
    if (j % 2 == 0) s.m2 = std::max(s.m2, seq[j]);
    else s.m1 = std::max(s.m1, seq[j]);
  }
  s.edge_multiplicities = detail::multiplicity_census(detail::bipartite_edges(seq));
  s.seq = std::move(seq);
  return s;
}

/// Every shape of an even cycle u1 -> v1 -> u2 -> ... -> vp -> u1 of
/// length 2p on the complete bipartite graph, lexicographic order.
inline std::vector<BipartiteShape> enumerate_bipartite_shapes(int p) {
  detail::guard_half_length(p);
  const int len = 2 * p;
  std::vector<int> seq(static_cast<std::size_t>(len), 0);
  seq[0] = 1;
  std::map<detail::EdgeKey, int> counts;
  int odd = 0;
  std::vector<BipartiteShape> out;

  auto bump = [&](int pos, int a, int b, int delta) {
    // Step leaving 0-based position `pos`.
    const int left = pos % 2 == 0 ? a : b;
    const int right = pos % 2 == 0 ? b : a;
    auto& c = counts[{left, right}];
    const bool was_odd = c % 2 != 0;
    c += delta;
    odd += (c % 2 != 0) - was_odd;
  };

  auto rec = [&](auto&& self, int j, int max_left, int max_right) -> void {
    if (j == len) {
      bump(len - 1, seq[static_cast<std::size_t>(len - 1)], seq[0], 1);
      if (odd == 0) out.push_back(make_bipartite_shape(seq));
      bump(len - 1, seq[static_cast<std::size_t>(len - 1)], seq[0], -1);
      return;
    }
    const bool left_side = j % 2 == 0;
    const int cap = (left_side ? max_left : max_right) + 1;
    for (int v = 1; v <= cap; ++v) {
      seq[static_cast<std::size_t>(j)] = v;
      bump(j - 1, seq[static_cast<std::size_t>(j - 1)], v, 1);
      if (odd <= len - j)
        self(self, j + 1, left_side ? std::max(max_left, v) : max_left,
             left_side ? max_right : std::max(max_right, v));
      bump(j - 1, seq[static_cast<std::size_t>(j - 1)], v, -1);
    }
  };
  rec(rec, 1, 1, 0);
  return out;
}

/// E Tr[Y_r^{2p}] for the r x r Gaussian symmetric matrix (unit variance on
/// and off the diagonal), via the shape sum. Requires r > p.
inline BigInt wigner_trace_moment(long long r, int p) {
  if (r <= p) throw PreconditionError("wigner_trace_moment requires r > p");
  BigInt total = 0;
  for (const auto& s : enumerate_shapes(p))
    total += detail::falling_tail(r, s.m) * detail::gaussian_weight(s.edge_multiplicities);
  return BigInt(r) * total;
}

/// E Tr[(Y Y^T)^p] for the r x r' Gaussian matrix Y. Requires r, r' > p/2.
inline BigInt rect_trace_moment(long long r, long long rprime, int p) {
  if (2 * r <= p || 2 * rprime <= p) throw PreconditionError("rect_trace_moment requires r, r' > p/2");
  BigInt total = 0;
  for (const auto& s : enumerate_bipartite_shapes(p))
    total += detail::falling_tail(r, s.m2) * detail::falling(rprime, s.m1) *
             detail::gaussian_weight(s.edge_multiplicities);
  return BigInt(r) * total;
}

/// E Tr[...] by direct summation; `exact` is set when the coefficients
/// are integers and the family has integer moments.
struct TraceMoment {
  std::optional<BigInt> exact;
  double value = 0.0;
};

namespace detail {

/// E[xi^k] as an integer, if the family's moments are integers.
inline std::optional<std::int64_t> integer_moment(const EntryDistribution& d, int k) {
  if (k % 2 != 0) return 0;
  if (d.family == Family::gaussian) return static_cast<std::int64_t>(gaussian_moment(k));
  if (d.family == Family::rademacher) return 1;
  return std::nullopt;
}

inline double real_moment(const EntryDistribution& d, int k) {
  if (k % 2 != 0) return 0.0;
  return distribution_moment(d, k);
}

inline bool integer_valued(const Matrix& m) {
  bool ok = true;
  m.for_each_nonzero([&](Index, Index, double v) {
    ok = ok && v == std::round(v) && std::abs(v) < 2147483648.0;
  });
  return ok;
}

/// Shared backtracking sum over closed walks. `next(pos)` yields how index
/// `pos` may range and which coefficient the step into it uses;
/// `edge_of(pos, a, b)` names the edge of the step leaving position pos.
struct WalkSum {
  const EntryDistribution& dist;
  bool exact;
  CheckedSum exact_sum;
  double real_sum = 0.0;

  void add_leaf(const std::map<EdgeKey, int>& counts, const std::vector<double>& bvals) {
    for (const auto& [edge, c] : counts)
      if (c % 2 != 0) return;
    if (exact) {
      std::int64_t term = 1;
      bool overflow = false;
      for (double b : bvals) overflow |= __builtin_mul_overflow(term, static_cast<std::int64_t>(b), &term);
      for (const auto& [edge, c] : counts) {
        overflow |= __builtin_mul_overflow(term, *integer_moment(dist, c), &term);
      }
      if (!overflow) {
        exact_sum.add(term);
        return;
      }
      BigInt big = 1;
      for (double b : bvals) big *= static_cast<std::int64_t>(b);
      for (const auto& [edge, c] : counts) big *= *integer_moment(dist, c);
      exact_sum.add(big);
      return;
    }
    double term = 1.0;
    for (double b : bvals) term *= b;
    for (const auto& [edge, c] : counts) term *= real_moment(dist, c);
    real_sum += term;
  }
};

}  // namespace detail

/// E Tr[X^{2p}] = sum over u in [n]^{2p} of b_{u1u2}...b_{u2p u1} times
/// prod_i E[xi^i]^{n_i(u)}, edges undirected with self-loops.
inline TraceMoment trace_moment_bruteforce(const CoefficientMatrix& c, int p, const EntryDistribution& dist) {
  if (!c.is_symmetric()) throw KindError("trace_moment_bruteforce requires a symmetric matrix");
  if (p < 1) throw ParameterError("p must be >= 1");
  const Index n = c.rows();
  if (std::pow(static_cast<double>(n), 2.0 * p) > kBruteForceTupleLimit)
    throw SizeError("brute force limited to n^(2p) <= 1e8");
  if (dist.family == Family::custom) throw ParameterError("brute force needs a named distribution");
  const DenseMatrix b = c.matrix().to_dense();
  const bool exact = detail::integer_valued(c.matrix()) && detail::integer_moment(dist, 2).has_value();

  detail::WalkSum acc{dist, exact, {}, 0.0};
  const int len = 2 * p;
  std::vector<Index> u(static_cast<std::size_t>(len));
  std::vector<double> bvals;
  std::map<detail::EdgeKey, int> counts;
  auto rec = [&](auto&& self, int j) -> void {
    if (j == len) {
      const double bc = b(u[static_cast<std::size_t>(len - 1)], u[0]);
      if (bc == 0.0) return;
      const detail::EdgeKey e{std::min(u.back(), u[0]), std::max(u.back(), u[0])};
      ++counts[e];
      bvals.push_back(bc);
      acc.add_leaf(counts, bvals);
      bvals.pop_back();
      if (--counts[e] == 0) counts.erase(e);
      return;
    }
    for (Index v = 0; v < n; ++v) {
      u[static_cast<std::size_t>(j)] = v;
      if (j == 0) {
        self(self, 1);
        continue;
      }
      const Index a = u[static_cast<std::size_t>(j - 1)];
      const double bv = b(a, v);
      if (bv == 0.0) continue;
      const detail::EdgeKey e{std::min(a, v), std::max(a, v)};
      ++counts[e];
      bvals.push_back(bv);
      self(self, j + 1);
      bvals.pop_back();
      if (--counts[e] == 0) counts.erase(e);
    }
  };
  rec(rec, 0);

  TraceMoment out;
  if (exact) {
    out.exact = acc.exact_sum.total();
    out.value = static_cast<double>(*out.exact);
  } else {
    out.value = acc.real_sum;
  }
  return out;
}

/// E Tr[(X X^T)^p] for a rectangular C by summation over u in [n]^p, v in [m]^p.
inline TraceMoment rect_trace_moment_bruteforce(const CoefficientMatrix& c, int p,
                                                const EntryDistribution& dist) {
  if (p < 1) throw ParameterError("p must be >= 1");
  const Index n = c.rows(), m = c.cols();
  if (std::pow(static_cast<double>(n) * static_cast<double>(m), p) > kBruteForceTupleLimit)
    throw SizeError("brute force limited to (n m)^p <= 1e8");
  if (dist.family == Family::custom) throw ParameterError("brute force needs a named distribution");
  const DenseMatrix b = c.matrix().to_dense();
  const bool exact = detail::integer_valued(c.matrix()) && detail::integer_moment(dist, 2).has_value();

  detail::WalkSum acc{dist, exact, {}, 0.0};
  const int len = 2 * p;
  std::vector<Index> w(static_cast<std::size_t>(len));  // even: left (row), odd: right (col)
  std::vector<double> bvals;
  std::map<detail::EdgeKey, int> counts;
  auto coeff = [&](int pos, Index a, Index z) { return pos % 2 == 0 ? b(a, z) : b(z, a); };
  auto key = [](int pos, Index a, Index z) {
    return pos % 2 == 0 ? detail::EdgeKey{a, z} : detail::EdgeKey{z, a};
  };
  auto rec = [&](auto&& self, int j) -> void {
    if (j == len) {
      const int pos = len - 1;
      const double bc = coeff(pos, w.back(), w[0]);
      if (bc == 0.0) return;
      const auto e = key(pos, w.back(), w[0]);
      ++counts[e];
      bvals.push_back(bc);
      acc.add_leaf(counts, bvals);
      bvals.pop_back();
      if (--counts[e] == 0) counts.erase(e);
      return;
    }
    const Index range = j % 2 == 0 ? n : m;
    for (Index v = 0; v < range; ++v) {
      w[static_cast<std::size_t>(j)] = v;
      if (j == 0) {
        self(self, 1);
        continue;
      }
      const Index a = w[static_cast<std::size_t>(j - 1)];
      const double bv = coeff(j - 1, a, v);
      if (bv == 0.0) continue;
      const auto e = key(j - 1, a, v);
      ++counts[e];
      bvals.push_back(bv);
      self(self, j + 1);
      bvals.pop_back();
      if (--counts[e] == 0) counts.erase(e);
    }
  };
  rec(rec, 0);

  TraceMoment out;
  if (exact) {
    out.exact = acc.exact_sum.total();
    out.value = static_cast<double>(*out.exact);
  } else {
    out.value = acc.real_sum;
  }
  return out;
}

struct ShapeWeight {
  double lhs = 0.0;  ///< sum over cycles of shape s from u of the b-product
  double rhs = 0.0;  ///< sigma^{2(m(s)-1)}
};

/// Both sides of the per-shape weight inequality lhs <= rhs (needs sigma_* <= 1).
inline ShapeWeight shape_weight_check(const CoefficientMatrix& c, const CycleShape& s, Index u) {
  if (!c.is_symmetric()) throw KindError("shape_weight_check requires a symmetric matrix");
  const auto params = structural_params(c);
  if (params.sigma_star > 1.0) throw PreconditionError("shape_weight_check requires sigma_* <= 1");
  const Index n = c.rows();
  if (u < 0 || u >= n) throw ParameterError("start vertex out of range");
  if (s.m < 1 || s.seq.empty()) throw ParameterError("empty shape");
  if (std::pow(static_cast<double>(n), s.m - 1) > kShapeWeightLimit)
    throw SizeError("shape weight enumeration limited to n^(m-1) <= 1e7");
  const DenseMatrix b = c.matrix().to_dense();

  std::vector<Index> label(static_cast<std::size_t>(s.m) + 1, -1);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  label[1] = u;
  used[static_cast<std::size_t>(u)] = 1;
  double lhs = 0.0;
  auto rec = [&](auto&& self, int k) -> void {
    if (k > s.m) {
      double prod = 1.0;
      const std::size_t len = s.seq.size();
      for (std::size_t j = 0; j < len && prod != 0.0; ++j)
        prod *= b(label[static_cast<std::size_t>(s.seq[j])],
                  label[static_cast<std::size_t>(s.seq[(j + 1) % len])]);
      lhs += prod;
      return;
    }
    for (Index v = 0; v < n; ++v) {
      if (used[static_cast<std::size_t>(v)]) continue;
      used[static_cast<std::size_t>(v)] = 1;
      label[static_cast<std::size_t>(k)] = v;
      self(self, k + 1);
      used[static_cast<std::size_t>(v)] = 0;
    }
  };
  rec(rec, 2);
  return {lhs, std::pow(params.sigma, 2.0 * (s.m - 1))};
}

/// E Tr[X^{2p}] against (n / (ceil(sigma^2) + p)) E Tr[Y_r^{2p}], r = ceil(sigma^2) + p.
struct ComparisonResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool exact = false;
  long long r = 0;
  std::optional<BigInt> lhs_exact;
  BigInt wigner_moment = 0;  ///< E Tr[Y_r^{2p}]
};

/// ceil(sigma^2) with rounding noise in the sum of squares ignored.
inline long long ceil_sigma_sq(const CoefficientMatrix& c) {
  const auto s = structural_params(c);
  const double sq = s.sigma * s.sigma;
  if (detail::integer_valued(c.matrix())) {
    // Row sums of squares of integers are exact in double.
    double worst = 0.0;
    std::vector<double> rows(static_cast<std::size_t>(c.rows()), 0.0);
    c.matrix().for_each_nonzero([&](Index i, Index, double v) { rows[static_cast<std::size_t>(i)] += v * v; });
    for (double r : rows) worst = std::max(worst, r);
    return static_cast<long long>(worst);
  }
  return static_cast<long long>(std::ceil(sq - 1e-9 * std::max(1.0, sq)));
}

inline ComparisonResult verify_comparison(const CoefficientMatrix& c, int p) {
  if (!c.is_symmetric()) throw KindError("verify_comparison requires a symmetric matrix");
  if (structural_params(c).sigma_star > 1.0)
    throw PreconditionError("verify_comparison requires sigma_* <= 1; divide b by sigma_* first");
  const auto lhs = trace_moment_bruteforce(c, p, EntryDistribution::gaussian());
  ComparisonResult out;
  out.r = ceil_sigma_sq(c) + p;
  out.wigner_moment = wigner_trace_moment(out.r, p);
  const auto n = static_cast<long long>(c.rows());
  out.lhs = lhs.value;
  out.rhs = static_cast<double>(n) / static_cast<double>(out.r) * static_cast<double>(out.wigner_moment);
  if (lhs.exact) {
    out.exact = true;
    out.lhs_exact = lhs.exact;
    out.holds = *lhs.exact * out.r <= BigInt(n) * out.wigner_moment;
  } else {
    out.holds = out.lhs <= out.rhs * (1.0 + 1e-12);
  }
  return out;
}


/// The comparison for C = B / s with B integer-valued and s = max |b_ij|,
/// decided in exact rational arithmetic: with I = E Tr[B^{2p}] and
/// S = max_i sum_j b_ij^2, lhs = I / s^{2p}, sigma^2 = S / s^2 and the
/// inequality is I r <= n W s^{2p}.
inline ComparisonResult verify_comparison_rescaled(const CoefficientMatrix& b, int p) {
  if (!b.is_symmetric()) throw KindError("verify_comparison_rescaled requires a symmetric matrix");
  if (!detail::integer_valued(b.matrix())) throw ParameterError("verify_comparison_rescaled needs integer entries");
  const auto params = structural_params(b);
  if (params.sigma_star == 0.0) return verify_comparison(b, p);
  const auto s = static_cast<long long>(params.sigma_star);
  std::vector<long long> rows(static_cast<std::size_t>(b.rows()), 0);
  b.matrix().for_each_nonzero([&](Index i, Index, double v) {
    rows[static_cast<std::size_t>(i)] += static_cast<long long>(v) * static_cast<long long>(v);
  });
  const long long big_s = *std::max_element(rows.begin(), rows.end());
  const long long s2 = s * s;
  const auto lhs = trace_moment_bruteforce(b, p, EntryDistribution::gaussian());
  ComparisonResult out;
  out.exact = true;
  out.r = (big_s + s2 - 1) / s2 + p;
  out.wigner_moment = wigner_trace_moment(out.r, p);
  BigInt s_pow = 1;
  for (int i = 0; i < 2 * p; ++i) s_pow *= s;
  const auto n = static_cast<long long>(b.rows());
  out.lhs_exact = *lhs.exact;
  out.lhs = static_cast<double>(*lhs.exact) / static_cast<double>(s_pow);
  out.rhs = static_cast<double>(n) / static_cast<double>(out.r) * static_cast<double>(out.wigner_moment);
  out.holds = *lhs.exact * out.r <= BigInt(n) * out.wigner_moment * s_pow;
  return out;
}

}  // namespace rmb
