#pragma once

// The atomic counterexample family to mass balance, its closed-form optimum,
// mass-balance reports over transport sets, the discrete absolute-continuity
// surrogate, and ball-smoothed versions of the atomic instances.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vecot/core.hpp"
#include "vecot/leaves.hpp"

namespace vecot {

/// Anchors x_1..x_{m+1} in R^n (rows) and vectors v_1..v_{m+1} in R^m (rows).
struct CounterexampleSpec {
  RowMatrix anchors;
  RowMatrix vectors;

  Index n() const { return anchors.cols(); }
  Index m() const { return vectors.cols(); }

  /// x1=(1,0), x2=(0,1), x3=(0,0), v1=(1,0), v2=(1,2), v3=(-2,-2).
  static CounterexampleSpec planar() {
    CounterexampleSpec s;
    s.anchors.resize(3, 2);
    s.anchors << 1, 0, 0, 1, 0, 0;
    s.vectors.resize(3, 2);
    s.vectors << 1, 0, 1, 2, -2, -2;
    return s;
  }

  /// x_i = e_i (i <= m), x_{m+1} = 0, v_i = e_i + c (1,...,1), v_{m+1} = -sum.
  static CounterexampleSpec simplex(Index n, Index m, double c = 0.5) {
    if (m < 1 || n < m) fail(ErrorCode::InvalidSpec, "simplex preset needs 1 <= m <= n");
    CounterexampleSpec s;
    s.anchors = RowMatrix::Zero(m + 1, n);
    s.vectors = RowMatrix::Zero(m + 1, m);
    for (Index i = 0; i < m; ++i) {
      s.anchors(i, i) = 1.0;
      s.vectors.row(i).setConstant(c);
      s.vectors(i, i) += 1.0;
    }
    s.vectors.row(m) = -s.vectors.topRows(m).colwise().sum();
    return s;
  }
};

/// Strictness margin min_{i != j <= m} <v_i/|v_i|, v_j/|v_j|> - <e_i, e_j> with
/// e_i the unit direction from x_{m+1} to x_i. Positive means valid; with a
/// single pair index (m = 1) the margin is +infinity.
inline double check_counterexample_spec(const CounterexampleSpec& spec) {
  const Index m = spec.m();
  const Index n = spec.n();
  if (m < 1 || n < 1) fail(ErrorCode::DimensionMismatch, "dimensions must be positive");
  if (spec.anchors.rows() != m + 1 || spec.vectors.rows() != m + 1) {
    fail(ErrorCode::DimensionMismatch, "need m + 1 anchors and m + 1 vectors");
  }
  if (m > n) fail(ErrorCode::DimensionMismatch, "m must not exceed n");
  if (!spec.anchors.allFinite() || !spec.vectors.allFinite()) fail(ErrorCode::InvalidSpec, "entries must be finite");
  double scale = 0.0;
  for (Index i = 0; i <= m; ++i) {
    const double norm = spec.vectors.row(i).norm();
    if (norm == 0.0) fail(ErrorCode::ZeroVector, "v_" + std::to_string(i + 1) + " is zero");
    scale = std::max(scale, norm);
  }
  if (spec.vectors.colwise().sum().norm() > 1e-12 * scale) fail(ErrorCode::InvalidSpec, "vectors must sum to zero");
  // Kernel condition: the m x (m+1) matrix [v_1 .. v_{m+1}] has rank m.
  Eigen::JacobiSVD<Matrix> svd(Matrix(spec.vectors.transpose()));
  const Vector sv = svd.singularValues();
  if (sv.size() < m || sv(m - 1) <= 1e-10 * sv(0)) {
    fail(ErrorCode::RankDeficiency, "the vectors admit a linear relation other than equal coefficients");
  }
  for (Index i = 0; i <= m; ++i) {
    for (Index j = i + 1; j <= m; ++j) {
      if ((spec.anchors.row(i) - spec.anchors.row(j)).norm() == 0.0) {
        fail(ErrorCode::DuplicatePoint,
             "anchors " + std::to_string(i + 1) + " and " + std::to_string(j + 1) + " coincide");
      }
    }
  }
  double margin = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < m; ++i) {
    for (Index j = i + 1; j < m; ++j) {
      const double dv = spec.vectors.row(i).normalized().dot(spec.vectors.row(j).normalized());
      const double dx = (spec.anchors.row(i) - spec.anchors.row(m))
                            .normalized()
                            .dot((spec.anchors.row(j) - spec.anchors.row(m)).normalized());
      margin = std::min(margin, dv - dx);
    }
  }
  return margin;
}

/// Atomic instance: weight v_i at anchor x_i.
inline Instance counterexample_instance(const CounterexampleSpec& spec) {
  check_counterexample_spec(spec);
  return build_instance(spec.anchors, spec.vectors);
}

struct AnalyticOptimum {
  Instance instance;
  PotentialField potential;
  VectorCoupling coupling;
  double value = 0.0;
};

/// u(x_{m+1}) = 0, u(x_i) = |x_i - x_{m+1}| v_i / |v_i|; pi moves v_i along
/// (x_i, x_{m+1}); value sum_i |v_i| |x_i - x_{m+1}|.
inline AnalyticOptimum analytic_optimum(const CounterexampleSpec& spec) {
  double margin = 0.0;
  try {
    margin = check_counterexample_spec(spec);
  } catch (const Error& e) {
    fail(ErrorCode::InvalidSpec, e.what());
  }
  if (!(margin > 0.0)) fail(ErrorCode::InvalidSpec, "strictness margin is not positive");
  const Index m = spec.m();
  Instance instance = build_instance(spec.anchors, spec.vectors);
  RowMatrix u = RowMatrix::Zero(m + 1, m);
  std::vector<CouplingEdge> edges;
  double value = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double d = (spec.anchors.row(i) - spec.anchors.row(m)).norm();
    u.row(i) = d * spec.vectors.row(i).normalized();
    edges.push_back({i, m, spec.vectors.row(i).transpose()});
    value += spec.vectors.row(i).norm() * d;
  }
  const CloudPtr cloud = instance.cloud();
  PotentialField potential(cloud, std::move(u));
  return {std::move(instance), std::move(potential), VectorCoupling(cloud, m, edges), value};
}

enum class BalanceVerdict { BalanceHolds, BalanceFails };

inline const char* to_string(BalanceVerdict v) {
  return v == BalanceVerdict::BalanceHolds ? "BalanceHolds" : "BalanceFails";
}

struct TransportSetMass {
  Index id = 0;
  std::vector<Index> members;
  Vector mass;
  double norm = 0.0;
};

struct MassBalanceReport {
  std::vector<TransportSetMass> sets;
  BalanceVerdict verdict = BalanceVerdict::BalanceHolds;
  std::optional<Index> witness;  // first failing set id
  double tol = 0.0;
};

/// mu(A) for every maximal transport set A; balance holds when each |mu(A)|
/// is at most tol * sum_i |mu_i|.
inline MassBalanceReport mass_balance_report(const Instance& instance, const LeafDecomposition& dec,
                                             double tol = 1e-6) {
  if (static_cast<Index>(dec.assignment.size()) != instance.size()) {
    fail(ErrorCode::DimensionMismatch, "decomposition and instance have different sizes");
  }
  MassBalanceReport report;
  report.tol = tol;
  const RowMatrix& w = instance.measure().weights();
  const double limit = tol * instance.measure().total_variation();
  const auto sets = maximal_transport_sets(dec);
  for (std::size_t k = 0; k < sets.size(); ++k) {
    TransportSetMass entry;
    entry.id = static_cast<Index>(k);
    entry.members = sets[k];
    entry.mass = Vector::Zero(instance.target_dim());
    for (Index i : sets[k]) entry.mass += w.row(i).transpose();
    entry.norm = entry.mass.norm();
    if (entry.norm > limit && !report.witness) {
      report.witness = entry.id;
      report.verdict = BalanceVerdict::BalanceFails;
    }
    report.sets.push_back(std::move(entry));
  }
  return report;
}

/// Support inclusion: every point whose incident flow variation exceeds
/// tol * tv(pi) carries a nonzero atom of mu. Incident variation counts both
/// endpoints since the stored edge orientation carries no meaning.
inline bool marginal_abs_continuity_surrogate(const VectorCoupling& pi, const DiscreteVectorMeasure& mu,
                                              double tol = 1e-9) {
  if (pi.cloud()->size() != mu.size()) fail(ErrorCode::DimensionMismatch, "coupling and measure sizes differ");
  std::vector<double> incident(static_cast<std::size_t>(mu.size()), 0.0);
  for (const auto& e : pi.edges()) {
    const double f = e.flow.norm();
    incident[static_cast<std::size_t>(e.i)] += f;
    incident[static_cast<std::size_t>(e.j)] += f;
  }
  const double threshold = tol * pi.total_variation();
  for (Index i = 0; i < mu.size(); ++i) {
    if (incident[static_cast<std::size_t>(i)] > threshold && mu.weights().row(i).norm() == 0.0) return false;
  }
  return true;
}

namespace detail {

inline double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double result = 0.0;
  double f = 1.0 / static_cast<double>(base);
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= static_cast<double>(base);
  }
  return result;
}

inline std::uint64_t nth_prime(Index k) {
  std::uint64_t candidate = 1;
  Index found = -1;
  while (found < k) {
    ++candidate;
    bool prime = true;
    for (std::uint64_t d = 2; d * d <= candidate; ++d) {
      if (candidate % d == 0) {
        prime = false;
        break;
      }
    }
    if (prime) ++found;
  }
  return candidate;
}

}  // namespace detail

/// Points in the closed unit ball of R^n: the centre followed by Halton points
/// of [-1, 1]^n that fall inside the ball, in sequence order.
inline RowMatrix ball_points(Index n, Index count, std::uint64_t skip = 0) {
  RowMatrix out = RowMatrix::Zero(count, n);
  std::vector<std::uint64_t> bases;
  for (Index k = 0; k < n; ++k) bases.push_back(detail::nth_prime(k));
  Index filled = 1;
  for (std::uint64_t idx = 1 + skip; filled < count; ++idx) {
    Vector p(n);
    for (Index k = 0; k < n; ++k) p(k) = 2.0 * detail::radical_inverse(idx, bases[static_cast<std::size_t>(k)]) - 1.0;
    if (p.squaredNorm() <= 1.0 && p.squaredNorm() > 0.0) out.row(filled++) = p.transpose();
  }
  return out;
}

/// Replaces atom v_i at x_i by points_per_ball points in B(x_i, eps), each
/// carrying v_i / points_per_ball.
inline Instance smoothed_instance(const CounterexampleSpec& spec, double eps, Index points_per_ball) {
  check_counterexample_spec(spec);
  if (points_per_ball < 1) fail(ErrorCode::InvalidArgument, "points_per_ball must be positive");
  if (!(eps >= 0.0)) fail(ErrorCode::InvalidArgument, "eps must be nonnegative");
  const Index count = spec.anchors.rows();
  double min_dist = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < count; ++i) {
    for (Index j = i + 1; j < count; ++j) min_dist = std::min(min_dist, (spec.anchors.row(i) - spec.anchors.row(j)).norm());
  }
  if (!(eps < 0.5 * min_dist)) fail(ErrorCode::BallOverlap, "eps must be below half the minimal anchor distance");
  if (eps == 0.0 && points_per_ball > 1) fail(ErrorCode::InvalidArgument, "eps = 0 admits only one point per ball");
  const RowMatrix unit = ball_points(spec.n(), points_per_ball);
  RowMatrix pts(count * points_per_ball, spec.n());
  RowMatrix w(count * points_per_ball, spec.m());
  for (Index i = 0; i < count; ++i) {
    for (Index k = 0; k < points_per_ball; ++k) {
      pts.row(i * points_per_ball + k) = spec.anchors.row(i) + eps * unit.row(k);
      w.row(i * points_per_ball + k) = spec.vectors.row(i) / static_cast<double>(points_per_ball);
    }
  }
  return build_instance(std::move(pts), std::move(w));
}

}  // namespace vecot
