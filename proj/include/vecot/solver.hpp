#pragma once

// Primal-dual solver for the vector Kantorovich-Rubinstein problem on a finite
// cloud:
//
//     minimize   sum_e d_e |pi_e|      subject to   B pi = mu,
//
// where pi_e in R^m is the flow on edge e = (i, j) and B is the signed
// incidence operator ((B pi)_i = sum of flows leaving i minus flows entering i).
// The problem is split as pi = z and solved with ADMM: the pi-step is the
// projection onto {B pi = mu} (a graph Laplacian solve), the z-step is block
// soft-thresholding, and the scaled multiplier of pi = z, mapped back through
// B, gives the potential u with u_i - u_j ~ rho y_e.
//
// ADMM identifies the flow support quickly but converges slowly on degenerate
// instances, so iterates are periodically refined by Newton's method on the
// optimality system of the identified support. Scalar targets and collinear
// clouds also have exact combinatorial crossovers. Every refined pair must
// pass the same residual, Lipschitz and gap checks as a plain ADMM iterate.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vecot/core.hpp"

namespace vecot {

enum class EdgePolicyKind { Complete, Knn };

struct EdgePolicy {
  EdgePolicyKind kind = EdgePolicyKind::Complete;
  int k = 0;

  static EdgePolicy complete() { return {}; }
  static EdgePolicy knn(int k) { return {EdgePolicyKind::Knn, k}; }
};

struct SolverParams {
  int max_iters = 20000;
  double penalty = 1.0;
  double tol_primal = 1e-8;
  double tol_dual = 1e-8;
  double tol_gap = 1e-6;
  /// ADMM over-relaxation factor in (0, 2).
  double relaxation = 1.6;
  EdgePolicy edge_policy = EdgePolicy::complete();
  unsigned seed = 0;

  void validate() const {
    if (max_iters <= 0) fail(ErrorCode::InvalidArgument, "max_iters must be positive");
    if (!(penalty > 0.0)) fail(ErrorCode::InvalidArgument, "penalty must be positive");
    if (!(tol_primal > 0.0) || !(tol_dual > 0.0) || !(tol_gap > 0.0)) {
      fail(ErrorCode::InvalidArgument, "tolerances must be positive");
    }
    if (!(relaxation > 0.0 && relaxation < 2.0)) fail(ErrorCode::InvalidArgument, "relaxation must lie in (0, 2)");
    if (edge_policy.kind == EdgePolicyKind::Knn && edge_policy.k <= 0) {
      fail(ErrorCode::InvalidArgument, "knn policy needs k > 0");
    }
  }
};

enum class SolveStatus { Converged, IterLimit, Infeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::IterLimit: return "IterLimit";
    case SolveStatus::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

struct SolveReport {
  double primal_value = 0.0;
  double dual_value = 0.0;
  double gap = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  SolveStatus status = SolveStatus::Converged;
  std::string notes;
};

struct SolveResult {
  VectorCoupling coupling;
  PotentialField potential;
  SolveReport report;
};

/// Undirected edge list (i < j, lexicographic order) with Euclidean lengths.
struct EdgeSet {
  std::vector<std::pair<Index, Index>> pairs;
  Vector lengths;
  bool complete = false;

  Index size() const { return static_cast<Index>(pairs.size()); }
};

inline EdgeSet complete_edges(const Instance& instance) {
  EdgeSet out;
  out.complete = true;
  const Index n = instance.size();
  out.pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) out.pairs.emplace_back(i, j);
  }
  out.lengths.resize(out.size());
  for (Index e = 0; e < out.size(); ++e) {
    out.lengths(e) = instance.distances()(out.pairs[e].first, out.pairs[e].second);
  }
  return out;
}

/// Union of each point's k nearest neighbours (ties by index) and a Euclidean
/// minimum spanning tree, so the graph is always connected.
inline EdgeSet knn_edges(const Instance& instance, int k) {
  const Index n = instance.size();
  const Matrix& d = instance.distances();
  if (k >= n - 1) return complete_edges(instance);
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < n; ++i) {
    std::vector<Index> order;
    for (Index j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return d(i, a) < d(i, b); });
    for (int t = 0; t < k; ++t) pairs.emplace_back(std::min(i, order[t]), std::max(i, order[t]));
  }
  // Prim's algorithm on the dense distance matrix.
  std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<Index> parent(static_cast<std::size_t>(n), -1);
  best[0] = 0.0;
  for (Index step = 0; step < n; ++step) {
    Index pick = -1;
    for (Index v = 0; v < n; ++v) {
      if (!in_tree[v] && (pick < 0 || best[v] < best[pick])) pick = v;
    }
    in_tree[pick] = true;
    if (parent[pick] >= 0) pairs.emplace_back(std::min(pick, parent[pick]), std::max(pick, parent[pick]));
    for (Index v = 0; v < n; ++v) {
      if (!in_tree[v] && d(pick, v) < best[v]) {
        best[v] = d(pick, v);
        parent[v] = pick;
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  EdgeSet out;
  out.pairs = std::move(pairs);
  out.lengths.resize(out.size());
  for (Index e = 0; e < out.size(); ++e) out.lengths(e) = d(out.pairs[e].first, out.pairs[e].second);
  return out;
}

/// (B f)_i = sum over edges of +f_e at the tail i and -f_e at the head j.
inline RowMatrix incidence_apply(const EdgeSet& edges, const RowMatrix& flows, Index num_points) {
  RowMatrix out = RowMatrix::Zero(num_points, flows.cols());
  for (Index e = 0; e < edges.size(); ++e) {
    out.row(edges.pairs[e].first) += flows.row(e);
    out.row(edges.pairs[e].second) -= flows.row(e);
  }
  return out;
}

/// (B^T phi)_e = phi_i - phi_j.
inline RowMatrix incidence_transpose_apply(const EdgeSet& edges, const RowMatrix& phi) {
  RowMatrix out(edges.size(), phi.cols());
  for (Index e = 0; e < edges.size(); ++e) out.row(e) = phi.row(edges.pairs[e].first) - phi.row(edges.pairs[e].second);
  return out;
}

namespace detail {

/// Solves L phi = rhs for the graph Laplacian L = B B^T, column by column,
/// for right-hand sides whose columns sum to zero.
class LaplacianSolver {
 public:
  LaplacianSolver(const EdgeSet& edges, Index num_points) : n_(num_points), complete_(edges.complete) {
    if (complete_ || n_ <= 1) return;
    // Ground node 0; the reduced Laplacian of a connected graph is SPD.
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> degree(static_cast<std::size_t>(n_), 0.0);
    for (const auto& [i, j] : edges.pairs) {
      degree[i] += 1.0;
      degree[j] += 1.0;
      if (i > 0 && j > 0) {
        triplets.emplace_back(i - 1, j - 1, -1.0);
        triplets.emplace_back(j - 1, i - 1, -1.0);
      }
    }
    for (Index v = 1; v < n_; ++v) triplets.emplace_back(v - 1, v - 1, degree[v]);
    Eigen::SparseMatrix<double> reduced(n_ - 1, n_ - 1);
    reduced.setFromTriplets(triplets.begin(), triplets.end());
    factor_.compute(reduced);
    if (factor_.info() != Eigen::Success) fail(ErrorCode::NumericalBreakdown, "edge graph is disconnected");
  }

  RowMatrix solve(const RowMatrix& rhs) const {
    if (complete_ || n_ <= 1) {
      // L = n I - 1 1^T acts as n I on zero-sum vectors.
      return rhs / static_cast<double>(n_);
    }
    RowMatrix out = RowMatrix::Zero(n_, rhs.cols());
    Matrix reduced = rhs.bottomRows(n_ - 1);
    Matrix sol = factor_.solve(reduced);
    out.bottomRows(n_ - 1) = sol;
    return out;
  }

 private:
  Index n_;
  bool complete_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
};

inline double max_lipschitz_ratio(const RowMatrix& u, const Matrix& dist) {
  double best = 0.0;
  const Index n = u.rows();
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) best = std::max(best, (u.row(i) - u.row(j)).norm() / dist(i, j));
  }
  return best;
}

inline double residual_variation(const RowMatrix& a, const RowMatrix& b) {
  double acc = 0.0;
  for (Index i = 0; i < a.rows(); ++i) acc += (a.row(i) - b.row(i)).norm();
  return acc;
}

/// Makes B flows == target exactly (up to rounding) by routing the residual
/// through the star centred at node 0. Flows are indexed by edge; star edges
/// missing from the edge set are appended to `extra`.
inline void repair_feasibility(const EdgeSet& edges, RowMatrix& flows, const RowMatrix& target,
                               std::vector<std::pair<Index, Vector>>& extra) {
  const Index n = target.rows();
  const RowMatrix residual = target - incidence_apply(edges, flows, n);
  std::vector<Index> star(static_cast<std::size_t>(n), -1);
  for (Index e = 0; e < edges.size(); ++e) {
    if (edges.pairs[e].first == 0) star[edges.pairs[e].second] = e;
  }
  // Edge (0, i) with flow f changes the net at i by -f.
  for (Index i = 1; i < n; ++i) {
    if (residual.row(i).squaredNorm() == 0.0) continue;
    if (star[i] >= 0) {
      flows.row(star[i]) -= residual.row(i);
    } else {
      extra.emplace_back(i, Vector(-residual.row(i).transpose()));
    }
  }
}

struct PolishResult {
  RowMatrix flows;  // one row per edge of the edge set
  RowMatrix potential;
};

/// Newton refinement of the optimality system on a candidate support S. Each
/// flow is written as pi_e = t_e (u_i - u_j) / d_e with t_e >= 0, which turns
/// the conditions into the polynomial system
///     |u_i - u_j|^2 = d_e^2   (e in S),     sum_e t_e B_e (u_i - u_j) / d_e = mu,
/// solved by Gauss-Newton with minimum-norm steps (u_0 pinned to zero).
/// Edges whose multiplier turns negative are dropped and the solve repeated.
inline std::optional<PolishResult> newton_polish(const EdgeSet& edges, const Vector& len, const RowMatrix& mu,
                                                 std::vector<Index> support, Vector t_start, const RowMatrix& u_start,
                                                 Index max_unknowns) {
  const Index n = mu.rows();
  const Index m = mu.cols();
  const double scale = 1.0 + mu.norm();
  RowMatrix u = u_start;

  for (int round = 0; round < 30 && !support.empty(); ++round) {
    const Index s = static_cast<Index>(support.size());
    const Index unknowns = s + (n - 1) * m;
    const Index equations = s + n * m;
    if (unknowns > max_unknowns) return std::nullopt;

    Vector p(unknowns);
    for (Index k = 0; k < s; ++k) p(k) = t_start(support[k]);
    for (Index v = 1; v < n; ++v) p.segment(s + (v - 1) * m, m) = u.row(v).transpose();
    auto u_of = [&](const Vector& q, Index v) -> Vector {
      if (v == 0) return Vector::Zero(m);
      return q.segment(s + (v - 1) * m, m);
    };
    auto residual = [&](const Vector& q) {
      Vector f = Vector::Zero(equations);
      for (Index v = 0; v < n; ++v) f.segment(s + v * m, m) = -mu.row(v).transpose();
      for (Index k = 0; k < s; ++k) {
        const auto [i, j] = edges.pairs[support[k]];
        const double d = len(support[k]);
        const Vector diff = u_of(q, i) - u_of(q, j);
        f(k) = (diff.squaredNorm() - d * d) / d;
        const Vector flow = q(k) / d * diff;
        f.segment(s + i * m, m) += flow;
        f.segment(s + j * m, m) -= flow;
      }
      return f;
    };

    Vector f = residual(p);
    double fnorm = f.norm();
    Matrix jac(equations, unknowns);
    for (int iter = 0; iter < 40 && fnorm > 1e-15 * scale; ++iter) {
      jac.setZero();
      for (Index k = 0; k < s; ++k) {
        const auto [i, j] = edges.pairs[support[k]];
        const double d = len(support[k]);
        const Vector diff = u_of(p, i) - u_of(p, j);
        const double t = p(k);
        for (Index c = 0; c < m; ++c) {
          // saturation row
          if (i > 0) jac(k, s + (i - 1) * m + c) += 2.0 * diff(c) / d;
          if (j > 0) jac(k, s + (j - 1) * m + c) -= 2.0 * diff(c) / d;
          // balance rows: derivative with respect to t and to u
          jac(s + i * m + c, k) += diff(c) / d;
          jac(s + j * m + c, k) -= diff(c) / d;
          const double w = t / d;
          if (i > 0) {
            jac(s + i * m + c, s + (i - 1) * m + c) += w;
            jac(s + j * m + c, s + (i - 1) * m + c) -= w;
          }
          if (j > 0) {
            jac(s + i * m + c, s + (j - 1) * m + c) -= w;
            jac(s + j * m + c, s + (j - 1) * m + c) += w;
          }
        }
      }
      Matrix normal = jac.transpose() * jac;
      const double damping = 1e-12 * std::max(normal.diagonal().maxCoeff(), 1.0);
      normal.diagonal().array() += damping;
      const Vector step = normal.ldlt().solve(-(jac.transpose() * f));
      double alpha = 1.0;
      bool improved = false;
      for (int ls = 0; ls < 20; ++ls, alpha *= 0.5) {
        const Vector trial = p + alpha * step;
        const Vector ft = residual(trial);
        if (ft.norm() < fnorm) {
          improved = ft.norm() < 0.9 * fnorm;
          p = trial;
          f = ft;
          fnorm = ft.norm();
          break;
        }
      }
      // Linear convergence means the support is inconsistent.
      if (!improved) break;
    }
    for (Index v = 1; v < n; ++v) u.row(v) = u_of(p, v).transpose();
    if (!(fnorm <= 1e-11 * scale)) {
      // Inconsistent support: drop the edge furthest from saturation.
      const double worst = f.head(s).minCoeff();
      if (!(worst < 0.0)) return std::nullopt;
      std::vector<Index> kept;
      for (Index k = 0; k < s; ++k) {
        t_start(support[k]) = std::max(p(k), 0.0);
        if (f(k) > worst) kept.push_back(support[k]);
      }
      support = std::move(kept);
      continue;
    }
    std::vector<Index> kept;
    for (Index k = 0; k < s; ++k) {
      if (p(k) >= 0.0) kept.push_back(support[k]);
      t_start(support[k]) = std::max(p(k), 0.0);
    }
    if (kept.size() == support.size()) {
      // Pairs pushed past the Lipschitz bound join the support as constraints.
      std::vector<char> in_support(static_cast<std::size_t>(edges.size()), 0);
      for (Index e : support) in_support[static_cast<std::size_t>(e)] = 1;
      bool grew = false;
      for (Index e = 0; e < edges.size(); ++e) {
        if (in_support[static_cast<std::size_t>(e)]) continue;
        const auto [i, j] = edges.pairs[e];
        if ((u.row(i) - u.row(j)).norm() > (1.0 + 1e-10) * len(e)) {
          kept.push_back(e);
          t_start(e) = 0.0;
          grew = true;
        }
      }
      if (grew) {
        std::sort(kept.begin(), kept.end());
        support = std::move(kept);
        continue;
      }
      PolishResult out{RowMatrix::Zero(edges.size(), m), u};
      out.potential.row(0).setZero();
      for (Index k = 0; k < s; ++k) {
        const auto [i, j] = edges.pairs[support[k]];
        out.flows.row(support[k]) = p(k) / len(support[k]) * (u.row(i) - u.row(j));
      }
      return out;
    }
    support = std::move(kept);
  }
  return std::nullopt;
}

/// Support from the ADMM flows: edges carrying at least flow_fraction of the
/// largest flow on which u_start is within saturation_slack of saturated.
inline std::optional<PolishResult> polish_on_support(const EdgeSet& edges, const Vector& len, const RowMatrix& mu,
                                                     const RowMatrix& z, const RowMatrix& u_start,
                                                     double flow_fraction, double saturation_slack,
                                                     Index max_unknowns) {
  double largest = 0.0;
  for (Index e = 0; e < edges.size(); ++e) largest = std::max(largest, z.row(e).norm());
  if (largest == 0.0) return std::nullopt;
  std::vector<Index> support;
  Vector t_start(edges.size());
  for (Index e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges.pairs[e];
    const double ratio = (u_start.row(i) - u_start.row(j)).norm() / len(e);
    t_start(e) = z.row(e).norm();
    if (t_start(e) >= flow_fraction * largest && ratio >= 1.0 - saturation_slack) support.push_back(e);
  }
  return newton_polish(edges, len, mu, std::move(support), std::move(t_start), u_start, max_unknowns);
}

/// Lawson-Hanson active set method for min |A x - b| subject to x >= 0.
inline Vector nnls(const Matrix& a, const Vector& b, int max_outer = 0) {
  const Index cols = a.cols();
  Vector x = Vector::Zero(cols);
  std::vector<char> passive(static_cast<std::size_t>(cols), 0);
  const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()) * std::max(1.0, b.cwiseAbs().maxCoeff());
  if (max_outer <= 0) max_outer = static_cast<int>(3 * cols + 10);
  auto solve_passive = [&](std::vector<Index>& idx) {
    idx.clear();
    for (Index k = 0; k < cols; ++k) {
      if (passive[static_cast<std::size_t>(k)]) idx.push_back(k);
    }
    Matrix sub(a.rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Index>(k)) = a.col(idx[k]);
    return Vector(sub.colPivHouseholderQr().solve(b));
  };
  std::vector<Index> idx;
  for (int outer = 0; outer < max_outer; ++outer) {
    const Vector w = a.transpose() * (b - a * x);
    Index best = -1;
    double best_w = tol;
    for (Index k = 0; k < cols; ++k) {
      if (!passive[static_cast<std::size_t>(k)] && w(k) > best_w) {
        best_w = w(k);
        best = k;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = 1;
    for (int inner = 0; inner <= cols; ++inner) {
      const Vector s = solve_passive(idx);
      double alpha = 1.0;
      bool feasible = true;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (s(static_cast<Index>(k)) <= 0.0) {
          feasible = false;
          const double xk = x(idx[k]);
          alpha = std::min(alpha, xk / (xk - s(static_cast<Index>(k))));
        }
      }
      if (feasible) {
        x.setZero();
        for (std::size_t k = 0; k < idx.size(); ++k) x(idx[k]) = s(static_cast<Index>(k));
        break;
      }
      for (std::size_t k = 0; k < idx.size(); ++k) {
        Index c = idx[k];
        x(c) += alpha * (s(static_cast<Index>(k)) - x(c));
        if (x(c) <= tol) {
          x(c) = 0.0;
          passive[static_cast<std::size_t>(c)] = 0;
        }
      }
    }
  }
  return x;
}

/// Support from the potential: nonnegative flows along the directions of
/// u_start on nearly saturated edges that best reproduce mu.
inline std::optional<PolishResult> polish_from_potential(const EdgeSet& edges, const Vector& len, const RowMatrix& mu,
                                                         const RowMatrix& u_start, double saturation_slack,
                                                         Index max_unknowns) {
  const Index n = mu.rows();
  const Index m = mu.cols();
  double top = 0.0;
  Vector ratio(edges.size());
  for (Index e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges.pairs[e];
    ratio(e) = (u_start.row(i) - u_start.row(j)).norm() / len(e);
    top = std::max(top, ratio(e));
  }
  if (top == 0.0) return std::nullopt;
  std::vector<Index> candidates;
  for (Index e = 0; e < edges.size(); ++e) {
    if (ratio(e) >= (1.0 - saturation_slack) * top) candidates.push_back(e);
  }
  if (candidates.empty() || static_cast<Index>(candidates.size()) > 4 * max_unknowns) return std::nullopt;
  Matrix a = Matrix::Zero(n * m, static_cast<Index>(candidates.size()));
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto [i, j] = edges.pairs[candidates[k]];
    const Vector dir = (u_start.row(i) - u_start.row(j)).transpose() / (ratio(candidates[k]) * len(candidates[k]));
    a.block(i * m, static_cast<Index>(k), m, 1) += dir;
    a.block(j * m, static_cast<Index>(k), m, 1) -= dir;
  }
  Vector b(n * m);
  for (Index v = 0; v < n; ++v) b.segment(v * m, m) = mu.row(v).transpose();
  const Vector t = nnls(a, b);
  std::vector<Index> support;
  Vector t_start = Vector::Zero(edges.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (t(static_cast<Index>(k)) > 0.0) {
      support.push_back(candidates[k]);
      t_start(candidates[k]) = t(static_cast<Index>(k));
    }
  }
  if (support.empty()) return std::nullopt;
  return newton_polish(edges, len, mu, std::move(support), std::move(t_start), u_start, max_unknowns);
}

/// Exact transshipment for scalar targets (m = 1) by successive shortest
/// paths on the edge set, each edge usable in both directions at cost d_e.
/// Node potentials from the final Dijkstra pass give a dual u with
/// u_i - u_j <= d_e on every edge.
inline std::optional<PolishResult> scalar_transport(const EdgeSet& edges, const Vector& len, const RowMatrix& mu) {
  const Index n = mu.rows();
  if (mu.cols() != 1) return std::nullopt;
  struct Arc {
    Index to;
    Index edge;
    double sign;  // +1 when travelling tail -> head of the stored edge
  };
  std::vector<std::vector<Arc>> adjacency(static_cast<std::size_t>(n));
  for (Index e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges.pairs[e];
    adjacency[i].push_back({j, e, 1.0});
    adjacency[j].push_back({i, e, -1.0});
  }
  Vector flow = Vector::Zero(edges.size());
  Vector excess = mu.col(0);
  const double tiny = 1e-14 * std::max(excess.cwiseAbs().sum(), 1e-300);
  Vector potential = Vector::Zero(n);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Cost of moving one unit along an arc: d_e, except that pushing against
  // existing flow cancels it (cost -d_e, capacity |flow|).
  auto arc_cost = [&](const Arc& a) {
    const double along = a.sign * flow(a.edge);
    return along < 0.0 ? -len(a.edge) : len(a.edge);
  };
  for (Index round = 0; round < 4 * n * n + 4 * edges.size(); ++round) {
    if (excess.maxCoeff() <= tiny) break;
    Vector dist = Vector::Constant(n, kInf);
    std::vector<Index> via(static_cast<std::size_t>(n), -1);
    std::vector<Arc> via_arc(static_cast<std::size_t>(n));
    std::vector<char> done(static_cast<std::size_t>(n), 0);
    for (Index v = 0; v < n; ++v) {
      if (excess(v) > tiny) dist(v) = 0.0;
    }
    for (Index step = 0; step < n; ++step) {
      Index best = -1;
      for (Index v = 0; v < n; ++v) {
        if (!done[v] && dist(v) < kInf && (best < 0 || dist(v) < dist(best))) best = v;
      }
      if (best < 0) break;
      done[best] = 1;
      for (const Arc& a : adjacency[best]) {
        const double reduced = std::max(arc_cost(a) + potential(best) - potential(a.to), 0.0);
        if (dist(best) + reduced < dist(a.to)) {
          dist(a.to) = dist(best) + reduced;
          via[a.to] = best;
          via_arc[a.to] = a;
        }
      }
    }
    Index sink = -1;
    for (Index v = 0; v < n; ++v) {
      if (excess(v) < -tiny && dist(v) < kInf && (sink < 0 || dist(v) < dist(sink))) sink = v;
    }
    if (sink < 0) return std::nullopt;
    for (Index v = 0; v < n; ++v) potential(v) += std::min(dist(v), dist(sink));
    double amount = -excess(sink);
    Index v = sink;
    while (via[v] >= 0) {
      const Arc& a = via_arc[v];
      const double along = a.sign * flow(a.edge);
      if (along < 0.0) amount = std::min(amount, -along);
      v = via[v];
    }
    amount = std::min(amount, excess(v));
    const Index source = v;
    v = sink;
    while (via[v] >= 0) {
      const Arc& a = via_arc[v];
      flow(a.edge) += a.sign * amount;
      v = via[v];
    }
    excess(source) -= amount;
    excess(sink) += amount;
  }
  if (excess.cwiseAbs().maxCoeff() > 1e-12 * std::max(mu.cwiseAbs().sum(), 1e-300)) return std::nullopt;
  PolishResult out{RowMatrix::Zero(edges.size(), 1), RowMatrix::Zero(n, 1)};
  out.flows.col(0) = flow;
  // A unit leaving i has reduced cost d + p_i - p_j >= 0, so u = -p.
  out.potential.col(0) = -(potential.array() - potential(0)).matrix();
  return out;
}

/// Exact solution for points on a line: the optimal flow runs between
/// neighbours and carries the cumulative mass, with u stepping by
/// gap * F / |F| across each gap (no step where F vanishes).
inline std::optional<PolishResult> line_transport(const EdgeSet& edges, const Vector& positions, const RowMatrix& mu) {
  const Index n = mu.rows();
  const Index m = mu.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return positions(a) < positions(b); });
  std::vector<Index> lookup(static_cast<std::size_t>(n * n), -1);
  for (Index e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges.pairs[e];
    lookup[i * n + j] = e;
    lookup[j * n + i] = e;
  }
  PolishResult out{RowMatrix::Zero(edges.size(), m), RowMatrix::Zero(n, m)};
  Eigen::RowVectorXd cumulative = Eigen::RowVectorXd::Zero(m);
  for (Index k = 0; k + 1 < n; ++k) {
    const Index a = order[k];
    const Index b = order[k + 1];
    cumulative += mu.row(a);
    const Index e = lookup[a * n + b];
    if (e < 0) return std::nullopt;
    out.flows.row(e) = edges.pairs[e].first == a ? cumulative : Eigen::RowVectorXd(-cumulative);
    const double norm = cumulative.norm();
    const double gap = positions(b) - positions(a);
    out.potential.row(b) = out.potential.row(a);
    if (norm > 0.0) out.potential.row(b) -= gap / norm * cumulative;
  }
  const Eigen::RowVectorXd base = out.potential.row(0);
  out.potential.rowwise() -= base;
  return out;
}

}  // namespace detail

/// Solves the primal coupling problem and the 1-Lipschitz dual potential
/// problem together. ADMM iterates are periodically refined by a Newton step
/// on the identified flow support. The returned coupling satisfies the
/// marginal constraint up to rounding and the returned potential is rescaled
/// to be exactly 1-Lipschitz over all pairs (normalized to vanish at index 0),
/// so primal_value >= dual_value up to rounding.
inline SolveResult solve(const Instance& instance, const SolverParams& params = {}) {
  params.validate();
  const Index n = instance.size();
  const Index m = instance.target_dim();
  const CloudPtr& cloud = instance.cloud();
  const double mass_scale = instance.measure().total_variation();

  if (mass_scale == 0.0 || n < 2) {
    SolveReport report;
    report.notes = "zero measure";
    return {VectorCoupling(cloud, m), PotentialField(cloud, RowMatrix::Zero(n, m)), report};
  }

  const EdgeSet edges = params.edge_policy.kind == EdgePolicyKind::Knn
                            ? knn_edges(instance, params.edge_policy.k)
                            : complete_edges(instance);
  const Index num_edges = edges.size();
  const double length_scale = instance.distances().maxCoeff();
  const Vector len = edges.lengths / length_scale;
  const Matrix all_dist = instance.distances() / length_scale;
  const RowMatrix mu = instance.measure().weights() / mass_scale;
  const detail::LaplacianSolver laplacian(edges, n);
  constexpr Index kMaxPolishUnknowns = 1500;
  const Vector positions = instance.ambient_dim() == 1 ? Vector(cloud->points().col(0) / length_scale) : Vector();

  RowMatrix x = RowMatrix::Zero(num_edges, m);
  RowMatrix z = x;
  RowMatrix y = x;
  RowMatrix z_prev = x;
  double rho = params.penalty;
  const double alpha = params.relaxation;

  SolveReport report;
  report.status = SolveStatus::IterLimit;
  if (!edges.complete) {
    report.notes = "knn edge set: primal value is an upper bound without optimality guarantee";
  }
  RowMatrix flows_out = z;
  RowMatrix u_out = RowMatrix::Zero(n, m);
  double lip_excess = std::numeric_limits<double>::infinity();

  auto raw_potential = [&]() {
    const RowMatrix q = rho * y;
    RowMatrix u = laplacian.solve(incidence_apply(edges, q, n));
    const Eigen::RowVectorXd base = u.row(0);
    u.rowwise() -= base;
    return u;
  };
  // Accepts (flows, u) when the marginal residual, Lipschitz excess and
  // relative gap all meet the tolerances; u is rescaled to be 1-Lipschitz.
  auto accept = [&](const RowMatrix& flows, RowMatrix u) {
    if (detail::residual_variation(incidence_apply(edges, flows, n), mu) > params.tol_primal) return false;
    const double lip_raw = detail::max_lipschitz_ratio(u, all_dist);
    if (lip_raw - 1.0 > params.tol_dual) return false;
    if (lip_raw > 1.0) u /= lip_raw;
    double primal = 0.0;
    for (Index e = 0; e < num_edges; ++e) primal += len(e) * flows.row(e).norm();
    const double dual = (u.array() * mu.array()).sum();
    if (std::abs(primal - dual) > params.tol_gap * primal) return false;
    // Complementary slackness on every edge that carries flow.
    for (Index e = 0; e < num_edges; ++e) {
      const double flow_norm = flows.row(e).norm();
      if (flow_norm == 0.0) continue;
      const auto [i, j] = edges.pairs[e];
      const double along = (u.row(i) - u.row(j)).dot(flows.row(e));
      if (along < (1.0 - params.tol_gap) * len(e) * flow_norm) return false;
    }
    flows_out = flows;
    u_out = std::move(u);
    lip_excess = std::max(0.0, lip_raw - 1.0);
    return true;
  };

  // Newton stages on supports read off z or the potential, then the exact
  // crossovers; true when one of them is accepted.
  auto try_polish = [&]() {
    const RowMatrix u_raw = raw_potential();
    constexpr std::pair<double, double> kCandidates[] = {
        {1e-6, 1e-3}, {1e-6, 1e-2}, {1e-6, 1e-1}, {1e-6, 1.0}, {0.0, 1e-3}, {0.0, 1e-2}};
    for (const auto& [fraction, slack] : kCandidates) {
      auto refined = detail::polish_on_support(edges, len, mu, z, u_raw, fraction, slack, kMaxPolishUnknowns);
      if (refined && accept(refined->flows, refined->potential)) return true;
    }
    for (double slack : {1e-4, 1e-3, 1e-2}) {
      auto refined = detail::polish_from_potential(edges, len, mu, u_raw, slack, kMaxPolishUnknowns);
      if (refined && accept(refined->flows, refined->potential)) return true;
    }
    if (instance.ambient_dim() == 1 && m > 1) {
      auto exact = detail::line_transport(edges, positions, mu);
      if (exact && accept(exact->flows, exact->potential)) return true;
    }
    if (m == 1) {
      auto exact = detail::scalar_transport(edges, len, mu);
      if (exact && accept(exact->flows, exact->potential)) return true;
    }
    return false;
  };
  auto note_polish = [&] { report.notes += report.notes.empty() ? "support polish" : "; support polish"; };

  int next_polish = 50;
  int it = 0;
  for (it = 1; it <= params.max_iters; ++it) {
    const RowMatrix v = z - y;
    const RowMatrix phi = laplacian.solve(incidence_apply(edges, v, n) - mu);
    x = v - incidence_transpose_apply(edges, phi);
    const RowMatrix xh = alpha * x + (1.0 - alpha) * z;
    z_prev = z;
    for (Index e = 0; e < num_edges; ++e) {
      const auto w = xh.row(e) + y.row(e);
      const double norm = w.norm();
      const double threshold = len(e) / rho;
      if (norm > threshold) {
        z.row(e) = (1.0 - threshold / norm) * w;
      } else {
        z.row(e).setZero();
      }
    }
    y += xh - z;
    if (!z.allFinite() || !y.allFinite()) fail(ErrorCode::NumericalBreakdown, "ADMM iterates are not finite");

    const double net_res = detail::residual_variation(incidence_apply(edges, z, n), mu);
    if (net_res <= params.tol_primal && accept(z, raw_potential())) {
      report.status = SolveStatus::Converged;
      // Sharpen the tolerance-level answer; the ADMM pair stands if this fails.
      if (try_polish()) note_polish();
      break;
    }
    if (it == next_polish) {
      next_polish += std::min(it, 1000);
      if (try_polish()) {
        report.status = SolveStatus::Converged;
        note_polish();
        break;
      }
    }

    if (it % 10 == 0) {
      const double r_primal = (x - z).norm() / std::max({x.norm(), z.norm(), 1e-300});
      const double r_dual = (z - z_prev).norm() / std::max(y.norm(), 1e-300);
      if (r_primal > 10.0 * r_dual) {
        rho *= 2.0;
        y /= 2.0;
      } else if (r_dual > 10.0 * r_primal) {
        rho /= 2.0;
        y *= 2.0;
      }
      if (!(rho > 1e-12 && rho < 1e12)) fail(ErrorCode::NumericalBreakdown, "penalty adaptation diverged");
    }
  }
  report.iterations = std::min(it, params.max_iters);
  if (report.status != SolveStatus::Converged) {
    RowMatrix u = raw_potential();
    const double lip_raw = detail::max_lipschitz_ratio(u, all_dist);
    if (lip_raw > 1.0) u /= lip_raw;
    lip_excess = std::max(0.0, lip_raw - 1.0);
    flows_out = z;
    u_out = std::move(u);
  }

  // An unconverged z violates the marginals; route the residual through a
  // star so the returned coupling is feasible and weak duality applies.
  std::vector<std::pair<Index, Vector>> star_extra;
  if (report.status != SolveStatus::Converged) detail::repair_feasibility(edges, flows_out, mu, star_extra);
  std::vector<CouplingEdge> entries;
  for (Index e = 0; e < num_edges; ++e) {
    if (flows_out.row(e).squaredNorm() > 0.0) {
      entries.push_back({edges.pairs[e].first, edges.pairs[e].second, Vector(flows_out.row(e).transpose() * mass_scale)});
    }
  }
  for (auto& [i, flow] : star_extra) entries.push_back({0, i, Vector(flow * mass_scale)});
  VectorCoupling coupling(cloud, m, entries);
  PotentialField potential(cloud, u_out * length_scale);

  report.primal_value = coupling.cost();
  report.dual_value = pairing(potential, instance.measure());
  report.gap = report.primal_value - report.dual_value;
  report.primal_residual = detail::residual_variation(coupling.net(), instance.measure().weights());
  report.dual_residual = lip_excess;
  return {std::move(coupling), std::move(potential), std::move(report)};
}

/// KR norm of the instance measure; throws when the solver does not converge.
inline double kr_norm(const Instance& instance, const SolverParams& params = {}) {
  SolveResult result = solve(instance, params);
  if (result.report.status != SolveStatus::Converged) {
    fail(ErrorCode::IterLimit, "solver stopped at the iteration limit after " +
                                            std::to_string(result.report.iterations) + " iterations");
  }
  return result.report.primal_value;
}

/// Closed-form norm for scalar measures on the real line: the integral of the
/// absolute cumulative mass.
inline double line_oracle(const Instance& instance) {
  if (instance.ambient_dim() != 1 || instance.target_dim() != 1) {
    fail(ErrorCode::WrongDimension, "line oracle needs n = 1 and m = 1");
  }
  const auto& pts = instance.cloud()->points();
  const auto& w = instance.measure().weights();
  std::vector<Index> order(static_cast<std::size_t>(instance.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return pts(a, 0) < pts(b, 0); });
  double cumulative = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    cumulative += w(order[k], 0);
    total += std::abs(cumulative) * (pts(order[k + 1], 0) - pts(order[k], 0));
  }
  return total;
}

}  // namespace vecot
