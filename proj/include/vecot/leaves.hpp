#pragma once

// Leaf decomposition of a 1-Lipschitz potential on a finite sample: the
// isometry graph of saturated pairs, sample-maximal leaves with affine
// isometry fits, inradius estimates, the strengthened Lipschitz diagnostics
// between leaves, and transport sets.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vecot/core.hpp"

namespace vecot {

struct IsometryGraph {
  CloudPtr cloud;
  double epsilon = 0.0;
  std::vector<std::pair<Index, Index>> edges;  // i < j, lexicographic
  std::vector<std::vector<Index>> adjacency;   // sorted neighbour lists

  bool has_edge(Index i, Index j) const {
    const auto& row = adjacency[static_cast<std::size_t>(i)];
    return std::binary_search(row.begin(), row.end(), j);
  }
};

/// Pairs with |u_i - u_j| >= (1 - eps) d_ij.
inline IsometryGraph isometry_graph(const PotentialField& u, double epsilon = 1e-6) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) fail(ErrorCode::InvalidArgument, "epsilon must lie in [0, 1)");
  const LipschitzResult lip = lipschitz_constant(u);
  if (lip.value > 1.0 + epsilon) {
    fail(ErrorCode::NotLipschitz, "Lipschitz constant " + std::to_string(lip.value) + " exceeds 1 + epsilon");
  }
  const PointCloud& cloud = *u.cloud();
  const Index n = cloud.size();
  IsometryGraph graph{u.cloud(), epsilon, {}, std::vector<std::vector<Index>>(static_cast<std::size_t>(n))};
  std::vector<std::vector<Index>> upper(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    const Index i = static_cast<Index>(row);
    for (Index j = i + 1; j < n; ++j) {
      if ((u.values().row(i) - u.values().row(j)).norm() >= (1.0 - epsilon) * cloud.distance(i, j)) {
        upper[row].push_back(j);
      }
    }
  }, 16);
  for (Index i = 0; i < n; ++i) {
    for (Index j : upper[static_cast<std::size_t>(i)]) {
      graph.edges.emplace_back(i, j);
      graph.adjacency[static_cast<std::size_t>(i)].push_back(j);
      graph.adjacency[static_cast<std::size_t>(j)].push_back(i);
    }
  }
  for (auto& row : graph.adjacency) std::sort(row.begin(), row.end());
  return graph;
}

/// u(y) ~ map * basis^T (y - base) + offset on the tangent space spanned by
/// the orthonormal columns of basis.
struct AffineIsometry {
  Vector base;    // y0 in R^n
  Vector offset;  // b in R^m
  Matrix basis;   // V, n x k
  Matrix map;     // T, m x k
  double residual = 0.0;

  Index dimension() const { return basis.cols(); }
  /// Du = T V^T as an m x n matrix.
  Matrix linear() const { return map * basis.transpose(); }
  /// Orthogonal projection V V^T onto the tangent space.
  Matrix projection() const { return basis * basis.transpose(); }
  Vector apply(const Vector& y) const { return linear() * (y - base) + offset; }
};

/// Procrustes fit: centroid base point, tangent space from the SVD of the
/// centred points (singular values below 1e-7 of the largest dropped), and
/// the orthogonal map minimising the squared misfit. Residual is the RMS
/// misfit per point.
inline AffineIsometry affine_isometry_fit(const RowMatrix& points, const RowMatrix& values) {
  if (points.rows() == 0 || points.rows() != values.rows()) {
    fail(ErrorCode::DimensionMismatch, "fit needs matching nonempty point and value lists");
  }
  const Index count = points.rows();
  const Index n = points.cols();
  const Index m = values.cols();
  AffineIsometry fit;
  fit.base = points.colwise().mean().transpose();
  fit.offset = values.colwise().mean().transpose();
  const Matrix xc = points.rowwise() - fit.base.transpose();
  const Matrix yc = values.rowwise() - fit.offset.transpose();

  Index rank = 0;
  Matrix basis(n, 0);
  if (count > 1) {
    Eigen::JacobiSVD<Matrix> svd(xc, Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double scale = sv.size() > 0 ? sv(0) : 0.0;
    const double floor = std::max(1e-7 * scale, 1e-300);
    if (scale > 0.0) {
      for (Index k = 0; k < sv.size(); ++k) {
        if (sv(k) > floor) ++rank;
      }
    }
    basis = svd.matrixV().leftCols(rank);
  }
  // Fix the sign of each basis vector so fits are reproducible.
  for (Index k = 0; k < rank; ++k) {
    Index lead = 0;
    basis.col(k).cwiseAbs().maxCoeff(&lead);
    if (basis(lead, k) < 0.0) basis.col(k) *= -1.0;
  }
  fit.basis = basis;
  fit.map = Matrix::Zero(m, rank);
  if (rank > 0) {
    const Matrix coords = xc * basis;  // count x k
    const Matrix cross = yc.transpose() * coords;  // m x k
    Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
    fit.map = svd.matrixU() * svd.matrixV().transpose();
  }
  const Matrix misfit = yc - xc * fit.basis * fit.map.transpose();
  fit.residual = std::sqrt(misfit.squaredNorm() / static_cast<double>(count));
  return fit;
}

struct Leaf {
  std::vector<Index> members;  // sorted cloud indices, boundary points included
  Index dimension = 0;
  AffineIsometry isometry;
  double fit_residual = 0.0;
  std::vector<double> sigma;  // inradius estimate per member
  RowMatrix points;           // member coordinates, same order as members
  RowMatrix values;           // member potential values

  /// Position of a cloud index among the members, or -1.
  Index position(Index point) const {
    auto it = std::lower_bound(members.begin(), members.end(), point);
    if (it == members.end() || *it != point) return -1;
    return static_cast<Index>(it - members.begin());
  }
};

struct LeafDecomposition {
  CloudPtr cloud;
  double epsilon = 0.0;
  std::vector<Leaf> leaves;
  std::vector<Index> assignment;  // point -> leaf id
  std::vector<bool> boundary;     // point lies in two or more nontrivial leaves
  IsometryGraph graph;
};

namespace detail {

// Bron-Kerbosch with pivoting on sorted index lists. Returns false when more
// than `cap` cliques would be produced.
inline bool maximal_cliques(const IsometryGraph& g, std::size_t cap, std::vector<std::vector<Index>>& out) {
  auto intersect = [](const std::vector<Index>& a, const std::vector<Index>& b) {
    std::vector<Index> r;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(r));
    return r;
  };
  bool ok = true;
  std::vector<Index> current;
  auto recurse = [&](auto&& self, std::vector<Index> candidates, std::vector<Index> excluded) -> void {
    if (!ok) return;
    if (candidates.empty() && excluded.empty()) {
      if (current.size() >= 2) {
        if (out.size() >= cap) {
          ok = false;
          return;
        }
        std::vector<Index> clique = current;
        std::sort(clique.begin(), clique.end());
        out.push_back(std::move(clique));
      }
      return;
    }
    Index pivot = -1;
    std::size_t best = 0;
    for (const auto* pool : {&candidates, &excluded}) {
      for (Index v : *pool) {
        const std::size_t deg = intersect(candidates, g.adjacency[static_cast<std::size_t>(v)]).size();
        if (pivot < 0 || deg > best) {
          pivot = v;
          best = deg;
        }
      }
    }
    std::vector<Index> branch;
    const auto& pivot_nbrs = g.adjacency[static_cast<std::size_t>(pivot)];
    std::set_difference(candidates.begin(), candidates.end(), pivot_nbrs.begin(), pivot_nbrs.end(),
                        std::back_inserter(branch));
    for (Index v : branch) {
      const auto& nbrs = g.adjacency[static_cast<std::size_t>(v)];
      current.push_back(v);
      self(self, intersect(candidates, nbrs), intersect(excluded, nbrs));
      current.pop_back();
      candidates.erase(std::lower_bound(candidates.begin(), candidates.end(), v));
      excluded.insert(std::lower_bound(excluded.begin(), excluded.end(), v), v);
      if (!ok) return;
    }
  };
  std::vector<Index> all(g.adjacency.size());
  std::iota(all.begin(), all.end(), Index{0});
  recurse(recurse, all, {});
  return ok;
}

inline std::vector<std::vector<Index>> connected_components(const IsometryGraph& g) {
  const std::size_t n = g.adjacency.size();
  std::vector<Index> label(n, -1);
  std::vector<std::vector<Index>> comps;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] >= 0 || g.adjacency[s].empty()) continue;
    std::vector<Index> comp;
    std::vector<Index> stack{static_cast<Index>(s)};
    label[s] = static_cast<Index>(comps.size());
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (Index w : g.adjacency[static_cast<std::size_t>(v)]) {
        if (label[static_cast<std::size_t>(w)] < 0) {
          label[static_cast<std::size_t>(w)] = label[s];
          stack.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

inline RowMatrix gather(const RowMatrix& source, const std::vector<Index>& rows) {
  RowMatrix out(static_cast<Index>(rows.size()), source.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = source.row(rows[k]);
  return out;
}

inline double diameter(const RowMatrix& pts) {
  double best = 0.0;
  for (Index a = 0; a < pts.rows(); ++a) {
    for (Index b = a + 1; b < pts.rows(); ++b) best = std::max(best, (pts.row(a) - pts.row(b)).norm());
  }
  return best;
}

// Convex hull (monotone chain) of 2-D points, counter-clockwise, no collinear
// vertices.
inline std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> p) {
  std::sort(p.begin(), p.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p[i]) <= 0.0) --k;
    hull[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], p[i - 1]) <= 0.0) --k;
    hull[k++] = p[i - 1];
  }
  hull.resize(k > 1 ? k - 1 : k);
  return hull;
}

// Inradius proxy of every member: distance to the boundary of the convex hull
// of the members inside the fitted tangent space.
inline std::vector<double> sigma_estimates(const Leaf& leaf, const PointCloud& cloud) {
  const std::size_t count = leaf.members.size();
  const Index k = leaf.dimension;
  std::vector<double> sigma(count, 0.0);
  if (k == 0 || count < 2) return sigma;
  const Matrix coords = (leaf.points.rowwise() - leaf.isometry.base.transpose()) * leaf.isometry.basis;
  const double extent = coords.cwiseAbs().maxCoeff();
  const double flat = 1e-9 * std::max(extent, 1.0);

  if (k == 1) {
    const double lo = coords.col(0).minCoeff();
    const double hi = coords.col(0).maxCoeff();
    for (std::size_t a = 0; a < count; ++a) {
      sigma[a] = std::min(coords(static_cast<Index>(a), 0) - lo, hi - coords(static_cast<Index>(a), 0));
    }
    return sigma;
  }
  if (k == 2) {
    std::vector<Eigen::Vector2d> pts;
    for (std::size_t a = 0; a < count; ++a) pts.emplace_back(coords(static_cast<Index>(a), 0), coords(static_cast<Index>(a), 1));
    const auto hull = convex_hull_2d(pts);
    for (std::size_t a = 0; a < count; ++a) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < hull.size(); ++e) {
        const Eigen::Vector2d& p = hull[e];
        const Eigen::Vector2d& q = hull[(e + 1) % hull.size()];
        const Eigen::Vector2d dir = (q - p).normalized();
        const Eigen::Vector2d rel = pts[a] - p;
        best = std::min(best, std::abs(dir.x() * rel.y() - dir.y() * rel.x()));
      }
      sigma[a] = best < flat ? 0.0 : best;
    }
    return sigma;
  }
  if (k == 3 && count <= 60) {
    std::vector<double> best(count, std::numeric_limits<double>::infinity());
    for (std::size_t a = 0; a < count; ++a) {
      for (std::size_t b = a + 1; b < count; ++b) {
        for (std::size_t c = b + 1; c < count; ++c) {
          const Eigen::Vector3d pa = coords.row(static_cast<Index>(a)).transpose();
          const Eigen::Vector3d normal = (Eigen::Vector3d(coords.row(static_cast<Index>(b)).transpose()) - pa)
                                             .cross(Eigen::Vector3d(coords.row(static_cast<Index>(c)).transpose()) - pa);
          const double len = normal.norm();
          if (len <= flat * flat) continue;
          const Eigen::Vector3d unit = normal / len;
          bool above = false;
          bool below = false;
          Vector dist(static_cast<Index>(count));
          for (std::size_t p = 0; p < count; ++p) {
            dist(static_cast<Index>(p)) = unit.dot(Eigen::Vector3d(coords.row(static_cast<Index>(p)).transpose()) - pa);
            if (dist(static_cast<Index>(p)) > flat) above = true;
            if (dist(static_cast<Index>(p)) < -flat) below = true;
          }
          if (above && below) continue;
          for (std::size_t p = 0; p < count; ++p) best[p] = std::min(best[p], std::abs(dist(static_cast<Index>(p))));
        }
      }
    }
    for (std::size_t a = 0; a < count; ++a) sigma[a] = best[a] < flat ? 0.0 : best[a];
    return sigma;
  }
  // Higher dimension: distance to the nearest non-member lying in the affine hull.
  std::vector<char> member(static_cast<std::size_t>(cloud.size()), 0);
  for (Index i : leaf.members) member[static_cast<std::size_t>(i)] = 1;
  const Matrix proj = leaf.isometry.projection();
  for (Index i = 0; i < cloud.size(); ++i) {
    if (member[static_cast<std::size_t>(i)]) continue;
    const Vector rel = cloud.point(i).transpose() - leaf.isometry.base;
    if ((rel - proj * rel).norm() > flat) continue;
    for (std::size_t a = 0; a < count; ++a) {
      const double d = (leaf.points.row(static_cast<Index>(a)) - cloud.point(i)).norm();
      sigma[a] = sigma[a] == 0.0 ? d : std::min(sigma[a], d);
    }
  }
  return sigma;
}

inline Leaf make_leaf(const std::vector<Index>& members, const PotentialField& u) {
  Leaf leaf;
  leaf.members = members;
  leaf.points = gather(u.cloud()->points(), members);
  leaf.values = gather(u.values(), members);
  leaf.isometry = affine_isometry_fit(leaf.points, leaf.values);
  leaf.dimension = leaf.isometry.dimension();
  leaf.fit_residual = leaf.isometry.residual;
  return leaf;
}

}  // namespace detail

/// Sample-maximal leaves: maximal cliques of the isometry graph (connected
/// components if the clique count exceeds `clique_cap`), each validated by an
/// affine isometry fit and shrunk greedily while the fit residual exceeds
/// epsilon times the diameter. Points in two or more nontrivial leaves are
/// flagged and assigned to the smallest leaf id; uncovered points become
/// singleton leaves. Leaves are ordered by smallest member.
inline LeafDecomposition extract_leaves(const IsometryGraph& graph, const PotentialField& u,
                                        std::size_t clique_cap = 100000) {
  const Index n = u.cloud()->size();
  if (static_cast<Index>(graph.adjacency.size()) != n) {
    fail(ErrorCode::DimensionMismatch, "graph and potential live on different clouds");
  }
  std::vector<std::vector<Index>> candidates;
  if (!detail::maximal_cliques(graph, clique_cap, candidates)) {
    candidates = detail::connected_components(graph);
  }

  std::set<std::vector<Index>> accepted;
  for (auto members : candidates) {
    while (members.size() >= 2) {
      const Leaf leaf = detail::make_leaf(members, u);
      const double allowed = graph.epsilon * detail::diameter(leaf.points);
      if (leaf.fit_residual <= allowed && leaf.dimension <= u.target_dim()) break;
      // Drop the member with the largest individual misfit (first on ties).
      std::size_t worst = 0;
      double worst_err = -1.0;
      for (std::size_t a = 0; a < members.size(); ++a) {
        const Vector y = leaf.points.row(static_cast<Index>(a)).transpose();
        const double err = (leaf.values.row(static_cast<Index>(a)).transpose() - leaf.isometry.apply(y)).norm();
        if (err > worst_err) {
          worst_err = err;
          worst = a;
        }
      }
      members.erase(members.begin() + static_cast<std::ptrdiff_t>(worst));
    }
    if (members.size() >= 2) accepted.insert(members);
  }
  // Drop sets contained in another accepted set.
  std::vector<std::vector<Index>> nontrivial;
  for (const auto& s : accepted) {
    bool contained = false;
    for (const auto& t : accepted) {
      if (t.size() > s.size() && std::includes(t.begin(), t.end(), s.begin(), s.end())) {
        contained = true;
        break;
      }
    }
    if (!contained) nontrivial.push_back(s);
  }

  std::vector<int> cover(static_cast<std::size_t>(n), 0);
  for (const auto& s : nontrivial) {
    for (Index i : s) ++cover[static_cast<std::size_t>(i)];
  }
  std::vector<std::vector<Index>> all = nontrivial;
  for (Index i = 0; i < n; ++i) {
    if (cover[static_cast<std::size_t>(i)] == 0) all.push_back({i});
  }
  std::sort(all.begin(), all.end());

  LeafDecomposition out;
  out.cloud = u.cloud();
  out.epsilon = graph.epsilon;
  out.graph = graph;
  out.assignment.assign(static_cast<std::size_t>(n), -1);
  out.boundary.assign(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n; ++i) out.boundary[static_cast<std::size_t>(i)] = cover[static_cast<std::size_t>(i)] >= 2;
  for (std::size_t id = 0; id < all.size(); ++id) {
    Leaf leaf = detail::make_leaf(all[id], u);
    leaf.sigma = detail::sigma_estimates(leaf, *u.cloud());
    for (Index i : leaf.members) {
      auto& slot = out.assignment[static_cast<std::size_t>(i)];
      if (slot < 0) slot = static_cast<Index>(id);
    }
    out.leaves.push_back(std::move(leaf));
  }
  return out;
}

/// Convenience: graph and leaves in one call.
inline LeafDecomposition extract_leaves(const PotentialField& u, double epsilon = 1e-6) {
  return extract_leaves(isometry_graph(u, epsilon), u);
}

/// Potential rebuilt from the fitted leaf isometries at each point's assigned leaf.
inline PotentialField reconstruct_potential(const LeafDecomposition& dec) {
  const Index n = dec.cloud->size();
  const Index m = dec.leaves.front().values.cols();
  RowMatrix values(n, m);
  for (Index i = 0; i < n; ++i) {
    const Leaf& leaf = dec.leaves[static_cast<std::size_t>(dec.assignment[static_cast<std::size_t>(i)])];
    values.row(i) = leaf.isometry.apply(dec.cloud->point(i).transpose()).transpose();
  }
  return {dec.cloud, std::move(values)};
}

namespace detail {

struct LeafPoint {
  Vector x;
  Vector u;
  double sigma;
};

inline LeafPoint leaf_point(const Leaf& leaf, Index point) {
  const Index pos = leaf.position(point);
  if (pos < 0) fail(ErrorCode::InvalidArgument, "point " + std::to_string(point) + " is not a member of the leaf");
  return {leaf.points.row(pos).transpose(), leaf.values.row(pos).transpose(),
          leaf.sigma.empty() ? 0.0 : leaf.sigma[static_cast<std::size_t>(pos)]};
}

inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

}  // namespace detail

/// |x1 - x2|^2 - |u(x1) - u(x2)|^2 - 2 s1 s2 |P1 P2 - P1 T1* T2 P2|. When
/// either inradius is zero the operator term is vacuous and the plain
/// Lipschitz slack is returned.
inline double strengthened_lipschitz_residual(const Leaf& leaf1, const Leaf& leaf2, Index x1, Index x2) {
  const auto a = detail::leaf_point(leaf1, x1);
  const auto b = detail::leaf_point(leaf2, x2);
  const double slack = (a.x - b.x).squaredNorm() - (a.u - b.u).squaredNorm();
  if (a.sigma <= 0.0 || b.sigma <= 0.0) return slack;
  const Matrix op = leaf1.isometry.projection() * leaf2.isometry.projection() -
                    leaf1.isometry.linear().transpose() * leaf2.isometry.linear();
  return slack - 2.0 * a.sigma * b.sigma * detail::spectral_norm(op);
}

struct DerivativeModulus {
  double difference = 0.0;  // |Du(x1) - Du(x2)|
  double bound = 0.0;       // sqrt(slack / (s1 s2)) + tol
  bool pass = false;
};

/// Compares |T1 P1 - T2 P2| with sqrt((|dx|^2 - |du|^2) / (s1 s2)). Both leaves
/// must have full dimension m and both points positive inradius.
inline DerivativeModulus derivative_modulus(const Leaf& leaf1, const Leaf& leaf2, Index x1, Index x2,
                                            double tol = 1e-9) {
  const Index m = leaf1.values.cols();
  if (leaf1.dimension < m || leaf2.dimension < m) {
    fail(ErrorCode::WrongDimension, "derivative modulus needs leaves of dimension m");
  }
  const auto a = detail::leaf_point(leaf1, x1);
  const auto b = detail::leaf_point(leaf2, x2);
  if (!(a.sigma > 0.0 && b.sigma > 0.0)) fail(ErrorCode::InvalidArgument, "points must have positive inradius");
  const double slack = std::max(0.0, (a.x - b.x).squaredNorm() - (a.u - b.u).squaredNorm());
  DerivativeModulus out;
  out.difference = detail::spectral_norm(leaf1.isometry.linear() - leaf2.isometry.linear());
  out.bound = std::sqrt(slack / (a.sigma * b.sigma)) + tol + leaf1.fit_residual + leaf2.fit_residual;
  out.pass = out.difference <= out.bound;
  return out;
}

inline bool derivative_modulus_check(const Leaf& leaf1, const Leaf& leaf2, Index x1, Index x2, double tol = 1e-9) {
  return derivative_modulus(leaf1, leaf2, x1, x2, tol).pass;
}

/// Closure of the seed under saturated pairs, expanding only from points
/// that are not boundary-flagged.
inline std::vector<Index> transport_set(const LeafDecomposition& dec, const std::vector<Index>& seed) {
  const std::size_t n = dec.assignment.size();
  std::vector<char> in(n, 0);
  std::vector<Index> stack;
  for (Index s : seed) {
    if (s < 0 || static_cast<std::size_t>(s) >= n) fail(ErrorCode::InvalidArgument, "seed index out of range");
    if (!in[static_cast<std::size_t>(s)]) {
      in[static_cast<std::size_t>(s)] = 1;
      stack.push_back(s);
    }
  }
  while (!stack.empty()) {
    const Index v = stack.back();
    stack.pop_back();
    if (dec.boundary[static_cast<std::size_t>(v)]) continue;
    for (Index w : dec.graph.adjacency[static_cast<std::size_t>(v)]) {
      if (!in[static_cast<std::size_t>(w)]) {
        in[static_cast<std::size_t>(w)] = 1;
        stack.push_back(w);
      }
    }
  }
  std::vector<Index> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (in[i]) out.push_back(static_cast<Index>(i));
  }
  return out;
}

/// Maximal transport sets: closures of every single-point seed, with
/// duplicates and strict subsets removed, ordered by smallest member.
inline std::vector<std::vector<Index>> maximal_transport_sets(const LeafDecomposition& dec) {
  std::set<std::vector<Index>> closures;
  for (std::size_t i = 0; i < dec.assignment.size(); ++i) closures.insert(transport_set(dec, {static_cast<Index>(i)}));
  std::vector<std::vector<Index>> out;
  for (const auto& s : closures) {
    bool contained = false;
    for (const auto& t : closures) {
      if (t.size() > s.size() && std::includes(t.begin(), t.end(), s.begin(), s.end())) {
        contained = true;
        break;
      }
    }
    if (!contained) out.push_back(s);
  }
  return out;
}

}  // namespace vecot
