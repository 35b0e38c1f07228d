#pragma once

// Data model for optimal transport of R^m-valued measures on finite point sets:
// point clouds, vector measures, couplings on point pairs, potentials, and the
// elementary functionals on them (total variation, cost, pairing, Lipschitz
// constant, marginals).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "vecot/error.hpp"
#include "vecot/parallel.hpp"

namespace vecot {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Ordered, duplicate-free points in R^n, stored one point per row.
class PointCloud {
 public:
  explicit PointCloud(RowMatrix points) : points_(std::move(points)) {
    if (points_.rows() == 0) fail(ErrorCode::InvalidArgument, "point cloud is empty");
    if (points_.cols() == 0) fail(ErrorCode::DimensionMismatch, "ambient dimension must be positive");
    if (!points_.allFinite()) fail(ErrorCode::InvalidArgument, "point coordinates must be finite");
    check_distinct();
  }

  Index size() const noexcept { return points_.rows(); }
  Index ambient_dim() const noexcept { return points_.cols(); }
  const RowMatrix& points() const noexcept { return points_; }
  auto point(Index i) const { return points_.row(i); }

  double distance(Index i, Index j) const { return (points_.row(i) - points_.row(j)).norm(); }

 private:
  void check_distinct() const {
    std::vector<Index> order(static_cast<std::size_t>(points_.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    auto less = [&](Index a, Index b) {
      for (Index k = 0; k < points_.cols(); ++k) {
        if (points_(a, k) != points_(b, k)) return points_(a, k) < points_(b, k);
      }
      return a < b;
    };
    std::sort(order.begin(), order.end(), less);
    for (std::size_t k = 1; k < order.size(); ++k) {
      if ((points_.row(order[k]) - points_.row(order[k - 1])).squaredNorm() == 0.0) {
        fail(ErrorCode::DuplicatePoint, "points " + std::to_string(std::min(order[k], order[k - 1])) +
                                            " and " + std::to_string(std::max(order[k], order[k - 1])) +
                                            " coincide");
      }
    }
  }

  RowMatrix points_;
};

using CloudPtr = std::shared_ptr<const PointCloud>;

inline CloudPtr make_cloud(RowMatrix points) { return std::make_shared<const PointCloud>(std::move(points)); }

/// Finite R^m-valued measure: weight row i sits on cloud point i.
class DiscreteVectorMeasure {
 public:
  DiscreteVectorMeasure(CloudPtr cloud, RowMatrix weights) : cloud_(std::move(cloud)), weights_(std::move(weights)) {
    if (!cloud_) fail(ErrorCode::InvalidArgument, "measure needs a point cloud");
    if (weights_.rows() != cloud_->size()) {
      fail(ErrorCode::DimensionMismatch, "expected " + std::to_string(cloud_->size()) + " weights, got " +
                                             std::to_string(weights_.rows()));
    }
    if (weights_.cols() == 0) fail(ErrorCode::DimensionMismatch, "target dimension must be positive");
    if (!weights_.allFinite()) fail(ErrorCode::InvalidArgument, "weights must be finite");
  }

  static DiscreteVectorMeasure zero(CloudPtr cloud, Index target_dim) {
    const Index n = cloud->size();
    return {std::move(cloud), RowMatrix::Zero(n, target_dim)};
  }

  Index target_dim() const noexcept { return weights_.cols(); }
  Index size() const noexcept { return weights_.rows(); }
  const CloudPtr& cloud() const noexcept { return cloud_; }
  const RowMatrix& weights() const noexcept { return weights_; }

  Vector total_mass() const { return weights_.colwise().sum().transpose(); }

  /// Sum of the Euclidean norms of the atoms, i.e. the total variation of the measure.
  double total_variation() const {
    double acc = 0.0;
    for (Index i = 0; i < weights_.rows(); ++i) acc += weights_.row(i).norm();
    return acc;
  }

  DiscreteVectorMeasure scaled(double c) const { return {cloud_, weights_ * c}; }

 private:
  CloudPtr cloud_;
  RowMatrix weights_;
};

inline DiscreteVectorMeasure operator+(const DiscreteVectorMeasure& a, const DiscreteVectorMeasure& b) {
  if (a.cloud() != b.cloud() || a.target_dim() != b.target_dim()) {
    fail(ErrorCode::DimensionMismatch, "measures must share cloud and target dimension");
  }
  return {a.cloud(), a.weights() + b.weights()};
}

struct CouplingEdge {
  Index i = 0;
  Index j = 0;
  Vector flow;
};

/// Signed R^m flows on unordered point pairs. An entry (i, j, w) has the same
/// marginal effect as (j, i, -w); repeated pairs are merged on construction,
/// keeping the orientation of the first occurrence.
class VectorCoupling {
 public:
  VectorCoupling(CloudPtr cloud, Index target_dim, const std::vector<CouplingEdge>& entries = {})
      : cloud_(std::move(cloud)), target_dim_(target_dim) {
    if (!cloud_) fail(ErrorCode::InvalidArgument, "coupling needs a point cloud");
    if (target_dim_ <= 0) fail(ErrorCode::DimensionMismatch, "target dimension must be positive");
    std::map<std::pair<Index, Index>, std::size_t> slot;
    for (const auto& e : entries) {
      if (e.i < 0 || e.j < 0 || e.i >= cloud_->size() || e.j >= cloud_->size()) {
        fail(ErrorCode::InvalidArgument, "coupling edge index out of range");
      }
      if (e.i == e.j) fail(ErrorCode::InvalidArgument, "coupling edges must join distinct points");
      if (e.flow.size() != target_dim_) fail(ErrorCode::DimensionMismatch, "flow has wrong dimension");
      if (!e.flow.allFinite()) fail(ErrorCode::InvalidArgument, "flows must be finite");
      const auto key = std::minmax(e.i, e.j);
      auto it = slot.find(key);
      if (it == slot.end()) {
        slot.emplace(key, edges_.size());
        edges_.push_back(e);
      } else {
        auto& kept = edges_[it->second];
        kept.flow += (kept.i == e.i) ? e.flow : Vector(-e.flow);
      }
    }
  }

  Index target_dim() const noexcept { return target_dim_; }
  const CloudPtr& cloud() const noexcept { return cloud_; }
  const std::vector<CouplingEdge>& edges() const noexcept { return edges_; }

  double total_variation() const {
    double acc = 0.0;
    for (const auto& e : edges_) acc += e.flow.norm();
    return acc;
  }

  double cost() const {
    double acc = 0.0;
    for (const auto& e : edges_) acc += e.flow.norm() * cloud_->distance(e.i, e.j);
    return acc;
  }

  /// Signed net marginal P1 - P2 as an N x m matrix.
  RowMatrix net() const {
    RowMatrix out = RowMatrix::Zero(cloud_->size(), target_dim_);
    for (const auto& e : edges_) {
      out.row(e.i) += e.flow.transpose();
      out.row(e.j) -= e.flow.transpose();
    }
    return out;
  }

 private:
  CloudPtr cloud_;
  Index target_dim_;
  std::vector<CouplingEdge> edges_;
};

inline double total_variation(const VectorCoupling& pi) { return pi.total_variation(); }
inline double cost(const VectorCoupling& pi) { return pi.cost(); }

struct Marginals {
  DiscreteVectorMeasure first;
  DiscreteVectorMeasure second;
};

/// First and second marginals in the stored orientation; first - second equals net().
inline Marginals marginals(const VectorCoupling& pi) {
  RowMatrix p1 = RowMatrix::Zero(pi.cloud()->size(), pi.target_dim());
  RowMatrix p2 = p1;
  for (const auto& e : pi.edges()) {
    p1.row(e.i) += e.flow.transpose();
    p2.row(e.j) += e.flow.transpose();
  }
  return {DiscreteVectorMeasure(pi.cloud(), std::move(p1)), DiscreteVectorMeasure(pi.cloud(), std::move(p2))};
}

/// R^m-valued function on the cloud, one value per row.
class PotentialField {
 public:
  PotentialField(CloudPtr cloud, RowMatrix values) : cloud_(std::move(cloud)), values_(std::move(values)) {
    if (!cloud_) fail(ErrorCode::InvalidArgument, "potential needs a point cloud");
    if (values_.rows() != cloud_->size()) fail(ErrorCode::DimensionMismatch, "one potential value per point");
    if (values_.cols() == 0) fail(ErrorCode::DimensionMismatch, "target dimension must be positive");
    if (!values_.allFinite()) fail(ErrorCode::InvalidArgument, "potential values must be finite");
  }

  Index target_dim() const noexcept { return values_.cols(); }
  const CloudPtr& cloud() const noexcept { return cloud_; }
  const RowMatrix& values() const noexcept { return values_; }

  /// Same field shifted so that the value at index 0 is the zero vector.
  PotentialField normalized() const {
    RowMatrix shifted = values_.rowwise() - values_.row(0);
    return {cloud_, std::move(shifted)};
  }

 private:
  CloudPtr cloud_;
  RowMatrix values_;
};

struct LipschitzResult {
  double value = 0.0;
  Index i = 0;
  Index j = 0;
  bool single_point = false;
};

/// Exact maximum of |u_i - u_j| / d_ij over all pairs; ties go to the
/// lexicographically first pair.
inline LipschitzResult lipschitz_constant(const PotentialField& u) {
  const auto& cloud = *u.cloud();
  const Index n = cloud.size();
  if (n < 2) return {0.0, 0, 0, true};
  struct RowBest {
    double value = -1.0;
    Index j = 0;
  };
  std::vector<RowBest> best(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    const Index i = static_cast<Index>(row);
    RowBest b;
    for (Index j = i + 1; j < n; ++j) {
      const double ratio = (u.values().row(i) - u.values().row(j)).norm() / cloud.distance(i, j);
      if (ratio > b.value) b = {ratio, j};
    }
    best[row] = b;
  }, 16);
  LipschitzResult out{-1.0, 0, 1, false};
  for (Index i = 0; i + 1 < n; ++i) {
    if (best[static_cast<std::size_t>(i)].value > out.value) out = {best[static_cast<std::size_t>(i)].value, i, best[static_cast<std::size_t>(i)].j, false};
  }
  return out;
}

/// Sum over points of <u_i, mu_i>.
inline double pairing(const PotentialField& u, const DiscreteVectorMeasure& mu) {
  if (u.target_dim() != mu.target_dim() || u.cloud()->size() != mu.size()) {
    fail(ErrorCode::DimensionMismatch, "potential and measure disagree on size or target dimension");
  }
  double acc = 0.0;
  for (Index i = 0; i < mu.size(); ++i) acc += u.values().row(i).dot(mu.weights().row(i));
  return acc;
}

/// Validated zero-mass measure together with its Euclidean distance matrix.
class Instance {
 public:
  static constexpr double kMassTolerance = 1e-12;

  explicit Instance(DiscreteVectorMeasure measure) : measure_(std::move(measure)) {
    const Vector total = measure_.total_mass();
    const double scale = measure_.total_variation();
    if (total.cwiseAbs().maxCoeff() > kMassTolerance * scale) {
      throw NonzeroTotalMassError(std::vector<double>(total.data(), total.data() + total.size()),
                                  "total mass must vanish, residual norm " + std::to_string(total.norm()));
    }
    const auto& cloud = *measure_.cloud();
    const Index n = cloud.size();
    distances_ = Matrix::Zero(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
      const Index i = static_cast<Index>(row);
      for (Index j = 0; j < n; ++j) {
        if (j != i) distances_(i, j) = cloud.distance(std::min(i, j), std::max(i, j));
      }
    }, 16);
  }

  const DiscreteVectorMeasure& measure() const noexcept { return measure_; }
  const CloudPtr& cloud() const noexcept { return measure_.cloud(); }
  const Matrix& distances() const noexcept { return distances_; }
  Index size() const noexcept { return measure_.size(); }
  Index ambient_dim() const noexcept { return measure_.cloud()->ambient_dim(); }
  Index target_dim() const noexcept { return measure_.target_dim(); }

 private:
  DiscreteVectorMeasure measure_;
  Matrix distances_;
};

/// Builds and validates an instance from raw coordinates and weights.
inline Instance build_instance(const std::vector<std::vector<double>>& points,
                               const std::vector<std::vector<double>>& weights) {
  if (points.empty() || weights.empty()) fail(ErrorCode::InvalidArgument, "points and weights must be nonempty");
  if (points.size() != weights.size()) {
    fail(ErrorCode::DimensionMismatch, std::to_string(points.size()) + " points but " +
                                           std::to_string(weights.size()) + " weights");
  }
  const std::size_t n = points.front().size();
  const std::size_t m = weights.front().size();
  if (n == 0 || m == 0) fail(ErrorCode::DimensionMismatch, "dimensions must be positive");
  RowMatrix p(static_cast<Index>(points.size()), static_cast<Index>(n));
  RowMatrix w(static_cast<Index>(points.size()), static_cast<Index>(m));
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].size() != n) fail(ErrorCode::DimensionMismatch, "point " + std::to_string(k) + " has wrong dimension");
    if (weights[k].size() != m) fail(ErrorCode::DimensionMismatch, "weight " + std::to_string(k) + " has wrong dimension");
    for (std::size_t c = 0; c < n; ++c) p(static_cast<Index>(k), static_cast<Index>(c)) = points[k][c];
    for (std::size_t c = 0; c < m; ++c) w(static_cast<Index>(k), static_cast<Index>(c)) = weights[k][c];
  }
  return Instance(DiscreteVectorMeasure(make_cloud(std::move(p)), std::move(w)));
}

inline Instance build_instance(RowMatrix points, RowMatrix weights) {
  return Instance(DiscreteVectorMeasure(make_cloud(std::move(points)), std::move(weights)));
}

}  // namespace vecot
