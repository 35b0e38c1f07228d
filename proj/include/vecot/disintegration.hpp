#pragma once

// Grid densities disintegrated along the leaves of two potentials with known
// leaf structure: the projection onto the first m coordinates (leaves are
// m-dimensional axis-aligned slices) and the distance to a centre (leaves are
// rays, needle density r^{n-1} f). Mixtures of needles are mapped back to the
// grid, and 1-D needles are checked against CD(kappa, N).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "vecot/core.hpp"

namespace vecot {

/// Nonnegative density sampled at the cell centres of an axis-aligned box.
/// Values are stored row-major: the last axis varies fastest.
class GridDensity {
 public:
  GridDensity(Vector lower, Vector upper, std::vector<Index> shape, Vector values)
      : lower_(std::move(lower)), upper_(std::move(upper)), shape_(std::move(shape)), values_(std::move(values)) {
    const Index n = lower_.size();
    if (n == 0 || upper_.size() != n || static_cast<Index>(shape_.size()) != n) {
      fail(ErrorCode::DimensionMismatch, "box bounds and shape must share the dimension");
    }
    Index cells = 1;
    for (Index k = 0; k < n; ++k) {
      if (!(upper_(k) > lower_(k))) fail(ErrorCode::InvalidArgument, "box must have positive extent");
      if (shape_[static_cast<std::size_t>(k)] < 1) fail(ErrorCode::InvalidArgument, "resolution must be positive");
      cells *= shape_[static_cast<std::size_t>(k)];
    }
    if (values_.size() != cells) fail(ErrorCode::DimensionMismatch, "expected " + std::to_string(cells) + " samples");
    if (!values_.allFinite() || (values_.array() < 0.0).any()) {
      fail(ErrorCode::NonpositiveDensity, "density samples must be finite and nonnegative");
    }
    if (!(values_.sum() > 0.0)) fail(ErrorCode::NonpositiveDensity, "density has zero mass");
  }

  /// Samples f at every cell centre.
  static GridDensity sample(const Vector& lower, const Vector& upper, const std::vector<Index>& shape,
                            const std::function<double(const Vector&)>& f) {
    Index cells = 1;
    for (Index s : shape) cells *= s;
    Vector values(cells);
    GridDensity geometry(lower, upper, shape, Vector::Ones(cells));
    for (Index c = 0; c < cells; ++c) values(c) = f(geometry.center(c));
    return {lower, upper, shape, std::move(values)};
  }

  Index dim() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const std::vector<Index>& shape() const { return shape_; }
  const Vector& values() const { return values_; }
  Index cells() const { return values_.size(); }

  double spacing(Index axis) const {
    return (upper_(axis) - lower_(axis)) / static_cast<double>(shape_[static_cast<std::size_t>(axis)]);
  }
  double cell_volume() const {
    double v = 1.0;
    for (Index k = 0; k < dim(); ++k) v *= spacing(k);
    return v;
  }
  double total_mass() const { return values_.sum() * cell_volume(); }

  std::vector<Index> unravel(Index flat) const {
    std::vector<Index> idx(shape_.size());
    for (Index k = dim() - 1; k >= 0; --k) {
      idx[static_cast<std::size_t>(k)] = flat % shape_[static_cast<std::size_t>(k)];
      flat /= shape_[static_cast<std::size_t>(k)];
    }
    return idx;
  }
  Index ravel(const std::vector<Index>& idx) const {
    Index flat = 0;
    for (Index k = 0; k < dim(); ++k) flat = flat * shape_[static_cast<std::size_t>(k)] + idx[static_cast<std::size_t>(k)];
    return flat;
  }
  Vector center(Index flat) const {
    const auto idx = unravel(flat);
    Vector x(dim());
    for (Index k = 0; k < dim(); ++k) x(k) = lower_(k) + (static_cast<double>(idx[static_cast<std::size_t>(k)]) + 0.5) * spacing(k);
    return x;
  }

  bool same_geometry(const GridDensity& other) const {
    return shape_ == other.shape_ && lower_ == other.lower_ && upper_ == other.upper_;
  }

  /// Multilinear interpolation between cell centres, constant beyond the
  /// outermost centres.
  double interpolate(const Vector& x) const {
    const Index n = dim();
    std::vector<Index> base(static_cast<std::size_t>(n));
    std::vector<double> frac(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
      const Index size = shape_[static_cast<std::size_t>(k)];
      double s = (x(k) - lower_(k)) / spacing(k) - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(size - 1));
      Index b = std::min<Index>(static_cast<Index>(std::floor(s)), std::max<Index>(size - 2, 0));
      base[static_cast<std::size_t>(k)] = b;
      frac[static_cast<std::size_t>(k)] = size > 1 ? s - static_cast<double>(b) : 0.0;
    }
    double acc = 0.0;
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index corner = 0; corner < (Index{1} << n); ++corner) {
      double w = 1.0;
      for (Index k = 0; k < n; ++k) {
        const bool up = (corner >> k) & 1;
        const Index size = shape_[static_cast<std::size_t>(k)];
        if (up && size == 1) {
          w = 0.0;
          break;
        }
        idx[static_cast<std::size_t>(k)] = base[static_cast<std::size_t>(k)] + (up ? 1 : 0);
        w *= up ? frac[static_cast<std::size_t>(k)] : 1.0 - frac[static_cast<std::size_t>(k)];
      }
      if (w != 0.0) acc += w * values_(ravel(idx));
    }
    return acc;
  }

 private:
  Vector lower_;
  Vector upper_;
  std::vector<Index> shape_;
  Vector values_;
};

/// Conditional density on one leaf. The leaf is parametrised as
/// base + directions * t with t on the tensor grid of `axes`; `density` is
/// row-major over that grid and normalised so that sum(density) * cell_measure = 1
/// (all zeros for an empty slice).
struct Needle {
  Vector base;
  Matrix directions;           // n x k, orthonormal columns
  std::vector<Vector> axes;    // k parameter grids
  Vector density;
  double cell_measure = 0.0;   // product of parameter spacings
  bool empty = false;

  Index dimension() const { return static_cast<Index>(axes.size()); }
  Index size() const { return density.size(); }

  Vector parameter(Index flat) const {
    Vector t(dimension());
    for (Index k = dimension() - 1; k >= 0; --k) {
      const Index s = axes[static_cast<std::size_t>(k)].size();
      t(k) = axes[static_cast<std::size_t>(k)](flat % s);
      flat /= s;
    }
    return t;
  }
  Vector point(Index flat) const { return base + directions * parameter(flat); }

  /// Integral of f against the needle's probability density.
  double expectation(const std::function<double(const Vector&)>& f) const {
    double acc = 0.0;
    for (Index c = 0; c < size(); ++c) {
      if (density(c) != 0.0) acc += density(c) * f(point(c));
    }
    return acc * cell_measure;
  }
};

enum class DisintegrationKind { Slice, Radial };

struct Disintegration {
  DisintegrationKind kind = DisintegrationKind::Slice;
  std::vector<Needle> needles;
  std::vector<double> weights;  // nonnegative, summing to 1
  // Source geometry.
  Vector lower;
  Vector upper;
  std::vector<Index> shape;
  Index slice_dim = 0;     // slice kind: leaf dimension m
  Vector center;           // radial kind
  double angular_cell = 0; // radial kind: solid angle per ray
};

/// Leaves of the projection onto the first m coordinates: one needle per
/// fixed value of the trailing n - m cell indices.
inline Disintegration slice_disintegration(const GridDensity& density, Index m) {
  const Index n = density.dim();
  if (m < 1 || m >= n) fail(ErrorCode::InvalidArgument, "slice dimension must satisfy 1 <= m < n");
  Index head_cells = 1;
  for (Index k = 0; k < m; ++k) head_cells *= density.shape()[static_cast<std::size_t>(k)];
  const Index tail_cells = density.cells() / head_cells;
  double head_volume = 1.0;
  double tail_volume = 1.0;
  for (Index k = 0; k < n; ++k) (k < m ? head_volume : tail_volume) *= density.spacing(k);

  Disintegration out;
  out.kind = DisintegrationKind::Slice;
  out.lower = density.lower();
  out.upper = density.upper();
  out.shape = density.shape();
  out.slice_dim = m;
  std::vector<Vector> axes;
  for (Index k = 0; k < m; ++k) {
    const Index s = density.shape()[static_cast<std::size_t>(k)];
    Vector axis(s);
    for (Index i = 0; i < s; ++i) axis(i) = density.lower()(k) + (static_cast<double>(i) + 0.5) * density.spacing(k);
    axes.push_back(axis);
  }
  const Matrix directions = Matrix::Identity(n, m);
  const double total = density.values().sum();
  // With the last axis fastest, a flat index is head * tail_cells + tail.
  for (Index tail = 0; tail < tail_cells; ++tail) {
    Needle needle;
    needle.directions = directions;
    needle.axes = axes;
    needle.cell_measure = head_volume;
    needle.density.resize(head_cells);
    for (Index head = 0; head < head_cells; ++head) needle.density(head) = density.values()(head * tail_cells + tail);
    const double slice_sum = needle.density.sum();
    Vector base = density.center(tail);  // head indices zero
    base.head(m).setZero();
    needle.base = base;
    if (slice_sum > 0.0) {
      needle.density /= slice_sum * head_volume;
    } else {
      needle.empty = true;
    }
    out.weights.push_back(slice_sum / total);
    out.needles.push_back(std::move(needle));
  }
  return out;
}

namespace detail {

inline Matrix ray_directions(Index n, Index count) {
  Matrix dirs(n, count);
  if (n == 2) {
    for (Index k = 0; k < count; ++k) {
      const double theta = 2.0 * std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
      dirs(0, k) = std::cos(theta);
      dirs(1, k) = std::sin(theta);
    }
  } else {
    // Fibonacci lattice on the sphere: equal-area cells of solid angle 4 pi / count.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (Index k = 0; k < count; ++k) {
      const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(k);
      dirs(0, k) = r * std::cos(phi);
      dirs(1, k) = r * std::sin(phi);
      dirs(2, k) = z;
    }
  }
  return dirs;
}

inline double exit_distance(const Vector& lower, const Vector& upper, const Vector& c, const Vector& dir) {
  double t = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < c.size(); ++k) {
    if (dir(k) > 0.0) t = std::min(t, (upper(k) - c(k)) / dir(k));
    if (dir(k) < 0.0) t = std::min(t, (lower(k) - c(k)) / dir(k));
  }
  return t;
}

}  // namespace detail

/// Leaves of u(x) = |x - center|: `rays` needles on a fixed fan of directions
/// (uniform angles in 2-D, a Fibonacci lattice in 3-D). Each needle samples
/// g(r) ~ r^{n-1} f(center + r dir) at midpoints of steps of `radial_step`
/// (default: a quarter of the smallest cell width) up to the box boundary.
inline Disintegration radial_disintegration(const GridDensity& density, const Vector& center, Index rays = 256,
                                            double radial_step = 0.0) {
  const Index n = density.dim();
  if (n != 2 && n != 3) fail(ErrorCode::WrongDimension, "radial disintegration supports n = 2 and n = 3");
  if (center.size() != n) fail(ErrorCode::DimensionMismatch, "centre has the wrong dimension");
  for (Index k = 0; k < n; ++k) {
    if (!(center(k) > density.lower()(k) && center(k) < density.upper()(k))) {
      fail(ErrorCode::CenterOutsideBox, "centre must lie inside the box");
    }
  }
  if (rays < 1) fail(ErrorCode::InvalidArgument, "need at least one ray");
  double step = radial_step;
  if (step <= 0.0) {
    step = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < n; ++k) step = std::min(step, density.spacing(k));
    step /= 4.0;
  }
  Disintegration out;
  out.kind = DisintegrationKind::Radial;
  out.lower = density.lower();
  out.upper = density.upper();
  out.shape = density.shape();
  out.center = center;
  out.angular_cell = (n == 2 ? 2.0 : 4.0) * std::numbers::pi / static_cast<double>(rays);
  const Matrix dirs = detail::ray_directions(n, rays);
  std::vector<double> raw(static_cast<std::size_t>(rays), 0.0);
  out.needles.resize(static_cast<std::size_t>(rays));
  parallel_for(static_cast<std::size_t>(rays), [&](std::size_t k) {
    const Vector dir = dirs.col(static_cast<Index>(k));
    const double reach = detail::exit_distance(density.lower(), density.upper(), center, dir);
    const Index count = std::max<Index>(1, static_cast<Index>(std::floor(reach / step)));
    const double dr = reach / static_cast<double>(count);
    Needle needle;
    needle.base = center;
    needle.directions = dir;
    needle.cell_measure = dr;
    Vector r(count);
    needle.density.resize(count);
    for (Index j = 0; j < count; ++j) {
      r(j) = (static_cast<double>(j) + 0.5) * dr;
      needle.density(j) = std::pow(r(j), static_cast<double>(n - 1)) * density.interpolate(center + r(j) * dir);
    }
    needle.axes = {r};
    const double mass = needle.density.sum() * dr;
    raw[k] = mass * out.angular_cell;
    if (mass > 0.0) {
      needle.density /= mass;
    } else {
      needle.empty = true;
    }
    out.needles[k] = std::move(needle);
  }, 4);
  double total = 0.0;
  for (double w : raw) total += w;
  for (double w : raw) out.weights.push_back(w / total);
  return out;
}

namespace detail {

// Needle density divided by r^{n-1} at radius r, linear in r between
// samples, constant below the first sample and zero past the end.
inline double radial_profile(const Needle& needle, double r, Index n) {
  const Vector& grid = needle.axes.front();
  const Index count = grid.size();
  const double dr = needle.cell_measure;
  if (r > grid(count - 1) + 0.5 * dr) return 0.0;
  auto q = [&](Index j) { return needle.density(j) / std::pow(grid(j), static_cast<double>(n - 1)); };
  if (r <= grid(0)) return q(0);
  if (r >= grid(count - 1)) return q(count - 1);
  const double s = (r - grid(0)) / dr;
  const Index j = std::min<Index>(static_cast<Index>(std::floor(s)), count - 2);
  const double a = s - static_cast<double>(j);
  return (1.0 - a) * q(j) + a * q(j + 1);
}

}  // namespace detail

/// Maps the mixture sum_k w_k needle_k back to the cell centres of
/// `target_grid` (whose values are ignored) as a probability density.
/// Slices are copied cell by cell; rays are interpolated linearly in angle in
/// 2-D and taken from the nearest ray in 3-D.
inline GridDensity reassemble(const Disintegration& dis, const GridDensity& target_grid) {
  if (target_grid.shape() != dis.shape || target_grid.lower() != dis.lower || target_grid.upper() != dis.upper) {
    fail(ErrorCode::GeometryMismatch, "target grid differs from the disintegrated grid");
  }
  if (dis.needles.size() != dis.weights.size() || dis.needles.empty()) {
    fail(ErrorCode::GeometryMismatch, "needles and weights do not match");
  }
  const Index n = target_grid.dim();
  Vector values = Vector::Zero(target_grid.cells());
  if (dis.kind == DisintegrationKind::Slice) {
    const Index m = dis.slice_dim;
    const Index tail_cells = static_cast<Index>(dis.needles.size());
    double tail_volume = 1.0;
    for (Index k = m; k < n; ++k) tail_volume *= target_grid.spacing(k);
    Index head_cells = 1;
    for (Index k = 0; k < m; ++k) head_cells *= target_grid.shape()[static_cast<std::size_t>(k)];
    if (head_cells * tail_cells != target_grid.cells()) fail(ErrorCode::GeometryMismatch, "slice count mismatch");
    for (Index tail = 0; tail < tail_cells; ++tail) {
      const Needle& needle = dis.needles[static_cast<std::size_t>(tail)];
      if (needle.size() != head_cells) fail(ErrorCode::GeometryMismatch, "needle resolution mismatch");
      const double w = dis.weights[static_cast<std::size_t>(tail)];
      for (Index head = 0; head < head_cells; ++head) values(head * tail_cells + tail) = w * needle.density(head) / tail_volume;
    }
  } else {
    const Index rays = static_cast<Index>(dis.needles.size());
    Matrix dirs(n, rays);
    for (Index k = 0; k < rays; ++k) dirs.col(k) = dis.needles[static_cast<std::size_t>(k)].directions.col(0);
    auto ray_value = [&](Index k, double r) {
      const Needle& needle = dis.needles[static_cast<std::size_t>(k)];
      if (needle.empty) return 0.0;
      return dis.weights[static_cast<std::size_t>(k)] * detail::radial_profile(needle, r, n) / dis.angular_cell;
    };
    parallel_for(static_cast<std::size_t>(target_grid.cells()), [&](std::size_t c) {
      const Vector rel = target_grid.center(static_cast<Index>(c)) - dis.center;
      const double r = rel.norm();
      double v = 0.0;
      if (n == 2) {
        double theta = std::atan2(rel(1), rel(0));
        if (theta < 0.0) theta += 2.0 * std::numbers::pi;
        const double s = theta / (2.0 * std::numbers::pi) * static_cast<double>(rays) - 0.5;
        const double fl = std::floor(s);
        const double a = s - fl;
        const Index k0 = ((static_cast<Index>(fl) % rays) + rays) % rays;
        const Index k1 = (k0 + 1) % rays;
        v = (1.0 - a) * ray_value(k0, r) + a * ray_value(k1, r);
      } else {
        Index best = 0;
        (dirs.transpose() * rel).maxCoeff(&best);
        v = ray_value(best, r);
      }
      values(static_cast<Index>(c)) = v;
    }, 256);
  }
  return {target_grid.lower(), target_grid.upper(), target_grid.shape(), std::move(values)};
}

/// L1 distance between two densities on the same grid after normalising each
/// to unit mass.
inline double l1_distance(const GridDensity& a, const GridDensity& b) {
  if (!a.same_geometry(b)) fail(ErrorCode::GeometryMismatch, "grids differ");
  const double ma = a.total_mass();
  const double mb = b.total_mass();
  return (a.values() / ma - b.values() / mb).cwiseAbs().sum() * a.cell_volume();
}

/// Sum_k w_k E_{needle_k}[f].
inline double mixture_expectation(const Disintegration& dis, const std::function<double(const Vector&)>& f) {
  double acc = 0.0;
  for (std::size_t k = 0; k < dis.needles.size(); ++k) {
    if (dis.weights[k] > 0.0 && !dis.needles[k].empty) acc += dis.weights[k] * dis.needles[k].expectation(f);
  }
  return acc;
}

/// E[f] under the normalised grid density (midpoint rule).
inline double grid_expectation(const GridDensity& density, const std::function<double(const Vector&)>& f) {
  double acc = 0.0;
  for (Index c = 0; c < density.cells(); ++c) {
    if (density.values()(c) != 0.0) acc += density.values()(c) * f(density.center(c));
  }
  return acc / density.values().sum();
}

struct CdReport {
  double kappa = 0.0;
  double N = 0.0;
  double worst_violation = 0.0;
  Index worst_index = -1;  // index into the needle grid
  double tol = 0.0;
  bool pass = false;
};

/// 1-D needle with uniform parameter spacing h and density g = exp(-rho).
/// Zero samples are trimmed at both ends; with central differences
///     rho' = -g'/g,   rho'' = (g'^2 - g g'') / g^2
/// the worst value of rho'' - rho'^2 / (N - 1) - kappa over interior samples
/// is reported (the rho'^2 term dropped for N = infinity; N = 1 allows only a
/// constant rho). Default tol is 10 h^2.
inline CdReport cd_check_1d(const Needle& needle, double kappa, double N, double tol = -1.0) {
  if (needle.dimension() != 1) fail(ErrorCode::WrongDimension, "CD check needs a one-dimensional needle");
  const Vector& t = needle.axes.front();
  const Vector& g = needle.density;
  if (!g.allFinite() || (g.array() < 0.0).any()) fail(ErrorCode::NonpositiveDensity, "density must be nonnegative");
  Index first = 0;
  Index last = g.size() - 1;
  while (first <= last && g(first) == 0.0) ++first;
  while (last >= first && g(last) == 0.0) --last;
  if (last - first + 1 < 5) fail(ErrorCode::TooFewPoints, "need at least 5 positive samples");
  for (Index i = first; i <= last; ++i) {
    if (g(i) == 0.0) fail(ErrorCode::NonpositiveDensity, "density vanishes inside the needle");
  }
  const double h = (t(last) - t(first)) / static_cast<double>(last - first);
  if (!(h > 0.0)) fail(ErrorCode::InvalidArgument, "parameter grid must increase");
  for (Index i = first + 1; i <= last; ++i) {
    if (std::abs(t(i) - t(i - 1) - h) > 1e-9 * h) fail(ErrorCode::InvalidArgument, "parameter grid must be uniform");
  }
  CdReport report;
  report.kappa = kappa;
  report.N = N;
  report.tol = tol >= 0.0 ? tol : 10.0 * h * h;
  report.worst_violation = std::numeric_limits<double>::infinity();
  const bool infinite = std::isinf(N) && N > 0.0;
  const bool constant_branch = N == 1.0;
  for (Index i = first + 1; i < last; ++i) {
    const double d1 = (g(i + 1) - g(i - 1)) / (2.0 * h);
    const double d2 = (g(i + 1) - 2.0 * g(i) + g(i - 1)) / (h * h);
    const double rho1 = -d1 / g(i);
    const double rho2 = (d1 * d1 - g(i) * d2) / (g(i) * g(i));
    double value = 0.0;
    if (constant_branch) {
      value = std::abs(rho1) <= report.tol ? rho2 - kappa : -std::numeric_limits<double>::infinity();
    } else if (infinite) {
      value = rho2 - kappa;
    } else {
      value = rho2 - rho1 * rho1 / (N - 1.0) - kappa;
    }
    if (value < report.worst_violation) {
      report.worst_violation = value;
      report.worst_index = i;
    }
  }
  report.pass = report.worst_violation >= -report.tol;
  return report;
}

/// Needle on a uniform grid of `count` points in [a, b] with density g(t),
/// normalised to unit mass.
inline Needle make_needle(double a, double b, Index count, const std::function<double(double)>& g) {
  if (count < 2 || !(b > a)) fail(ErrorCode::InvalidArgument, "needle needs an interval and at least 2 points");
  Needle needle;
  needle.base = Vector::Zero(1);
  needle.directions = Matrix::Identity(1, 1);
  Vector t = Vector::LinSpaced(count, a, b);
  needle.cell_measure = (b - a) / static_cast<double>(count - 1);
  needle.density.resize(count);
  for (Index i = 0; i < count; ++i) needle.density(i) = g(t(i));
  needle.axes = {t};
  const double mass = needle.density.sum() * needle.cell_measure;
  if (mass > 0.0) {
    needle.density /= mass;
  } else {
    needle.empty = true;
  }
  return needle;
}

}  // namespace vecot
