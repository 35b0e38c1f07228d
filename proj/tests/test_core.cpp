#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vecot/core.hpp"

using namespace vecot;

namespace {

RowMatrix rows(std::initializer_list<std::initializer_list<double>> data) {
  RowMatrix out(static_cast<Index>(data.size()), static_cast<Index>(data.begin()->size()));
  Index i = 0;
  for (const auto& r : data) {
    Index k = 0;
    for (double v : r) out(i, k++) = v;
    ++i;
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(PointCloud, RejectsDuplicates) {
  EXPECT_EQ(code_of([] { PointCloud c(rows({{0, 0}, {1, 1}, {0, 0}})); }), ErrorCode::DuplicatePoint);
}

TEST(PointCloud, RejectsEmptyAndNonFinite) {
  EXPECT_EQ(code_of([] { PointCloud c(RowMatrix(0, 2)); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { PointCloud c(rows({{0, NAN}})); }), ErrorCode::InvalidArgument);
}

TEST(PointCloud, Distance) {
  PointCloud c(rows({{0, 0}, {3, 4}}));
  EXPECT_DOUBLE_EQ(c.distance(0, 1), 5.0);
  EXPECT_EQ(c.ambient_dim(), 2);
}

TEST(Measure, TotalVariationAndMass) {
  auto cloud = make_cloud(rows({{0}, {1}, {2}}));
  DiscreteVectorMeasure mu(cloud, rows({{3, 4}, {0, -1}, {-3, -3}}));
  EXPECT_DOUBLE_EQ(mu.total_variation(), 5.0 + 1.0 + std::sqrt(18.0));
  EXPECT_TRUE(mu.total_mass().isZero());
  EXPECT_DOUBLE_EQ(mu.scaled(-2).total_variation(), 2.0 * mu.total_variation());
}

TEST(Measure, WeightCountMismatch) {
  auto cloud = make_cloud(rows({{0}, {1}}));
  EXPECT_EQ(code_of([&] { DiscreteVectorMeasure mu(cloud, rows({{1}})); }), ErrorCode::DimensionMismatch);
}

TEST(Instance, RejectsNonzeroMassWithResidual) {
  try {
    build_instance(rows({{0}, {1}}), rows({{1, 0}, {0, 0}}));
    FAIL();
  } catch (const NonzeroTotalMassError& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonzeroTotalMass);
    ASSERT_EQ(e.residual().size(), 2u);
    EXPECT_DOUBLE_EQ(e.residual()[0], 1.0);
  }
}

TEST(Instance, DistanceMatrixIsSymmetric) {
  Instance inst = build_instance(rows({{0, 0}, {1, 0}, {0, 2}}), rows({{1}, {1}, {-2}}));
  const Matrix& d = inst.distances();
  EXPECT_TRUE(d.isApprox(d.transpose()));
  EXPECT_DOUBLE_EQ(d(1, 2), std::sqrt(5.0));
  EXPECT_DOUBLE_EQ(d(0, 0), 0.0);
}

TEST(Coupling, MergesRepeatedPairsKeepingFirstOrientation) {
  auto cloud = make_cloud(rows({{0}, {1}, {2}}));
  Vector a(1), b(1);
  a << 2.0;
  b << 0.5;
  VectorCoupling pi(cloud, 1, {{0, 1, a}, {1, 0, b}});
  ASSERT_EQ(pi.edges().size(), 1u);
  EXPECT_EQ(pi.edges()[0].i, 0);
  EXPECT_DOUBLE_EQ(pi.edges()[0].flow(0), 1.5);
}

TEST(Coupling, NetMarginalsCostAndVariation) {
  auto cloud = make_cloud(rows({{0, 0}, {3, 4}, {0, 1}}));
  Vector f(2), g(2);
  f << 1, 0;
  g << 0, 2;
  VectorCoupling pi(cloud, 2, {{0, 1, f}, {2, 0, g}});
  const RowMatrix net = pi.net();
  EXPECT_TRUE(net.row(0).isApprox(Eigen::RowVector2d(1, -2)));
  EXPECT_TRUE(net.row(1).isApprox(Eigen::RowVector2d(-1, 0)));
  EXPECT_TRUE(net.row(2).isApprox(Eigen::RowVector2d(0, 2)));
  EXPECT_DOUBLE_EQ(cost(pi), 5.0 * 1.0 + 1.0 * 2.0);
  EXPECT_DOUBLE_EQ(total_variation(pi), 3.0);
  const Marginals mg = marginals(pi);
  EXPECT_TRUE((mg.first.weights() - mg.second.weights()).isApprox(net));
}

TEST(Coupling, RejectsSelfLoopsAndBadIndices) {
  auto cloud = make_cloud(rows({{0}, {1}}));
  Vector f = Vector::Ones(1);
  EXPECT_EQ(code_of([&] { VectorCoupling pi(cloud, 1, {{0, 0, f}}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { VectorCoupling pi(cloud, 1, {{0, 5, f}}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { VectorCoupling pi(cloud, 2, {{0, 1, f}}); }), ErrorCode::DimensionMismatch);
}

TEST(Lipschitz, ExactMaximumAndTieBreak) {
  auto cloud = make_cloud(rows({{0}, {1}, {3}}));
  PotentialField u(cloud, rows({{0}, {2}, {4}}));
  const LipschitzResult r = lipschitz_constant(u);
  EXPECT_DOUBLE_EQ(r.value, 2.0);
  EXPECT_EQ(r.i, 0);
  EXPECT_EQ(r.j, 1);
  PotentialField single(make_cloud(rows({{0}})), rows({{1}}));
  EXPECT_TRUE(lipschitz_constant(single).single_point);
}

TEST(Lipschitz, MatchesBruteForceOnRandomFields) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    RowMatrix p(30, 3), v(30, 2);
    for (Index i = 0; i < 30; ++i) {
      for (Index k = 0; k < 3; ++k) p(i, k) = g(rng);
      for (Index k = 0; k < 2; ++k) v(i, k) = g(rng);
    }
    auto cloud = make_cloud(p);
    double brute = 0.0;
    for (Index i = 0; i < 30; ++i) {
      for (Index j = 0; j < 30; ++j) {
        if (i != j) brute = std::max(brute, (v.row(i) - v.row(j)).norm() / (p.row(i) - p.row(j)).norm());
      }
    }
    EXPECT_DOUBLE_EQ(lipschitz_constant(PotentialField(cloud, v)).value, brute);
  }
}

TEST(Potential, NormalizedAndPairing) {
  auto cloud = make_cloud(rows({{0}, {1}}));
  PotentialField u(cloud, rows({{1, 1}, {3, 0}}));
  EXPECT_TRUE(u.normalized().values().row(0).isZero());
  DiscreteVectorMeasure mu(cloud, rows({{1, 0}, {-1, 0}}));
  EXPECT_DOUBLE_EQ(pairing(u, mu), 1.0 - 3.0);
  EXPECT_DOUBLE_EQ(pairing(u.normalized(), mu), pairing(u, mu));
}
