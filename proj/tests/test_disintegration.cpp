#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "vecot/disintegration.hpp"

using namespace vecot;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::InvalidArgument;
}

GridDensity square(Index res, const std::function<double(const Vector&)>& f, double half = 1.0) {
  return GridDensity::sample(Vector::Constant(2, -half), Vector::Constant(2, half), {res, res}, f);
}

}  // namespace

TEST(Grid, RowMajorLayout) {
  Vector v(6);
  v << 1, 2, 3, 4, 5, 6;
  const GridDensity g(Vector::Zero(2), Vector::Ones(2), {2, 3}, v);
  EXPECT_EQ(g.ravel({1, 2}), 5);
  EXPECT_EQ(g.unravel(4), (std::vector<Index>{1, 1}));
  EXPECT_NEAR(g.center(5)(0), 0.75, 1e-15);
  EXPECT_NEAR(g.center(5)(1), 5.0 / 6.0, 1e-15);
}

TEST(Grid, ValidationErrors) {
  EXPECT_EQ(code_of([] { GridDensity(Vector::Zero(1), Vector::Ones(1), {3}, Vector::Constant(3, -1.0)); }),
            ErrorCode::NonpositiveDensity);
  EXPECT_EQ(code_of([] { GridDensity(Vector::Zero(1), Vector::Ones(1), {3}, Vector::Zero(3)); }),
            ErrorCode::NonpositiveDensity);
  EXPECT_EQ(code_of([] { GridDensity(Vector::Zero(1), Vector::Ones(1), {3}, Vector::Ones(2)); }),
            ErrorCode::DimensionMismatch);
}

TEST(Slice, ProductDensityGivesIdenticalNeedles) {
  const GridDensity g = square(20, [](const Vector& x) { return std::exp(-x(0) * x(0)) * (2.0 + x(1)); });
  const Disintegration dis = slice_disintegration(g, 1);
  ASSERT_EQ(dis.needles.size(), 20u);
  double total = 0.0;
  for (double w : dis.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-14);
  for (const auto& needle : dis.needles) {
    EXPECT_TRUE(needle.density.isApprox(dis.needles[0].density, 1e-12));
    EXPECT_NEAR(needle.density.sum() * needle.cell_measure, 1.0, 1e-12);
  }
  // Weights follow the marginal of the second coordinate.
  EXPECT_GT(dis.weights.back(), dis.weights.front());
}

TEST(Slice, ReassemblyIsExact) {
  Vector lo(3), hi(3);
  lo << 0, -1, 2;
  hi << 1, 1, 3;
  const GridDensity g = GridDensity::sample(lo, hi, {6, 5, 4}, [](const Vector& x) {
    return 1.0 + x(0) * x(1) * x(1) + std::sin(3.0 * x(2));
  });
  for (Index m : {1, 2}) {
    const Disintegration dis = slice_disintegration(g, m);
    EXPECT_LT(l1_distance(reassemble(dis, g), g), 1e-12) << "m=" << m;
  }
}

TEST(Slice, EmptySliceGetsZeroWeight) {
  const GridDensity g = square(8, [](const Vector& x) { return x(1) > 0.5 ? 0.0 : 1.0; });
  const Disintegration dis = slice_disintegration(g, 1);
  EXPECT_TRUE(dis.needles.back().empty);
  EXPECT_EQ(dis.weights.back(), 0.0);
  EXPECT_LT(l1_distance(reassemble(dis, g), g), 1e-12);
}

TEST(Slice, InvalidDimension) {
  const GridDensity g = square(4, [](const Vector&) { return 1.0; });
  EXPECT_EQ(code_of([&] { slice_disintegration(g, 2); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { slice_disintegration(g, 0); }), ErrorCode::InvalidArgument);
}

TEST(Slice, MixtureMatchesGridMoments) {
  // Independent oracle: direct cell sums.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector values(4 * 5 * 6);
  for (Index i = 0; i < values.size(); ++i) values(i) = unif(rng);
  const GridDensity g(Vector::Zero(3), Vector::Ones(3), {4, 5, 6}, values);
  const Disintegration dis = slice_disintegration(g, 2);
  for (const auto& f : std::vector<std::function<double(const Vector&)>>{
           [](const Vector& x) { return x(0); }, [](const Vector& x) { return x(1) * x(2); },
           [](const Vector& x) { return x.squaredNorm(); }}) {
    double oracle = 0.0;
    for (Index c = 0; c < g.cells(); ++c) oracle += values(c) * f(g.center(c));
    oracle /= values.sum();
    EXPECT_NEAR(mixture_expectation(dis, f), oracle, 1e-12);
  }
}

TEST(Radial, UniformDiscGivesLinearProfile) {
  const GridDensity g = square(101, [](const Vector& x) { return x.norm() <= 1.0 ? 1.0 : 0.0; }, 1.0);
  const Disintegration dis = radial_disintegration(g, Vector::Zero(2), 16);
  ASSERT_EQ(dis.needles.size(), 16u);
  for (const auto& needle : dis.needles) {
    EXPECT_NEAR(dis.weights[0], 1.0 / 16.0, 1e-2);
    // density proportional to r on [0, 1]: mean radius 2/3.
    const double mean = needle.expectation([&](const Vector& x) { return x.norm(); });
    EXPECT_NEAR(mean, 2.0 / 3.0, 2e-2);
  }
}

TEST(Radial, GaussianProfile) {
  const GridDensity g = square(121, [](const Vector& x) { return std::exp(-0.5 * x.squaredNorm()); }, 5.0);
  const Disintegration dis = radial_disintegration(g, Vector::Zero(2), 32);
  // Density proportional to r exp(-r^2/2) on rays: mean radius sqrt(pi/2).
  const double mean = dis.needles[5].expectation([](const Vector& x) { return x.norm(); });
  EXPECT_NEAR(mean, std::sqrt(M_PI / 2.0), 2e-2);
  EXPECT_NEAR(mixture_expectation(dis, [](const Vector& x) { return x.squaredNorm(); }), 2.0, 3e-2);
}

TEST(Radial, SingleNeedleReassembly) {
  const GridDensity g = square(33, [](const Vector& x) { return 1.0 + 0.3 * x(0); });
  const Disintegration coarse = radial_disintegration(g, Vector::Zero(2), 32);
  const Disintegration fine = radial_disintegration(g, Vector::Zero(2), 128);
  const double e_coarse = l1_distance(reassemble(coarse, g), g);
  const double e_fine = l1_distance(reassemble(fine, g), g);
  EXPECT_LT(e_fine, e_coarse);
  EXPECT_LT(e_fine, 0.05);
}

TEST(Radial, ThreeDimensionalMass) {
  const GridDensity g = GridDensity::sample(Vector::Constant(3, -1.0), Vector::Constant(3, 1.0), {17, 17, 17},
                                            [](const Vector& x) { return 1.0 + x(2) * x(2); });
  const Disintegration dis = radial_disintegration(g, Vector::Zero(3), 64);
  double total = 0.0;
  for (double w : dis.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(mixture_expectation(dis, [](const Vector& x) { return x(2) * x(2); }),
              grid_expectation(g, [](const Vector& x) { return x(2) * x(2); }), 0.05);
}

TEST(Radial, Errors) {
  const GridDensity g = square(8, [](const Vector&) { return 1.0; });
  Vector outside(2);
  outside << 2.0, 0.0;
  EXPECT_EQ(code_of([&] { radial_disintegration(g, outside); }), ErrorCode::CenterOutsideBox);
  const GridDensity line(Vector::Zero(1), Vector::Ones(1), {5}, Vector::Ones(5));
  EXPECT_EQ(code_of([&] { radial_disintegration(line, Vector::Constant(1, 0.5)); }), ErrorCode::WrongDimension);
  const GridDensity other = square(9, [](const Vector&) { return 1.0; });
  const Disintegration dis = radial_disintegration(g, Vector::Zero(2), 8);
  EXPECT_EQ(code_of([&] { reassemble(dis, other); }), ErrorCode::GeometryMismatch);
}

TEST(Cd, GaussianIsCdOneInfinity) {
  const Needle needle = make_needle(-3.0, 3.0, 301, [](double t) { return std::exp(-0.5 * t * t); });
  const CdReport ok = cd_check_1d(needle, 1.0, kInf, 1e-3);
  EXPECT_TRUE(ok.pass);
  EXPECT_NEAR(ok.worst_violation, 0.0, 1e-3);
  EXPECT_FALSE(cd_check_1d(needle, 1.01, kInf, 1e-3).pass);
}

TEST(Cd, PowerDensities) {
  // t^2 on (0, 1]: rho = -2 log t, rho'' = 2/t^2, rho'^2 = 4/t^2, so CD(0, N) iff N >= 3.
  const Needle needle = make_needle(0.1, 1.0, 901, [](double t) { return t * t; });
  EXPECT_TRUE(cd_check_1d(needle, 0.0, 3.0).pass);
  EXPECT_FALSE(cd_check_1d(needle, 0.0, 2.5).pass);
}

TEST(Cd, ConstantBranchAndNormalizationInvariance) {
  const Needle flat = make_needle(0.0, 1.0, 50, [](double) { return 1.0; });
  EXPECT_TRUE(cd_check_1d(flat, 0.0, 1.0).pass);
  const Needle ramp = make_needle(0.0, 1.0, 50, [](double t) { return 1.0 + t; });
  EXPECT_FALSE(cd_check_1d(ramp, 0.0, 1.0).pass);
  Needle scaled = ramp;
  scaled.density *= 7.5;
  const CdReport a = cd_check_1d(ramp, 0.0, 4.0);
  const CdReport b = cd_check_1d(scaled, 0.0, 4.0);
  EXPECT_NEAR(a.worst_violation, b.worst_violation, 1e-9);
  EXPECT_EQ(a.pass, b.pass);
}

TEST(Cd, Errors) {
  const Needle tiny = make_needle(0.0, 1.0, 4, [](double) { return 1.0; });
  EXPECT_EQ(code_of([&] { cd_check_1d(tiny, 0.0, kInf); }), ErrorCode::TooFewPoints);
  const Needle hole = make_needle(0.0, 1.0, 20, [](double t) { return std::abs(t - 0.5) < 0.05 ? 0.0 : 1.0; });
  EXPECT_EQ(code_of([&] { cd_check_1d(hole, 0.0, kInf); }), ErrorCode::NonpositiveDensity);
  const GridDensity g = square(6, [](const Vector&) { return 1.0; });
  Vector lo(3), hi(3);
  lo.setZero();
  hi.setOnes();
  const GridDensity cube(lo, hi, {3, 3, 3}, Vector::Ones(27));
  EXPECT_EQ(code_of([&] { cd_check_1d(slice_disintegration(cube, 2).needles[0], 0.0, kInf); }),
            ErrorCode::WrongDimension);
  (void)g;
}

TEST(Cd, LogConcaveSlicesPass) {
  const GridDensity g = square(81, [](const Vector& x) {
    return std::exp(-x(0) * x(0) - 0.5 * x(0) * x(1) - x(1) * x(1) * x(1) * x(1));
  }, 2.0);
  const Disintegration dis = slice_disintegration(g, 1);
  for (const auto& needle : dis.needles) EXPECT_TRUE(cd_check_1d(needle, 0.0, kInf).pass);
}

TEST(Cd, LebesgueRaysInThreeDimensions) {
  // Uniform ball in R^3: rays carry r^2, which is CD(0, 3) but not CD(0, 2.5).
  const GridDensity g = GridDensity::sample(Vector::Constant(3, -1.0), Vector::Constant(3, 1.0), {41, 41, 41},
                                            [](const Vector&) { return 1.0; });
  const Disintegration dis = radial_disintegration(g, Vector::Zero(3), 8);
  const Needle& needle = dis.needles[0];
  EXPECT_TRUE(cd_check_1d(needle, 0.0, 3.0, 1e-6).pass);
  EXPECT_FALSE(cd_check_1d(needle, 0.0, 2.5, 1e-6).pass);
}
