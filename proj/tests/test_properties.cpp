#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "vecot/certifier.hpp"
#include "vecot/disintegration.hpp"
#include "vecot/mass_balance.hpp"
#include "vecot/selftest.hpp"
#include "vecot/solver.hpp"

using namespace vecot;

// Hand-rolled generators: random clouds from selftest::random_instance,
// random grids below.

namespace {

GridDensity random_grid(std::mt19937_64& rng, Index n) {
  std::uniform_int_distribution<Index> res(3, 7);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  std::vector<Index> shape;
  Index cells = 1;
  for (Index k = 0; k < n; ++k) {
    shape.push_back(res(rng));
    cells *= shape.back();
  }
  Vector values(cells);
  for (Index c = 0; c < cells; ++c) values(c) = unif(rng);
  Vector lo(n), hi(n);
  for (Index k = 0; k < n; ++k) {
    lo(k) = -unif(rng);
    hi(k) = unif(rng);
  }
  return {lo, hi, shape, values};
}

}  // namespace

TEST(Property, WeakDualityForAnyFeasiblePair) {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 30; ++t) {
    const Index n = 1 + static_cast<Index>(rng() % 3);
    const Index m = 1 + static_cast<Index>(rng() % 3);
    const Instance inst = selftest::random_instance(rng, n, m, 3 + static_cast<Index>(rng() % 8));
    // Feasible coupling: everything routed through point 0.
    std::vector<CouplingEdge> star;
    for (Index i = 1; i < inst.size(); ++i) star.push_back({0, i, -inst.measure().weights().row(i).transpose()});
    const VectorCoupling pi(inst.cloud(), m, star);
    // 1-Lipschitz potential: a contraction of the points.
    std::normal_distribution<double> g;
    Matrix a(m, n);
    for (Index r = 0; r < m; ++r)
      for (Index c = 0; c < n; ++c) a(r, c) = g(rng);
    a /= std::max(1.0, a.operatorNorm());
    const RowMatrix u = inst.cloud()->points() * a.transpose();
    const PotentialField field(inst.cloud(), u);
    ASSERT_LE(lipschitz_constant(field).value, 1.0 + 1e-12);
    EXPECT_LE(pairing(field, inst.measure()), cost(pi) + 1e-9);
    EXPECT_LE(kr_norm(inst), cost(pi) + 1e-6 * cost(pi));
  }
}

TEST(Property, TriangleInequalityAndHomogeneity) {
  std::mt19937_64 rng(103);
  for (int t = 0; t < 10; ++t) {
    const Instance a = selftest::random_instance(rng, 2, 2, 6);
    RowMatrix wb = selftest::random_instance(rng, 2, 2, 6).measure().weights();
    const Instance b = build_instance(a.cloud()->points(), wb);
    const Instance sum = build_instance(a.cloud()->points(), RowMatrix(a.measure().weights() + wb));
    const double na = kr_norm(a);
    const double nb = kr_norm(b);
    EXPECT_LE(kr_norm(sum), na + nb + 1e-6 * (na + nb));
    const Instance scaled = build_instance(a.cloud()->points(), RowMatrix(-2.5 * a.measure().weights()));
    EXPECT_NEAR(kr_norm(scaled), 2.5 * na, 1e-6 * na);
  }
}

TEST(Property, PermutationInvariance) {
  std::mt19937_64 rng(107);
  for (int t = 0; t < 5; ++t) {
    const Instance inst = selftest::random_instance(rng, 2, 2, 9);
    std::vector<Index> perm(static_cast<std::size_t>(inst.size()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    RowMatrix p(inst.size(), 2), w(inst.size(), 2);
    for (Index i = 0; i < inst.size(); ++i) {
      p.row(i) = inst.cloud()->point(perm[static_cast<std::size_t>(i)]).transpose();
      w.row(i) = inst.measure().weights().row(perm[static_cast<std::size_t>(i)]);
    }
    const double base = kr_norm(inst);
    EXPECT_NEAR(kr_norm(build_instance(p, w)), base, 1e-6 * base);
  }
}

TEST(Property, ScalarSolverMatchesLineOracle) {
  std::mt19937_64 rng(109);
  for (int t = 0; t < 30; ++t) {
    const Instance inst = selftest::random_instance(rng, 1, 1, 2 + static_cast<Index>(rng() % 20));
    const double oracle = line_oracle(inst);
    const SolveResult r = solve(inst);
    EXPECT_NEAR(r.report.primal_value, oracle, 1e-6 * (1.0 + oracle));
    EXPECT_EQ(certify(r.coupling, r.potential, inst).verdict, Verdict::Optimal);
  }
}

TEST(Property, SliceMixtureReproducesGridMoments) {
  std::mt19937_64 rng(113);
  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + static_cast<Index>(rng() % 2);
    const GridDensity g = random_grid(rng, n);
    const Index m = 1 + static_cast<Index>(rng() % static_cast<unsigned long>(n - 1));
    const Disintegration dis = slice_disintegration(g, m);
    double total = 0.0;
    for (double w : dis.weights) total += w;
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (Index k = 0; k < n; ++k) {
      const auto f = [k](const Vector& x) { return x(k) + x(k) * x(k); };
      EXPECT_NEAR(mixture_expectation(dis, f), grid_expectation(g, f), 1e-12);
    }
    EXPECT_LT(l1_distance(reassemble(dis, g), g), 1e-12);
  }
}

TEST(Property, CdCheckIsScaleInvariantInDensity) {
  std::mt19937_64 rng(127);
  std::uniform_real_distribution<double> unif(0.1, 10.0);
  std::uniform_real_distribution<double> curvature(0.1, 3.0);
  for (int t = 0; t < 20; ++t) {
    const double a = curvature(rng);
    const Needle needle = make_needle(-1.0, 1.0, 81, [a](double s) { return std::exp(-a * s * s); });
    Needle scaled = needle;
    scaled.density *= unif(rng);
    const CdReport r1 = cd_check_1d(needle, 2.0 * a - 0.1, std::numeric_limits<double>::infinity());
    const CdReport r2 = cd_check_1d(scaled, 2.0 * a - 0.1, std::numeric_limits<double>::infinity());
    EXPECT_TRUE(r1.pass);
    EXPECT_EQ(r1.pass, r2.pass);
    EXPECT_NEAR(r1.worst_violation, r2.worst_violation, 1e-8);
  }
}

TEST(Property, SmoothedCounterexampleConvergesToAtomicNorm) {
  const auto spec = CounterexampleSpec::simplex(2, 2);
  const double atomic = analytic_optimum(spec).value;
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {0.2, 0.1, 0.05}) {
    const double dev = std::abs(kr_norm(smoothed_instance(spec, eps, 3)) - atomic);
    EXPECT_LE(dev, previous + 1e-9);
    previous = dev;
  }
}
