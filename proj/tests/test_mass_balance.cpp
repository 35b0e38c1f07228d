#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vecot/certifier.hpp"
#include "vecot/mass_balance.hpp"
#include "vecot/selftest.hpp"
#include "vecot/solver.hpp"

using namespace vecot;

namespace {

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

TEST(Spec, PlanarMargin) {
  // <v1/|v1|, v2/|v2|> = 1/sqrt 5 and <e1, e2> = 0.
  EXPECT_NEAR(check_counterexample_spec(CounterexampleSpec::planar()), 1.0 / std::sqrt(5.0), 1e-15);
}

TEST(Spec, ValidationErrors) {
  auto spec = CounterexampleSpec::planar();
  spec.vectors(2, 0) += 1.0;
  EXPECT_EQ(code_of([&] { check_counterexample_spec(spec); }), ErrorCode::InvalidSpec);
  spec = CounterexampleSpec::planar();
  spec.vectors.row(0).setZero();
  spec.vectors.row(2) << -1, -2;
  EXPECT_EQ(code_of([&] { check_counterexample_spec(spec); }), ErrorCode::ZeroVector);
  spec = CounterexampleSpec::planar();
  spec.anchors.row(1) = spec.anchors.row(0);
  EXPECT_EQ(code_of([&] { check_counterexample_spec(spec); }), ErrorCode::DuplicatePoint);
  spec = CounterexampleSpec::planar();
  spec.vectors << 1, 0, 2, 0, -3, 0;  // v2 = 2 v1
  EXPECT_EQ(code_of([&] { check_counterexample_spec(spec); }), ErrorCode::RankDeficiency);
  EXPECT_EQ(code_of([] { CounterexampleSpec::simplex(1, 2); }), ErrorCode::InvalidSpec);
}

TEST(Analytic, ValueMatchesClosedFormAndSolver) {
  for (const auto& spec : {CounterexampleSpec::planar(), CounterexampleSpec::simplex(2, 2, 0.2),
                           CounterexampleSpec::simplex(3, 3, 0.4), CounterexampleSpec::simplex(3, 1)}) {
    const AnalyticOptimum opt = analytic_optimum(spec);
    double closed = 0.0;
    const Index last = spec.anchors.rows() - 1;
    for (Index i = 0; i < last; ++i) closed += spec.vectors.row(i).norm() * (spec.anchors.row(i) - spec.anchors.row(last)).norm();
    EXPECT_NEAR(opt.value, closed, 1e-12);
    EXPECT_NEAR(kr_norm(opt.instance), closed, 1e-6 * closed);
    // Isometric on (x_i, x_{m+1}), strictly contracting on (x_i, x_j).
    const auto& u = opt.potential.values();
    const Index m = spec.m();
    for (Index i = 0; i < m; ++i) {
      EXPECT_NEAR((u.row(i) - u.row(m)).norm(), opt.instance.distances()(i, m), 1e-12);
      for (Index j = i + 1; j < m; ++j) EXPECT_LT((u.row(i) - u.row(j)).norm(), opt.instance.distances()(i, j));
    }
  }
}

TEST(MassBalance, PlanarCounterexampleFails) {
  const AnalyticOptimum opt = analytic_optimum(CounterexampleSpec::planar());
  const auto dec = extract_leaves(opt.potential);
  const auto report = mass_balance_report(opt.instance, dec);
  EXPECT_EQ(report.verdict, BalanceVerdict::BalanceFails);
  ASSERT_TRUE(report.witness.has_value());
  const auto& witness = report.sets[static_cast<std::size_t>(*report.witness)];
  EXPECT_EQ(witness.members, (std::vector<Index>{0, 2}));
  EXPECT_NEAR(witness.mass(0), -1.0, 1e-15);
  EXPECT_NEAR(witness.mass(1), -2.0, 1e-15);
}

TEST(MassBalance, FailsOnEveryValidSimplexSpec) {
  for (Index m = 2; m <= 3; ++m) {
    for (Index n = m; n <= 3; ++n) {
      const auto spec = CounterexampleSpec::simplex(n, m, 0.3);
      const AnalyticOptimum opt = analytic_optimum(spec);
      const auto report = mass_balance_report(opt.instance, extract_leaves(opt.potential));
      EXPECT_EQ(report.verdict, BalanceVerdict::BalanceFails) << "n=" << n << " m=" << m;
    }
  }
}

TEST(MassBalance, SingleTargetDimensionSpecBalances) {
  // With m = 1 there is no pair i != j <= m: the two anchors form one
  // transport set carrying v1 + v2 = 0.
  for (Index n = 1; n <= 3; ++n) {
    const AnalyticOptimum opt = analytic_optimum(CounterexampleSpec::simplex(n, 1));
    EXPECT_NEAR(opt.value, 1.5, 1e-15);
    const auto report = mass_balance_report(opt.instance, extract_leaves(opt.potential));
    EXPECT_EQ(report.verdict, BalanceVerdict::BalanceHolds);
  }
}

TEST(MassBalance, ScalarHoldsWhenCumulativeMassKeepsItsSign) {
  // On the line with all cumulative sums of one sign, every transport set
  // is a chain ending where the mass is absorbed, so it balances.
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  for (int t = 0; t < 10; ++t) {
    const Index count = 3 + static_cast<Index>(rng() % 6);
    RowMatrix p(count, 1), w(count, 1);
    for (Index i = 0; i < count; ++i) {
      p(i, 0) = static_cast<double>(i) + 0.5 * unif(rng);
      w(i, 0) = i + 1 < count ? unif(rng) : 0.0;
    }
    w(count - 1, 0) = -w.col(0).head(count - 1).sum();
    const Instance inst = build_instance(p, w);
    const SolveResult r = solve(inst);
    ASSERT_EQ(r.report.status, SolveStatus::Converged);
    const auto report = mass_balance_report(inst, extract_leaves(r.potential));
    EXPECT_EQ(report.verdict, BalanceVerdict::BalanceHolds);
  }
}

TEST(MassBalance, ScalarBranchAtomBreaksDiscreteBalance) {
  // Points 0, 1, 2 with masses +1, -2, +1: the optimal u is a tent with two
  // leaves meeting at the middle atom, so each transport set carries mass.
  RowMatrix p(3, 1), w(3, 1);
  p << 0, 1, 2;
  w << 1, -2, 1;
  const Instance inst = build_instance(p, w);
  const SolveResult r = solve(inst);
  const auto report = mass_balance_report(inst, extract_leaves(r.potential));
  EXPECT_EQ(report.verdict, BalanceVerdict::BalanceFails);
}

TEST(Surrogate, SupportInclusion) {
  RowMatrix p(3, 2), w(3, 1);
  p << 0, 0, 1, 0, 2, 0;
  w << 1, 0, -1;
  const Instance inst = build_instance(p, w);
  Vector f(1);
  f << 1.0;
  // Direct transport: supports coincide.
  EXPECT_TRUE(marginal_abs_continuity_surrogate(VectorCoupling(inst.cloud(), 1, {{0, 2, f}}), inst.measure()));
  // Through the zero-weight middle point.
  EXPECT_FALSE(marginal_abs_continuity_surrogate(VectorCoupling(inst.cloud(), 1, {{0, 1, f}, {1, 2, f}}), inst.measure()));
  const AnalyticOptimum opt = analytic_optimum(CounterexampleSpec::planar());
  EXPECT_TRUE(marginal_abs_continuity_surrogate(opt.coupling, opt.instance.measure()));
}

TEST(Smoothed, SinglePointPerBallRecoversAtoms) {
  const auto spec = CounterexampleSpec::planar();
  const Instance atomic = counterexample_instance(spec);
  const Instance smooth = smoothed_instance(spec, 0.1, 1);
  EXPECT_EQ(smooth.cloud()->points(), atomic.cloud()->points());
  EXPECT_EQ(smooth.measure().weights(), atomic.measure().weights());
}

TEST(Smoothed, ZeroMassAndBallGeometry) {
  const auto spec = CounterexampleSpec::simplex(3, 2);
  const Instance smooth = smoothed_instance(spec, 0.2, 7);
  EXPECT_EQ(smooth.size(), 21);
  EXPECT_LE(smooth.measure().total_mass().norm(), 1e-15);
  for (Index b = 0; b < 3; ++b) {
    for (Index k = 0; k < 7; ++k) {
      EXPECT_LE((smooth.cloud()->point(b * 7 + k) - spec.anchors.row(b)).norm(), 0.2 + 1e-15);
    }
  }
}

TEST(Smoothed, Errors) {
  const auto spec = CounterexampleSpec::planar();
  EXPECT_EQ(code_of([&] { smoothed_instance(spec, 0.5, 4); }), ErrorCode::BallOverlap);
  EXPECT_EQ(code_of([&] { smoothed_instance(spec, 0.0, 4); }), ErrorCode::InvalidArgument);
}

TEST(Smoothed, NormApproachesAtomicValue) {
  const auto spec = CounterexampleSpec::planar();
  const double atomic = 1.0 + std::sqrt(5.0);
  double mass = 0.0;
  for (Index i = 0; i < 3; ++i) mass += spec.vectors.row(i).norm();
  std::vector<double> dev;
  for (double eps : {0.2, 0.1, 0.05}) {
    const double value = kr_norm(smoothed_instance(spec, eps, 4));
    dev.push_back(std::abs(value - atomic));
    // Moving each sample by at most eps changes the norm by at most eps * sum |v_i|.
    EXPECT_LE(dev.back(), eps * mass + 1e-6);
  }
  EXPECT_LT(dev[2], dev[1]);
  EXPECT_LT(dev[1], dev[0]);
}
