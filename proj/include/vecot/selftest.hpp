#pragma once

// Acceptance suite. Each criterion returns a pass flag, its wall time and a
// one-line detail string; run_acceptance() runs all of them in order.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vecot/certifier.hpp"
#include "vecot/disintegration.hpp"
#include "vecot/leaves.hpp"
#include "vecot/mass_balance.hpp"
#include "vecot/solver.hpp"

namespace vecot::selftest {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

/// Uniform points in [-1, 1]^n with uniform weights in [-1, 1]^m; the last
/// weight is shifted so the total mass vanishes.
inline Instance random_instance(std::mt19937_64& rng, Index n, Index m, Index count) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  RowMatrix p(count, n);
  RowMatrix w(count, m);
  for (Index i = 0; i < count; ++i) {
    for (Index k = 0; k < n; ++k) p(i, k) = unif(rng);
    for (Index k = 0; k < m; ++k) w(i, k) = unif(rng);
  }
  w.row(count - 1) -= w.colwise().sum();
  return build_instance(std::move(p), std::move(w));
}

namespace detail {

template <class F>
CriterionResult timed(int id, std::string name, F&& body) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

inline bool directional_slackness(const VectorCoupling& pi, const PotentialField& u, double tol) {
  for (const auto& e : pi.edges()) {
    const double f = e.flow.norm();
    if (f == 0.0) continue;
    const Vector du = u.values().row(e.i) - u.values().row(e.j);
    if (du.dot(e.flow) < (1.0 - tol) * pi.cloud()->distance(e.i, e.j) * f) return false;
  }
  return true;
}

inline PotentialField grid_projection_potential() {
  RowMatrix p(125, 3);
  Index k = 0;
  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) {
      for (int c = 0; c < 5; ++c) p.row(k++) << a, b, c;
    }
  }
  CloudPtr cloud = make_cloud(p);
  return {cloud, RowMatrix(p.leftCols(2))};
}

// u(x) = |x| sampled on {1, 2, 3} e_1 and {1, 2, 3} e_2: two segment leaves
// meeting transversally, tangent data P_k = e_k e_k^T and Du = e_k^T.
inline PotentialField two_leaf_potential() {
  RowMatrix p(6, 2);
  p << 1, 0, 2, 0, 3, 0, 0, 1, 0, 2, 0, 3;
  RowMatrix u(6, 1);
  for (Index i = 0; i < 6; ++i) u(i, 0) = p.row(i).norm();
  return {make_cloud(p), u};
}

// Strengthened residual >= -1e-9 on every cross-leaf pair and the derivative
// bound on every pair of points with positive inradius in full-dimensional leaves.
inline bool leaf_pair_diagnostics(const LeafDecomposition& dec, Index m, std::size_t& pairs) {
  pairs = 0;
  for (std::size_t a = 0; a < dec.leaves.size(); ++a) {
    for (std::size_t b = a + 1; b < dec.leaves.size(); ++b) {
      const Leaf& l1 = dec.leaves[a];
      const Leaf& l2 = dec.leaves[b];
      for (std::size_t p = 0; p < l1.members.size(); ++p) {
        for (std::size_t q = 0; q < l2.members.size(); ++q) {
          const Index x1 = l1.members[p];
          const Index x2 = l2.members[q];
          if (x1 == x2) continue;
          ++pairs;
          if (strengthened_lipschitz_residual(l1, l2, x1, x2) < -1e-9) return false;
          if (l1.dimension == m && l2.dimension == m && l1.sigma[p] > 0.0 && l2.sigma[q] > 0.0 &&
              !derivative_modulus_check(l1, l2, x1, x2)) {
            return false;
          }
        }
      }
    }
  }
  return true;
}

}  // namespace detail

inline CriterionResult counterexample_reproduction() {
  return detail::timed(1, "counterexample reproduction", [](CriterionResult& r) {
    const auto spec = CounterexampleSpec::planar();
    const Instance instance = counterexample_instance(spec);
    const SolveResult sol = solve(instance);
    const double exact = 1.0 + std::sqrt(5.0);
    const double rel = std::abs(sol.report.primal_value - exact) / exact;
    const auto cert = certify(sol.coupling, sol.potential, instance);
    const auto dec = extract_leaves(sol.potential);
    const auto mb = mass_balance_report(instance, dec);
    bool witness = false;
    if (mb.witness) {
      for (const auto& s : mb.sets) {
        if (s.id == *mb.witness) witness = s.members == std::vector<Index>{0, 2};
      }
    }
    r.pass = rel <= 1e-6 && cert.verdict == Verdict::Optimal && mb.verdict == BalanceVerdict::BalanceFails && witness;
    r.detail = "value " + detail::fmt(sol.report.primal_value) + " rel.err " + detail::fmt(rel) + ", " +
               to_string(cert.verdict) + ", " + to_string(mb.verdict) + (witness ? " witness {x1,x3}" : " wrong witness");
  });
}

struct DualitySuite {
  int optimal = 0;
  int iter_limit = 0;
  int wrong_sign = 0;
  int other = 0;
  int slackness_failures = 0;
  double seconds = 0.0;
};

/// Criteria 2 and 5 share the same 100 solves.
inline DualitySuite duality_suite(std::uint64_t seed = 7) {
  DualitySuite s;
  std::mt19937_64 rng(seed);
  const auto t0 = std::chrono::steady_clock::now();
  for (int t = 0; t < 100; ++t) {
    const Index n = 1 + static_cast<Index>(rng() % 4);
    const Index m = 1 + static_cast<Index>(rng() % 3);
    const Index count = 2 + static_cast<Index>(rng() % 24);
    const Instance instance = random_instance(rng, n, m, count);
    const SolveResult sol = solve(instance);
    const auto cert = certify(sol.coupling, sol.potential, instance, 1e-5);
    const double rel_gap = std::abs(sol.report.gap) / std::max(1e-300, sol.report.primal_value);
    if (sol.report.status == SolveStatus::Converged && cert.verdict == Verdict::Optimal && rel_gap <= 1e-5) {
      ++s.optimal;
      if (!detail::directional_slackness(sol.coupling, sol.potential, 1e-5)) ++s.slackness_failures;
    } else if (sol.report.status == SolveStatus::IterLimit) {
      ++s.iter_limit;
      if (sol.report.gap < 0.0) ++s.wrong_sign;
    } else {
      ++s.other;
    }
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

inline CriterionResult strong_duality(const DualitySuite& s) {
  CriterionResult r;
  r.id = 2;
  r.name = "strong duality suite";
  r.seconds = s.seconds;
  r.pass = s.optimal >= 99 && s.other == 0 && s.wrong_sign == 0 && s.seconds < 60.0;
  r.detail = std::to_string(s.optimal) + "/100 optimal, " + std::to_string(s.iter_limit) + " IterLimit, " +
             std::to_string(s.wrong_sign) + " wrong-sign gaps";
  return r;
}

inline CriterionResult complementary_slackness(const DualitySuite& s) {
  CriterionResult r;
  r.id = 5;
  r.name = "complementary slackness";
  r.pass = s.optimal > 0 && s.slackness_failures == 0;
  r.detail = std::to_string(s.optimal - s.slackness_failures) + "/" + std::to_string(s.optimal) +
             " certified pairs saturated on every flow-carrying edge";
  return r;
}

inline CriterionResult scalar_oracle(std::uint64_t seed = 11) {
  return detail::timed(3, "scalar oracle equivalence", [seed](CriterionResult& r) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    int bad = 0;
    for (int t = 0; t < 50; ++t) {
      const Index count = 2 + static_cast<Index>(rng() % 49);
      const Instance instance = random_instance(rng, 1, 1, count);
      const double oracle = line_oracle(instance);
      const double err = std::abs(kr_norm(instance) - oracle) / (1.0 + oracle);
      worst = std::max(worst, err);
      if (err > 1e-6) ++bad;
    }
    r.pass = bad == 0;
    r.detail = "worst scaled error " + detail::fmt(worst);
  });
}

inline CriterionResult norm_axioms(std::uint64_t seed = 13) {
  return detail::timed(4, "norm axioms", [seed](CriterionResult& r) {
    std::mt19937_64 rng(seed);
    const SolverParams params;
    double worst_homog = 0.0;
    for (int t = 0; t < 5; ++t) {
      const Index n = 1 + static_cast<Index>(rng() % 3);
      const Index m = 1 + static_cast<Index>(rng() % 3);
      const Instance instance = random_instance(rng, n, m, 4 + static_cast<Index>(rng() % 8));
      const double base = kr_norm(instance, params);
      for (double c : {-2.0, 0.5}) {
        const Instance scaled(instance.measure().scaled(c));
        worst_homog = std::max(worst_homog, std::abs(kr_norm(scaled, params) - std::abs(c) * base) / (std::abs(c) * base));
      }
    }
    double worst_triangle = -std::numeric_limits<double>::infinity();
    int violations = 0;
    for (int t = 0; t < 50; ++t) {
      const Index n = 1 + static_cast<Index>(rng() % 3);
      const Index m = 1 + static_cast<Index>(rng() % 3);
      const Index count = 3 + static_cast<Index>(rng() % 8);
      const Instance a = random_instance(rng, n, m, count);
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      RowMatrix w(count, m);
      for (Index i = 0; i < count; ++i) {
        for (Index k = 0; k < m; ++k) w(i, k) = unif(rng);
      }
      w.row(count - 1) -= w.colwise().sum();
      const Instance b(DiscreteVectorMeasure(a.cloud(), w));
      const Instance sum(a.measure() + b.measure());
      const double lhs = kr_norm(sum, params);
      const double ka = kr_norm(a, params);
      const double kb = kr_norm(b, params);
      const double slack = 3.0 * params.tol_gap * (1.0 + ka + kb);
      worst_triangle = std::max(worst_triangle, lhs - ka - kb);
      if (lhs > ka + kb + slack) ++violations;
    }
    r.pass = worst_homog <= 1e-9 && violations == 0;
    r.detail = "homogeneity rel.err " + detail::fmt(worst_homog) + ", worst |a+b|-|a|-|b| " + detail::fmt(worst_triangle);
  });
}

inline CriterionResult leaf_recovery() {
  return detail::timed(6, "leaf recovery", [](CriterionResult& r) {
    const PotentialField u = detail::grid_projection_potential();
    const auto dec = extract_leaves(u, 1e-9);
    bool shape = dec.leaves.size() == 5;
    for (const auto& leaf : dec.leaves) shape = shape && leaf.dimension == 2 && leaf.members.size() == 25;
    const auto again = extract_leaves(reconstruct_potential(dec), 1e-9);
    const bool idempotent = again.assignment == dec.assignment;
    r.pass = shape && idempotent;
    r.detail = std::to_string(dec.leaves.size()) + " leaves" + (shape ? " of dimension 2 with 25 members" : " (wrong shape)") +
               (idempotent ? ", idempotent" : ", not idempotent");
  });
}

inline CriterionResult strengthened_lipschitz() {
  return detail::timed(7, "strengthened Lipschitz diagnostics", [](CriterionResult& r) {
    const auto two = extract_leaves(detail::two_leaf_potential(), 1e-9);
    std::size_t pairs_two = 0;
    std::size_t pairs_grid = 0;
    const bool two_ok = two.leaves.size() == 2 && detail::leaf_pair_diagnostics(two, 1, pairs_two);
    const auto grid = extract_leaves(detail::grid_projection_potential(), 1e-9);
    const bool grid_ok = detail::leaf_pair_diagnostics(grid, 2, pairs_grid);
    r.pass = two_ok && grid_ok;
    r.detail = "two-leaf " + std::string(two_ok ? "ok" : "FAILED") + " (" + std::to_string(pairs_two) + " pairs), grid " +
               (grid_ok ? "ok" : "FAILED") + " (" + std::to_string(pairs_grid) + " pairs)";
  });
}

/// Largest moment mismatch for f in {1, x_k, x_k^2}.
inline double moment_error(const Disintegration& dis, const GridDensity& g) {
  std::vector<std::function<double(const Vector&)>> tests{[](const Vector&) { return 1.0; }};
  for (Index k = 0; k < g.dim(); ++k) {
    tests.push_back([k](const Vector& x) { return x(k); });
    tests.push_back([k](const Vector& x) { return x(k) * x(k); });
  }
  double worst = 0.0;
  for (const auto& f : tests) worst = std::max(worst, std::abs(mixture_expectation(dis, f) - grid_expectation(g, f)));
  return worst;
}

inline CriterionResult disintegration() {
  return detail::timed(8, "disintegration", [](CriterionResult& r) {
    const Vector lo = Vector::Constant(2, -4.0);
    const Vector hi = Vector::Constant(2, 4.0);
    const auto gauss = GridDensity::sample(lo, hi, {129, 129}, [](const Vector& x) { return std::exp(-0.5 * x.squaredNorm()); });
    const auto slices = slice_disintegration(gauss, 1);
    const double slice_err = l1_distance(reassemble(slices, gauss), gauss);
    const double slice_moments = moment_error(slices, gauss);

    const auto radial = GridDensity::sample(Vector::Constant(2, -2.0), Vector::Constant(2, 2.0), {129, 129},
                                            [](const Vector& x) { return std::exp(-x.squaredNorm() / 8.0); });
    std::vector<double> errs;
    double radial_moments = 0.0;
    for (Index rays : {64, 128, 256}) {
      const auto dis = radial_disintegration(radial, Vector::Zero(2), rays);
      errs.push_back(l1_distance(reassemble(dis, radial), radial));
      if (rays == 256) radial_moments = moment_error(dis, radial);
    }
    const double h = radial.spacing(0);
    const bool monotone = errs[0] > errs[1] && errs[1] > errs[2];
    r.pass = slice_err <= 1e-12 && monotone && slice_moments <= 1e-12 && radial_moments <= h * h;
    r.detail = "slice L1 " + detail::fmt(slice_err) + ", radial L1 " + detail::fmt(errs[0]) + " > " + detail::fmt(errs[1]) +
               " > " + detail::fmt(errs[2]) + ", moments " + detail::fmt(slice_moments) + " / " + detail::fmt(radial_moments);
  });
}

inline CriterionResult cd_checks() {
  return detail::timed(9, "CD checks", [](CriterionResult& r) {
    const double inf = std::numeric_limits<double>::infinity();
    const Needle gauss = make_needle(-4.0, 4.0, 801, [](double t) { return std::exp(-0.5 * t * t); });
    const bool g1 = cd_check_1d(gauss, 1.0, inf).pass;
    const bool g2 = !cd_check_1d(gauss, 1.01, inf).pass;

    // Lebesgue measure on a cube around the centre: every ray needle is r^2.
    const auto cube = GridDensity::sample(Vector::Constant(3, -1.0), Vector::Constant(3, 1.0), {17, 17, 17},
                                          [](const Vector&) { return 1.0; });
    const auto rays = radial_disintegration(cube, Vector::Zero(3), 32);
    bool lebesgue = true;
    double worst = 0.0;
    for (const auto& needle : rays.needles) {
      const auto rep = cd_check_1d(needle, 0.0, 3.0);
      const double h = needle.cell_measure;
      lebesgue = lebesgue && rep.pass && std::abs(rep.worst_violation) <= 10.0 * h * h;
      worst = std::max(worst, std::abs(rep.worst_violation));
    }
    const Needle flat = make_needle(0.0, 1.0, 101, [](double) { return 1.0; });
    const bool u1 = !cd_check_1d(flat, 0.1, inf).pass;
    r.pass = g1 && g2 && lebesgue && u1;
    r.detail = std::string("gaussian CD(1,inf) ") + (g1 ? "pass" : "fail") + ", CD(1.01,inf) " + (g2 ? "fails" : "passes") +
               ", lebesgue CD(0,3) worst |violation| " + detail::fmt(worst) + ", uniform CD(0.1,inf) " + (u1 ? "fails" : "passes");
  });
}

inline CriterionResult property_suites(std::uint64_t seed = 17) {
  return detail::timed(10, "property suites for non-reproducible results", [seed](CriterionResult& r) {
    // Weak duality: any 1-Lipschitz u and any feasible pi give pairing <= cost.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    int weak_bad = 0;
    for (int t = 0; t < 50; ++t) {
      const Index n = 1 + static_cast<Index>(rng() % 3);
      const Index m = 1 + static_cast<Index>(rng() % 3);
      const Index count = 2 + static_cast<Index>(rng() % 10);
      const Instance instance = random_instance(rng, n, m, count);
      const RowMatrix& mu = instance.measure().weights();
      // Star coupling through point 0 is feasible.
      std::vector<CouplingEdge> edges;
      for (Index i = 1; i < count; ++i) edges.push_back({i, 0, mu.row(i).transpose()});
      const VectorCoupling pi(instance.cloud(), m, edges);
      RowMatrix u(count, m);
      for (Index i = 0; i < count; ++i) {
        for (Index k = 0; k < m; ++k) u(i, k) = unif(rng);
      }
      PotentialField field(instance.cloud(), u);
      const double lip = lipschitz_constant(field).value;
      if (lip > 0.0) field = PotentialField(instance.cloud(), u / lip);
      if (pairing(field, instance.measure()) > pi.cost() + 1e-12 * (1.0 + pi.cost())) ++weak_bad;
    }
    // Mixture identity on a skewed density.
    const auto g = GridDensity::sample(Vector::Constant(3, -1.0), Vector::Constant(3, 1.0), {9, 11, 13},
                                       [](const Vector& x) { return std::exp(x(0) - x(1) * x(2)); });
    const double mixture = std::max(moment_error(slice_disintegration(g, 1), g), moment_error(slice_disintegration(g, 2), g));
    // Smoothed counterexample instances approach the atomic norm.
    const auto spec = CounterexampleSpec::planar();
    const double atomic = 1.0 + std::sqrt(5.0);
    double mass = 0.0;
    for (Index i = 0; i < spec.n(); ++i) mass += spec.vectors.row(i).norm();
    std::vector<double> dev;
    bool bound = true;
    for (double eps : {0.2, 0.1, 0.05}) {
      const double value = kr_norm(smoothed_instance(spec, eps, 4));
      dev.push_back(std::abs(value - atomic));
      bound = bound && dev.back() <= eps * mass + 1e-6;
    }
    const bool trend = dev[2] <= dev[0];
    r.pass = weak_bad == 0 && mixture <= 1e-12 && bound && trend;
    r.detail = std::to_string(50 - weak_bad) + "/50 weak duality, mixture err " + detail::fmt(mixture) +
               ", smoothed deviations " + detail::fmt(dev[0]) + " " + detail::fmt(dev[1]) + " " + detail::fmt(dev[2]);
  });
}

inline std::vector<CriterionResult> run_acceptance() {
  std::vector<CriterionResult> out;
  out.push_back(counterexample_reproduction());
  const DualitySuite suite = duality_suite();
  out.push_back(strong_duality(suite));
  out.push_back(scalar_oracle());
  out.push_back(norm_axioms());
  out.push_back(complementary_slackness(suite));
  out.push_back(leaf_recovery());
  out.push_back(strengthened_lipschitz());
  out.push_back(disintegration());
  out.push_back(cd_checks());
  out.push_back(property_suites());
  // Runtime limits.
  const double limits[] = {1.0, 60.0, 30.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0};
  for (auto& r : out) {
    const double limit = limits[r.id - 1];
    if (limit > 0.0 && r.seconds >= limit) {
      r.pass = false;
      r.detail += ", over the " + detail::fmt(limit) + " s limit";
    }
  }
  return out;
}

inline std::string format_line(const CriterionResult& r) {
  std::ostringstream os;
  os << "criterion " << r.id << " [" << (r.pass ? "PASS" : "FAIL") << "] " << r.name << ": " << r.detail << " ("
     << detail::fmt(r.seconds) << " s)";
  return os.str();
}

}  // namespace vecot::selftest
