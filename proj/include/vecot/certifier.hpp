#pragma once

// Optimality certificates for a (coupling, potential) pair: primal
// feasibility, dual feasibility, zero gap and directional complementary
// slackness on every edge carrying non-negligible flow.

#include <cmath>
#include <string>
#include <vector>

#include "vecot/core.hpp"

namespace vecot {

enum class Verdict { Optimal, Suboptimal, Infeasible };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Optimal: return "Optimal";
    case Verdict::Suboptimal: return "Suboptimal";
    case Verdict::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

struct SlackViolation {
  Index edge = 0;  // position in coupling.edges()
  Index i = 0;
  Index j = 0;
  double potential_difference = 0.0;  // |u_i - u_j|
  double distance = 0.0;
  double flow_norm = 0.0;
  double directional = 0.0;  // <u_i - u_j, flow>
};

struct OptimalityCertificate {
  double primal_value = 0.0;
  double dual_value = 0.0;
  double gap = 0.0;
  double feasibility_primal = 0.0;  // sum_i |net_i - mu_i|
  double feasibility_dual = 0.0;    // max(0, Lip(u) - 1)
  std::vector<SlackViolation> slack_violations;
  Verdict verdict = Verdict::Optimal;
  double tol = 0.0;
};

namespace detail {

inline void check_pair_dims(const VectorCoupling& pi, const PotentialField& u, const Instance& instance) {
  const Index n = instance.size();
  const Index m = instance.target_dim();
  if (pi.target_dim() != m || u.target_dim() != m) {
    fail(ErrorCode::DimensionMismatch, "coupling, potential and instance must share the target dimension");
  }
  if (pi.cloud()->size() != n || u.cloud()->size() != n) {
    fail(ErrorCode::DimensionMismatch, "coupling, potential and instance must live on the same cloud");
  }
  if (pi.cloud()->ambient_dim() != instance.ambient_dim() || u.cloud()->ambient_dim() != instance.ambient_dim()) {
    fail(ErrorCode::DimensionMismatch, "ambient dimensions differ");
  }
}

inline bool saturated(const PotentialField& u, const CouplingEdge& e, double distance, double tol) {
  const Vector du = u.values().row(e.i) - u.values().row(e.j);
  const double flow_norm = e.flow.norm();
  return du.norm() >= (1.0 - tol) * distance && du.dot(e.flow) >= (1.0 - tol) * distance * flow_norm;
}

}  // namespace detail

/// Checks (a) net(pi) = mu, (b) Lip(u) <= 1 + tol, (c) |pairing - cost| <=
/// tol (1 + cost) and (d) directional saturation on edges with
/// |flow| > tol tv(pi). Failing (a) or (b) gives Infeasible, failing (c) or
/// (d) gives Suboptimal.
inline OptimalityCertificate certify(const VectorCoupling& pi, const PotentialField& u, const Instance& instance,
                                     double tol = 1e-6) {
  if (!(tol >= 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be nonnegative");
  detail::check_pair_dims(pi, u, instance);
  const RowMatrix& mu = instance.measure().weights();
  const Matrix& dist = instance.distances();

  OptimalityCertificate cert;
  cert.tol = tol;
  cert.primal_value = pi.cost();
  cert.dual_value = pairing(u, instance.measure());
  cert.gap = cert.primal_value - cert.dual_value;
  const RowMatrix net = pi.net();
  for (Index i = 0; i < instance.size(); ++i) cert.feasibility_primal += (net.row(i) - mu.row(i)).norm();
  const LipschitzResult lip = lipschitz_constant(u);
  cert.feasibility_dual = std::max(0.0, lip.value - 1.0);

  const double threshold = tol * pi.total_variation();
  const auto& edges = pi.edges();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const CouplingEdge& e = edges[k];
    const double flow_norm = e.flow.norm();
    if (flow_norm <= threshold || flow_norm == 0.0) continue;
    const double d = dist(e.i, e.j);
    if (detail::saturated(u, e, d, tol)) continue;
    const Vector du = u.values().row(e.i) - u.values().row(e.j);
    cert.slack_violations.push_back({static_cast<Index>(k), e.i, e.j, du.norm(), d, flow_norm, du.dot(e.flow)});
  }

  const double mass = instance.measure().total_variation();
  if (cert.feasibility_primal > tol * (1.0 + mass) || cert.feasibility_dual > tol) {
    cert.verdict = Verdict::Infeasible;
  } else if (std::abs(cert.gap) > tol * (1.0 + std::abs(cert.primal_value)) || !cert.slack_violations.empty()) {
    cert.verdict = Verdict::Suboptimal;
  } else {
    cert.verdict = Verdict::Optimal;
  }
  return cert;
}

/// Edges carrying flow above tol tv(pi) on which u is directionally
/// saturated, as positions in pi.edges().
inline std::vector<Index> isometry_saturation_set(const VectorCoupling& pi, const PotentialField& u, double tol = 1e-6) {
  if (pi.target_dim() != u.target_dim() || pi.cloud()->size() != u.cloud()->size()) {
    fail(ErrorCode::DimensionMismatch, "coupling and potential do not match");
  }
  std::vector<Index> out;
  const double threshold = tol * pi.total_variation();
  const auto& edges = pi.edges();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const CouplingEdge& e = edges[k];
    const double flow_norm = e.flow.norm();
    if (flow_norm == 0.0 || flow_norm <= threshold) continue;
    if (detail::saturated(u, e, pi.cloud()->distance(e.i, e.j), tol)) out.push_back(static_cast<Index>(k));
  }
  return out;
}

}  // namespace vecot
