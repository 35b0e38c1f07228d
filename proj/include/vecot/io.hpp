#pragma once

// JSON forms of instances, solutions and reports. Instances use
//   { "m": int, "n": int, "points": [[n doubles]...], "weights": [[m doubles]...] }
// where n is the ambient dimension and m the target dimension. Documents are
// written with sorted keys and two-space indentation; doubles use the shortest
// representation that reads back to the same bits.

#include "json.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "vecot/certifier.hpp"
#include "vecot/core.hpp"
#include "vecot/disintegration.hpp"
#include "vecot/leaves.hpp"
#include "vecot/mass_balance.hpp"
#include "vecot/solver.hpp"

namespace vecot::io {

using json = nlohmann::json;

inline constexpr const char* kSchema = "vecot/1";

inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json vector_json(const Eigen::Ref<const Vector>& v) {
  json out = json::array();
  for (Index k = 0; k < v.size(); ++k) out.push_back(number(v(k)));
  return out;
}

inline json matrix_json(const RowMatrix& a) {
  json out = json::array();
  for (Index i = 0; i < a.rows(); ++i) out.push_back(vector_json(a.row(i).transpose()));
  return out;
}

inline json index_json(const std::vector<Index>& v) {
  json out = json::array();
  for (Index k : v) out.push_back(k);
  return out;
}

inline std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

inline json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, e.what());
  }
}

namespace detail {

inline const json& field(const json& obj, const char* key) {
  if (!obj.is_object()) fail(ErrorCode::ParseError, "expected a JSON object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorCode::ParseError, std::string("missing field \"") + key + "\"");
  return *it;
}

inline Index read_count(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    fail(ErrorCode::ParseError, std::string("field \"") + key + "\" must be a positive integer");
  }
  return static_cast<Index>(v.get<long long>());
}

inline double read_double(const json& v, const std::string& where) {
  if (!v.is_number()) fail(ErrorCode::ParseError, where + " must be a number");
  return v.get<double>();
}

inline RowMatrix read_matrix(const json& v, Index cols, const std::string& where) {
  if (!v.is_array()) fail(ErrorCode::ParseError, where + " must be an array");
  RowMatrix out(static_cast<Index>(v.size()), cols);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const json& row = v[i];
    if (!row.is_array()) fail(ErrorCode::ParseError, where + " rows must be arrays");
    if (static_cast<Index>(row.size()) != cols) {
      fail(ErrorCode::DimensionMismatch, where + " row " + std::to_string(i) + " has " + std::to_string(row.size()) +
                                             " entries, expected " + std::to_string(cols));
    }
    for (std::size_t k = 0; k < row.size(); ++k) {
      out(static_cast<Index>(i), static_cast<Index>(k)) = read_double(row[k], where);
    }
  }
  return out;
}

}  // namespace detail

inline json to_json(const Instance& instance) {
  return {{"m", instance.target_dim()},
          {"n", instance.ambient_dim()},
          {"points", matrix_json(instance.cloud()->points())},
          {"weights", matrix_json(instance.measure().weights())}};
}

inline Instance parse_instance(const json& doc) {
  const Index n = detail::read_count(doc, "n");
  const Index m = detail::read_count(doc, "m");
  RowMatrix points = detail::read_matrix(detail::field(doc, "points"), n, "points");
  RowMatrix weights = detail::read_matrix(detail::field(doc, "weights"), m, "weights");
  if (points.rows() != weights.rows()) {
    fail(ErrorCode::DimensionMismatch, std::to_string(points.rows()) + " points but " +
                                           std::to_string(weights.rows()) + " weights");
  }
  return build_instance(std::move(points), std::move(weights));
}

inline Instance parse_instance(const std::string& text) { return parse_instance(parse_text(text)); }

inline std::string serialize_instance(const Instance& instance) { return dump(to_json(instance)); }

inline json to_json(const VectorCoupling& pi) {
  json edges = json::array();
  for (const auto& e : pi.edges()) edges.push_back({{"i", e.i}, {"j", e.j}, {"flow", vector_json(e.flow)}});
  return edges;
}

inline VectorCoupling parse_coupling(const json& edges, const CloudPtr& cloud, Index m) {
  if (!edges.is_array()) fail(ErrorCode::ParseError, "coupling must be an array of edges");
  std::vector<CouplingEdge> entries;
  for (const json& e : edges) {
    const json& i = detail::field(e, "i");
    const json& j = detail::field(e, "j");
    if (!i.is_number_integer() || !j.is_number_integer()) fail(ErrorCode::ParseError, "edge endpoints must be integers");
    const json& flow = detail::field(e, "flow");
    RowMatrix f = detail::read_matrix(json::array({flow}), m, "flow");
    entries.push_back({static_cast<Index>(i.get<long long>()), static_cast<Index>(j.get<long long>()), f.row(0).transpose()});
  }
  return {cloud, m, std::move(entries)};
}

inline json to_json(const PotentialField& u) { return matrix_json(u.values()); }

inline PotentialField parse_potential(const json& values, const CloudPtr& cloud, Index m) {
  return {cloud, detail::read_matrix(values, m, "potential")};
}

inline json to_json(const SolveReport& r) {
  return {{"primal_value", number(r.primal_value)}, {"dual_value", number(r.dual_value)},
          {"gap", number(r.gap)},                   {"iterations", r.iterations},
          {"primal_residual", number(r.primal_residual)}, {"dual_residual", number(r.dual_residual)},
          {"status", to_string(r.status)},          {"notes", r.notes}};
}

inline json to_json(const OptimalityCertificate& c) {
  json violations = json::array();
  for (const auto& v : c.slack_violations) {
    violations.push_back({{"edge", v.edge}, {"i", v.i}, {"j", v.j},
                          {"potential_difference", number(v.potential_difference)},
                          {"distance", number(v.distance)}, {"flow_norm", number(v.flow_norm)},
                          {"directional", number(v.directional)}});
  }
  return {{"primal_value", number(c.primal_value)}, {"dual_value", number(c.dual_value)},
          {"gap", number(c.gap)}, {"feasibility_primal", number(c.feasibility_primal)},
          {"feasibility_dual", number(c.feasibility_dual)}, {"slack_violations", violations},
          {"verdict", to_string(c.verdict)}, {"tol", number(c.tol)}};
}

inline json to_json(const Leaf& leaf) {
  return {{"members", index_json(leaf.members)},
          {"dimension", leaf.dimension},
          {"fit_residual", number(leaf.fit_residual)},
          {"base", vector_json(leaf.isometry.base)},
          {"offset", vector_json(leaf.isometry.offset)},
          {"linear", matrix_json(leaf.isometry.linear())},
          {"sigma", [&] {
             json s = json::array();
             for (double x : leaf.sigma) s.push_back(number(x));
             return s;
           }()}};
}

inline json to_json(const LeafDecomposition& dec) {
  json leaves = json::array();
  for (const auto& leaf : dec.leaves) leaves.push_back(to_json(leaf));
  json boundary = json::array();
  for (std::size_t i = 0; i < dec.boundary.size(); ++i) {
    if (dec.boundary[i]) boundary.push_back(static_cast<Index>(i));
  }
  return {{"epsilon", number(dec.epsilon)}, {"leaves", leaves}, {"assignment", index_json(dec.assignment)},
          {"boundary_points", boundary}, {"graph_edges", static_cast<Index>(dec.graph.edges.size())}};
}

inline json to_json(const MassBalanceReport& r) {
  json sets = json::array();
  for (const auto& s : r.sets) {
    sets.push_back({{"id", s.id}, {"members", index_json(s.members)}, {"mass", vector_json(s.mass)},
                    {"norm", number(s.norm)}});
  }
  return {{"sets", sets}, {"verdict", to_string(r.verdict)},
          {"witness", r.witness ? json(*r.witness) : json(nullptr)}, {"tol", number(r.tol)}};
}

inline json to_json(const CdReport& r) {
  return {{"kappa", number(r.kappa)}, {"N", std::isinf(r.N) ? json("inf") : number(r.N)},
          {"worst_violation", number(r.worst_violation)}, {"worst_index", r.worst_index},
          {"tol", number(r.tol)}, {"pass", r.pass}};
}

inline json to_json(const Needle& needle) {
  json axes = json::array();
  for (const auto& a : needle.axes) axes.push_back(vector_json(a));
  RowMatrix dirs = needle.directions.transpose();
  return {{"base", vector_json(needle.base)}, {"directions", matrix_json(dirs)}, {"axes", axes},
          {"density", vector_json(needle.density)}, {"cell_measure", number(needle.cell_measure)},
          {"empty", needle.empty}};
}

}  // namespace vecot::io
