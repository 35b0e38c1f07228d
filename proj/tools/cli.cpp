#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <utility>

#include "vecot/selftest.hpp"
#include "vecot/vecot.hpp"

namespace vecot::cli {
namespace {

using io::json;

struct Outcome {
  json doc;
  int code = kSuccess;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidArgument, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json header(const std::string& command) { return {{"schema", io::kSchema}, {"command", command}}; }

SolverParams solver_params(const RunConfig& cfg) {
  SolverParams p;
  p.max_iters = cfg.max_iters;
  p.penalty = cfg.penalty;
  p.tol_primal = cfg.tol_primal;
  p.tol_dual = cfg.tol_dual;
  p.tol_gap = cfg.tol_gap;
  p.seed = cfg.seed;
  if (cfg.knn > 0) p.edge_policy = EdgePolicy::knn(cfg.knn);
  return p;
}

int status_code(const SolveReport& r) { return r.status == SolveStatus::IterLimit ? kIterLimit : kSuccess; }

struct Pair {
  VectorCoupling coupling;
  PotentialField potential;
  int code = kSuccess;
};

// Coupling and potential from --solution, or from a fresh solve.
Pair solution_for(const RunConfig& cfg, const Instance& instance) {
  if (!cfg.solution.empty()) {
    const json doc = io::parse_text(read_file(cfg.solution));
    if (!doc.is_object() || !doc.contains("coupling") || !doc.contains("potential")) {
      fail(ErrorCode::ParseError, "solution file needs \"coupling\" and \"potential\"");
    }
    return {io::parse_coupling(doc.at("coupling"), instance.cloud(), instance.target_dim()),
            io::parse_potential(doc.at("potential"), instance.cloud(), instance.target_dim())};
  }
  SolveResult r = solve(instance, solver_params(cfg));
  const int code = status_code(r.report);
  return {std::move(r.coupling), std::move(r.potential), code};
}

Outcome cmd_solve(const RunConfig& cfg) {
  const Instance instance = io::parse_instance(read_file(cfg.input));
  const SolveResult r = solve(instance, solver_params(cfg));
  json doc = header("solve");
  doc["report"] = io::to_json(r.report);
  doc["primal_value"] = io::number(r.report.primal_value);
  doc["coupling"] = io::to_json(r.coupling);
  doc["potential"] = io::to_json(r.potential);
  return {doc, status_code(r.report)};
}

Outcome cmd_certify(const RunConfig& cfg) {
  const Instance instance = io::parse_instance(read_file(cfg.input));
  const Pair pair = solution_for(cfg, instance);
  json doc = header("certify");
  doc["certificate"] = io::to_json(certify(pair.coupling, pair.potential, instance, cfg.tol));
  doc["saturation_set"] = io::index_json(isometry_saturation_set(pair.coupling, pair.potential, cfg.tol));
  return {doc, pair.code};
}

json transport_sets_json(const LeafDecomposition& dec) {
  json sets = json::array();
  for (const auto& s : maximal_transport_sets(dec)) sets.push_back(io::index_json(s));
  return sets;
}

Outcome cmd_leaves(const RunConfig& cfg) {
  const Instance instance = io::parse_instance(read_file(cfg.input));
  const Pair pair = solution_for(cfg, instance);
  const LeafDecomposition dec = extract_leaves(pair.potential, cfg.epsilon);
  json doc = header("leaves");
  doc["decomposition"] = io::to_json(dec);
  doc["transport_sets"] = transport_sets_json(dec);
  return {doc, pair.code};
}

Outcome cmd_massbalance(const RunConfig& cfg) {
  const Instance instance = io::parse_instance(read_file(cfg.input));
  const Pair pair = solution_for(cfg, instance);
  const LeafDecomposition dec = extract_leaves(pair.potential, cfg.epsilon);
  json doc = header("massbalance");
  doc["mass_balance"] = io::to_json(mass_balance_report(instance, dec, cfg.tol));
  doc["surrogate"] = marginal_abs_continuity_surrogate(pair.coupling, instance.measure());
  doc["decomposition"] = io::to_json(dec);
  return {doc, pair.code};
}

Outcome cmd_counterexample(const RunConfig& cfg) {
  CounterexampleSpec spec;
  if (cfg.preset == "paper") {
    if (cfg.n != 2 || cfg.m != 2) fail(ErrorCode::InvalidSpec, "preset 'paper' is the planar instance with n = m = 2");
    spec = CounterexampleSpec::planar();
  } else {
    spec = CounterexampleSpec::simplex(cfg.n, cfg.m, cfg.c);
  }
  const double margin = check_counterexample_spec(spec);
  const AnalyticOptimum opt = analytic_optimum(spec);
  const SolveResult sol = solve(opt.instance, solver_params(cfg));
  const LeafDecomposition dec = extract_leaves(sol.potential, cfg.epsilon);

  json doc = header("counterexample");
  doc["spec"] = {{"preset", cfg.preset}, {"anchors", io::matrix_json(spec.anchors)},
                 {"vectors", io::matrix_json(spec.vectors)}, {"margin", io::number(margin)}};
  doc["instance"] = io::to_json(opt.instance);
  doc["analytic"] = {{"value", io::number(opt.value)},
                     {"potential", io::to_json(opt.potential)},
                     {"coupling", io::to_json(opt.coupling)},
                     {"certificate", io::to_json(certify(opt.coupling, opt.potential, opt.instance, cfg.tol))}};
  doc["solver"] = {{"report", io::to_json(sol.report)},
                   {"certificate", io::to_json(certify(sol.coupling, sol.potential, opt.instance, cfg.tol))}};
  const MassBalanceReport mb = mass_balance_report(opt.instance, dec, cfg.tol);
  doc["mass_balance"] = io::to_json(mb);
  doc["verdict"] = to_string(mb.verdict);
  doc["surrogate"] = marginal_abs_continuity_surrogate(sol.coupling, opt.instance.measure());
  doc["decomposition"] = io::to_json(dec);
  int code = status_code(sol.report);
  if (!cfg.smooth_eps.empty()) {
    json smoothed = json::array();
    for (double eps : cfg.smooth_eps) {
      const Instance inst = smoothed_instance(spec, eps, cfg.points_per_ball);
      const SolveResult r = solve(inst, solver_params(cfg));
      if (r.report.status == SolveStatus::IterLimit) code = kIterLimit;
      smoothed.push_back({{"epsilon", io::number(eps)}, {"points_per_ball", cfg.points_per_ball},
                          {"value", io::number(r.report.primal_value)}, {"status", to_string(r.report.status)},
                          {"deviation", io::number(std::abs(r.report.primal_value - opt.value))}});
    }
    doc["smoothed"] = smoothed;
  }
  return {doc, code};
}

GridDensity load_grid(const RunConfig& cfg) {
  if (cfg.family == "file") {
    if (cfg.grid_file.empty()) fail(ErrorCode::InvalidArgument, "family 'file' needs --grid");
    const json doc = io::parse_text(read_file(cfg.grid_file));
    for (const char* key : {"lower", "upper", "shape", "values"}) {
      if (!doc.is_object() || !doc.contains(key)) fail(ErrorCode::ParseError, std::string("grid file needs \"") + key + "\"");
    }
    try {
      const auto lower = doc.at("lower").get<std::vector<double>>();
      const auto upper = doc.at("upper").get<std::vector<double>>();
      const auto shape = doc.at("shape").get<std::vector<Index>>();
      const auto values = doc.at("values").get<std::vector<double>>();
      return {Eigen::Map<const Vector>(lower.data(), static_cast<Index>(lower.size())),
              Eigen::Map<const Vector>(upper.data(), static_cast<Index>(upper.size())), shape,
              Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()))};
    } catch (const json::exception& e) {
      fail(ErrorCode::ParseError, e.what());
    }
  }
  if (cfg.dim < 1) fail(ErrorCode::InvalidArgument, "dimension must be positive");
  const Vector lower = Vector::Constant(cfg.dim, -cfg.half_width);
  const Vector upper = Vector::Constant(cfg.dim, cfg.half_width);
  const std::vector<Index> shape(static_cast<std::size_t>(cfg.dim), cfg.resolution);
  if (cfg.family == "gaussian") {
    return GridDensity::sample(lower, upper, shape, [](const Vector& x) { return std::exp(-0.5 * x.squaredNorm()); });
  }
  if (cfg.family == "uniform") return GridDensity::sample(lower, upper, shape, [](const Vector&) { return 1.0; });
  if (cfg.family == "quartic") {
    return GridDensity::sample(lower, upper, shape,
                               [](const Vector& x) { return std::exp(-0.25 * x.array().pow(4).sum()); });
  }
  fail(ErrorCode::InvalidArgument, "unknown density family '" + cfg.family + "'");
}

double parse_dimension_parameter(const std::string& text) {
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || std::isnan(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidArgument, "N must be a number or 'inf'");
  }
}

void write_csv(const Disintegration& dis, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream weights(std::filesystem::path(dir) / "weights.csv");
  weights << "needle,weight\n" << std::setprecision(17);
  for (std::size_t k = 0; k < dis.weights.size(); ++k) weights << k << ',' << dis.weights[k] << '\n';
  for (std::size_t k = 0; k < dis.needles.size(); ++k) {
    const Needle& needle = dis.needles[k];
    std::ofstream out(std::filesystem::path(dir) / ("needle_" + std::to_string(k) + ".csv"));
    out << std::setprecision(17);
    for (Index a = 0; a < needle.dimension(); ++a) out << 't' << a << ',';
    for (Index a = 0; a < needle.base.size(); ++a) out << 'x' << a << ',';
    out << "density\n";
    for (Index c = 0; c < needle.size(); ++c) {
      const Vector t = needle.parameter(c);
      const Vector x = needle.point(c);
      for (Index a = 0; a < t.size(); ++a) out << t(a) << ',';
      for (Index a = 0; a < x.size(); ++a) out << x(a) << ',';
      out << needle.density(c) << '\n';
    }
  }
}

Outcome cmd_disintegrate(const RunConfig& cfg) {
  const GridDensity grid = load_grid(cfg);
  Disintegration dis;
  if (cfg.kind == "slice") {
    dis = slice_disintegration(grid, cfg.slice_dim);
  } else if (cfg.kind == "radial") {
    dis = radial_disintegration(grid, (grid.lower() + grid.upper()) / 2.0, cfg.rays);
  } else {
    fail(ErrorCode::InvalidArgument, "kind must be slice or radial");
  }
  const double N = parse_dimension_parameter(cfg.cd_n);
  json doc = header("disintegrate");
  doc["family"] = cfg.family;
  doc["kind"] = cfg.kind;
  doc["grid"] = {{"lower", io::vector_json(grid.lower())}, {"upper", io::vector_json(grid.upper())},
                 {"shape", grid.shape()}, {"total_mass", io::number(grid.total_mass())}};
  doc["needle_count"] = dis.needles.size();
  json weights = json::array();
  for (double w : dis.weights) weights.push_back(io::number(w));
  doc["weights"] = weights;
  doc["reassembly_l1"] = io::number(l1_distance(reassemble(dis, grid), grid));
  doc["moment_error"] = io::number(selftest::moment_error(dis, grid));

  json cd = {{"kappa", io::number(cfg.kappa)}, {"N", std::isinf(N) ? json("inf") : io::number(N)}};
  json reports = json::array();
  int passed = 0;
  int failed = 0;
  int skipped = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < dis.needles.size(); ++k) {
    const Needle& needle = dis.needles[k];
    if (needle.dimension() != 1 || needle.empty) {
      ++skipped;
      continue;
    }
    try {
      const CdReport rep = cd_check_1d(needle, cfg.kappa, N);
      json entry = io::to_json(rep);
      entry["needle"] = k;
      reports.push_back(entry);
      (rep.pass ? passed : failed) += 1;
      worst = std::min(worst, rep.worst_violation);
    } catch (const Error& e) {
      reports.push_back({{"needle", k}, {"error", to_string(e.code())}});
      ++skipped;
    }
  }
  cd["passed"] = passed;
  cd["failed"] = failed;
  cd["skipped"] = skipped;
  cd["worst_violation"] = io::number(worst);
  cd["reports"] = reports;
  doc["cd"] = cd;
  if (cfg.emit_needles) {
    json needles = json::array();
    for (const auto& needle : dis.needles) needles.push_back(io::to_json(needle));
    doc["needles"] = needles;
  }
  if (!cfg.csv_dir.empty()) {
    write_csv(dis, cfg.csv_dir);
    doc["csv_dir"] = cfg.csv_dir;
  }
  return {doc, kSuccess};
}

Outcome cmd_selftest(std::ostream& err) {
  json doc = header("selftest");
  json criteria = json::array();
  bool all = true;
  for (const auto& r : selftest::run_acceptance()) {
    err << selftest::format_line(r) << '\n';
    criteria.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"seconds", io::number(r.seconds)},
                        {"detail", r.detail}});
    all = all && r.pass;
  }
  doc["criteria"] = criteria;
  doc["pass"] = all;
  return {doc, all ? kSuccess : kInternal};
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IterLimit: return kIterLimit;
    case ErrorCode::NumericalBreakdown: return kInternal;
    default: return kValidation;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Vector-valued optimal transport: KR norms, certificates, leaves, mass balance and disintegration"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  auto add_output = [&](CLI::App* sub) { sub->add_option("-o,--output", cfg.output, "Write the JSON report here"); };
  auto add_solver = [&](CLI::App* sub) {
    sub->add_option("--max-iters", cfg.max_iters, "ADMM iteration limit")->check(CLI::PositiveNumber);
    sub->add_option("--penalty", cfg.penalty, "Initial ADMM penalty")->check(CLI::PositiveNumber);
    sub->add_option("--tol-primal", cfg.tol_primal, "Marginal residual tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--tol-dual", cfg.tol_dual, "Lipschitz excess tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--tol-gap", cfg.tol_gap, "Relative duality gap tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--knn", cfg.knn, "Restrict edges to k nearest neighbours (0: complete graph)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", cfg.seed, "Seed for randomized initialization");
  };
  auto add_instance = [&](CLI::App* sub) {
    sub->add_option("-i,--input", cfg.input, "Instance JSON")->required()->check(CLI::ExistingFile);
  };
  auto add_solution = [&](CLI::App* sub) {
    sub->add_option("-s,--solution", cfg.solution, "Output of `solve` to use instead of solving")
        ->check(CLI::ExistingFile);
  };

  CLI::App* solve_cmd = app.add_subcommand("solve", "Solve the primal and dual problems");
  add_instance(solve_cmd);
  add_solver(solve_cmd);
  add_output(solve_cmd);

  CLI::App* certify_cmd = app.add_subcommand("certify", "Certify a coupling and potential");
  add_instance(certify_cmd);
  add_solution(certify_cmd);
  add_solver(certify_cmd);
  certify_cmd->add_option("--tol", cfg.tol, "Certificate tolerance")->check(CLI::NonNegativeNumber);
  add_output(certify_cmd);

  CLI::App* leaves_cmd = app.add_subcommand("leaves", "Extract leaves and transport sets of a potential");
  add_instance(leaves_cmd);
  add_solution(leaves_cmd);
  add_solver(leaves_cmd);
  leaves_cmd->add_option("--epsilon", cfg.epsilon, "Relative saturation tolerance")->check(CLI::Range(0.0, 0.999));
  add_output(leaves_cmd);

  CLI::App* mb_cmd = app.add_subcommand("massbalance", "Mass of every maximal transport set");
  add_instance(mb_cmd);
  add_solution(mb_cmd);
  add_solver(mb_cmd);
  mb_cmd->add_option("--epsilon", cfg.epsilon, "Relative saturation tolerance")->check(CLI::Range(0.0, 0.999));
  mb_cmd->add_option("--tol", cfg.tol, "Balance tolerance relative to total variation")->check(CLI::NonNegativeNumber);
  add_output(mb_cmd);

  CLI::App* ce_cmd = app.add_subcommand("counterexample", "Atomic instance on which mass balance fails");
  ce_cmd->add_option("--n", cfg.n, "Ambient dimension")->check(CLI::PositiveNumber);
  ce_cmd->add_option("--m", cfg.m, "Target dimension")->check(CLI::PositiveNumber);
  ce_cmd->add_option("--preset", cfg.preset, "Anchor preset")->check(CLI::IsMember({"paper", "simplex"}));
  ce_cmd->add_option("--c", cfg.c, "Shift of the simplex preset vectors");
  ce_cmd->add_option("--smooth", cfg.smooth_eps, "Ball radii for smoothed instances")->check(CLI::PositiveNumber);
  ce_cmd->add_option("--points-per-ball", cfg.points_per_ball, "Samples per ball")->check(CLI::PositiveNumber);
  ce_cmd->add_option("--epsilon", cfg.epsilon, "Relative saturation tolerance")->check(CLI::Range(0.0, 0.999));
  ce_cmd->add_option("--tol", cfg.tol, "Certificate and balance tolerance")->check(CLI::NonNegativeNumber);
  add_solver(ce_cmd);
  add_output(ce_cmd);

  CLI::App* dis_cmd = app.add_subcommand("disintegrate", "Disintegrate a grid density along slices or rays");
  dis_cmd->add_option("--family", cfg.family, "Density family")
      ->check(CLI::IsMember({"gaussian", "uniform", "quartic", "file"}));
  dis_cmd->add_option("--grid", cfg.grid_file, "Grid JSON {lower, upper, shape, values} for family 'file'")
      ->check(CLI::ExistingFile);
  dis_cmd->add_option("--kind", cfg.kind, "Leaf structure")->check(CLI::IsMember({"slice", "radial"}));
  dis_cmd->add_option("--dim", cfg.dim, "Dimension of analytic families")->check(CLI::Range(1, 6));
  dis_cmd->add_option("--half-width", cfg.half_width, "Box is [-w, w]^dim")->check(CLI::PositiveNumber);
  dis_cmd->add_option("--resolution", cfg.resolution, "Cells per axis")->check(CLI::Range(1, 4097));
  dis_cmd->add_option("--slice-dim", cfg.slice_dim, "Slice dimension m")->check(CLI::PositiveNumber);
  dis_cmd->add_option("--rays", cfg.rays, "Number of ray directions")->check(CLI::Range(1, 1 << 20));
  dis_cmd->add_option("--kappa", cfg.kappa, "Curvature bound for CD checks");
  dis_cmd->add_option("--N", cfg.cd_n, "Dimension bound for CD checks (number or inf)");
  dis_cmd->add_flag("--emit-needles", cfg.emit_needles, "Include needle densities in the report");
  dis_cmd->add_option("--csv", cfg.csv_dir, "Directory for CSV needle dumps");
  add_output(dis_cmd);

  CLI::App* self_cmd = app.add_subcommand("selftest", "Run the acceptance suite");
  add_output(self_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kValidation;
  }

  Outcome outcome;
  try {
    if (*solve_cmd) outcome = cmd_solve(cfg);
    else if (*certify_cmd) outcome = cmd_certify(cfg);
    else if (*leaves_cmd) outcome = cmd_leaves(cfg);
    else if (*mb_cmd) outcome = cmd_massbalance(cfg);
    else if (*ce_cmd) outcome = cmd_counterexample(cfg);
    else if (*dis_cmd) outcome = cmd_disintegrate(cfg);
    else outcome = cmd_selftest(err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }

  const std::string text = io::dump(outcome.doc);
  if (cfg.output.empty()) {
    out << text;
  } else {
    std::ofstream file(cfg.output, std::ios::binary);
    if (!file) {
      err << "error: cannot write " << cfg.output << '\n';
      return kValidation;
    }
    file << text;
  }
  if (outcome.code == kIterLimit) err << "warning: solver stopped at the iteration limit\n";
  return outcome.code;
}

}  // namespace vecot::cli
