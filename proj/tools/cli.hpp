#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vecot::cli {

enum ExitCode : int { kSuccess = 0, kValidation = 2, kIterLimit = 3, kInternal = 4 };

/// Parsed command line for one run.
struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string solution;
  std::string output;  // empty: standard output

  // solver
  int max_iters = 20000;
  double penalty = 1.0;
  double tol_primal = 1e-8;
  double tol_dual = 1e-8;
  double tol_gap = 1e-6;
  int knn = 0;
  unsigned seed = 0;

  // certifier, leaves, mass balance
  double tol = 1e-6;
  double epsilon = 1e-6;

  // counterexample
  int n = 2;
  int m = 2;
  std::string preset = "paper";
  double c = 0.5;
  std::vector<double> smooth_eps;
  int points_per_ball = 4;

  // disintegrate
  std::string family = "gaussian";
  std::string grid_file;
  std::string kind = "slice";
  int dim = 2;
  double half_width = 4.0;
  int resolution = 129;
  int slice_dim = 1;
  int rays = 256;
  double kappa = 0.0;
  std::string cd_n = "inf";
  bool emit_needles = false;
  std::string csv_dir;
};

/// Runs the command line; the JSON document goes to `out` (or the --output
/// file) and diagnostics to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vecot::cli
