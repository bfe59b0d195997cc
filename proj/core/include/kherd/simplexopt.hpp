#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

namespace kherd {

// min_c  c^T G c - 2 b^T c, G symmetric positive semidefinite. G is the Gram
// of the atoms in the RKHS and b their inner products with the target.
struct QuadraticProblem {
  Eigen::MatrixXd G;
  Eigen::VectorXd b;
};

struct SolveOptions {
  std::optional<Eigen::VectorXd> warm_start;
  int max_iterations = 0;       // 0: pick from the problem size
  bool force_projected = false; // use the projected-gradient path at any size
};

struct SolveDiagnostics {
  std::vector<double> objective_per_iteration;
  double kkt_violation = 0.0;
  int iterations = 0;
  bool used_projected_gradient = false;
};

// certificate tolerance shared by both solvers
double kkt_tolerance(const QuadraticProblem& prob);

// Nonnegative least squares: c >= 0 with the KKT certificate
//   (G c - b)_i >= -tau for all i, |(G c - b)_i| <= tau wherever c_i > tau.
// Active-set up to 256 variables, projected gradient with Barzilai-Borwein
// steps beyond. Throws SolverError if the certificate is not reached.
Eigen::VectorXd nnls(const QuadraticProblem& prob, const SolveOptions& opts = {},
                     SolveDiagnostics* diag = nullptr);

// Minimization over the probability simplex: w >= 0, sum w = 1 (exact after a
// final renormalization). Certificate: there is a multiplier s with
// (G w - b)_i >= s - tau for all i and within tau of s on the support.
Eigen::VectorXd simplex_qp(const QuadraticProblem& prob, const SolveOptions& opts = {},
                           SolveDiagnostics* diag = nullptr);

double quadratic_objective(const QuadraticProblem& prob, const Eigen::VectorXd& x);

// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace kherd
