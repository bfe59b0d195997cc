#pragma once

#include <stdexcept>
#include <string>

namespace kherd {

// Constrained-QP solver gave up before reaching its optimality certificate.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double worst_kkt_violation, int iterations)
      : std::runtime_error(what),
        worst_kkt_violation(worst_kkt_violation),
        iterations(iterations) {}
  double worst_kkt_violation;
  int iterations;
};

// Gram matrix too close to singular for a reliable solve.
class ConditioningError : public std::runtime_error {
 public:
  ConditioningError(const std::string& what, std::size_t node_i, std::size_t node_j)
      : std::runtime_error(what), node_i(node_i), node_j(node_j) {}
  std::size_t node_i, node_j;
};

// A quantity the algorithm relies on left its proven range mid-run.
class InvariantError : public std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace kherd
