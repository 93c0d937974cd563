#pragma once

#include <utility>
#include <vector>

#include "dcc/path.hpp"
#include "dcc/scenario.hpp"

namespace dcc {

// One concrete agent of the finite-population problem.
struct Agent {
  int atom = 0;  // index into scenario.atoms
  Vector x0;
};

// Stacked Nn-dimensional system: x = (x₁;…;x_N) with block-diagonal dynamics
// and the social running cost ½xᵀQ̃x. Expanding Σᵢ q/2‖xᵢ − Z·mean‖² gives
// Q̃ = q·[I_{Nn} + (1/N)(11ᵀ ⊗ L)], i.e. q·I plus (q/N)·L in every n×n block.
struct StackedSystem {
  int N = 0, n = 0, m = 0;
  Matrix Atilde;  // Nn×Nn
  Matrix Btilde;  // Nn×Nm
  Matrix Qtilde;  // Nn×Nn
  Matrix BRBt;    // B̃R̃⁻¹B̃ᵀ = blockdiag(BᵢBᵢᵀ/rᵢ)
  Vector Rdiag;   // diag of R̃ (length Nm)
  Vector x0;      // stacked initial state
};

using Assignment = std::vector<int>;

// Backward solution and optimal cost for one destination assignment.
struct AssignmentSolution {
  Scalar cost = 0.0;
  MatrixPath gamma;
  VectorPath beta;
  ScalarPath delta;
};

struct CentralizedSolution {
  Assignment assignment;  // d*, lexicographically smallest among ties
  Scalar cost = 0.0;      // J*
  MatrixPath gamma;
  VectorPath beta;
  ScalarPath delta;
  VectorPath trajectory;  // stacked optimal state path
  VectorPath control;     // stacked control at grid nodes
  std::vector<std::pair<Assignment, Scalar>> cost_table;  // enumeration order
};

StackedSystem assemble(const Scenario& scenario, const std::vector<Agent>& agents);

AssignmentSolution solve_assignment(const StackedSystem& sys,
                                    const Scenario& scenario,
                                    const std::vector<Agent>& agents,
                                    const Assignment& d);

// Simulates the optimal closed loop of an assignment solution.
VectorPath stacked_trajectory(const StackedSystem& sys,
                              const AssignmentSolution& sol,
                              const TimeGrid& grid);
VectorPath stacked_controls(const StackedSystem& sys,
                            const AssignmentSolution& sol,
                            const VectorPath& states);

// Enumerates all l^N assignments in lexicographic order; refuses when l^N
// exceeds scenario.solver.enumeration_cap.
CentralizedSolution exact_social_optimum(const Scenario& scenario,
                                         const std::vector<Agent>& agents,
                                         bool keep_cost_table = false);

struct ReachabilityReport {
  Scalar epsilon = 0.0;
  std::vector<Scalar> weights;       // probed M values
  std::vector<Scalar> max_distance;  // per M: max over agents of terminal
                                     // distance to the nearest destination
  int first_within = -1;             // first schedule index with ≤ ε, or −1
};

// Re-solves the optimum with every terminal weight replaced by each M in the
// schedule. Requires every distinct (A,B) pair to be controllable.
ReachabilityReport reachability_probe(const Scenario& scenario,
                                      const std::vector<Agent>& agents,
                                      Scalar epsilon,
                                      const std::vector<Scalar>& M_schedule);

} // namespace dcc
