#pragma once

#include <vector>

#include "dcc/path.hpp"
#include "dcc/scenario.hpp"

namespace dcc {

// Backward value-function data for one (type, destination) pair against a
// given mean path: V(t,x) = ½xᵀΓ(t)x + β(t)ᵀx + δ(t) is the optimal cost-to-go
// of the tracking problem committed to destination j.
struct RiccatiBundle {
  int destination = 0;       // j
  Matrix A;                  // copies of the type data the feedback law needs
  Matrix B;
  Scalar r = 1.0;
  Scalar terminal_weight = 0.0;  // M_j
  Vector target;                 // p_j
  MatrixPath gamma;
  VectorPath beta;
  ScalarPath delta;

  // u = −(1/r)Bᵀ(Γ(t)x + β(t))
  [[nodiscard]] Vector control(Scalar t, const Vector& x) const;
  [[nodiscard]] Vector control_at(int k, const Vector& x) const;
  // ½x₀ᵀΓ(0)x₀ + β(0)ᵀx₀ + δ(0)
  [[nodiscard]] Scalar cost(const Vector& x0) const;
};

// Γ̇ = (1/r)ΓBBᵀΓ − ΓA − AᵀΓ − qI backward from Γ(T) = M_j·I, symmetrized
// after every step.
MatrixPath solve_gamma(const AgentType& atom, int j, Scalar q, const TimeGrid& grid);

// β̇ = ((1/r)ΓBBᵀ − Aᵀ)β − F·x̄ backward from β(T) = −M_j·p_j, jointly with
// δ̇ = (1/(2r))βᵀBBᵀβ from δ(T) = ½M_j·p_jᵀp_j. F is coupling.offset_forcing().
struct OffsetPair {
  VectorPath beta;
  ScalarPath delta;
};
OffsetPair solve_offset(const AgentType& atom, int j, const MatrixPath& gamma,
                        const VectorPath& xbar, const CouplingSpec& coupling,
                        const std::vector<Vector>& destinations,
                        const TimeGrid& grid);

RiccatiBundle solve_bundle(const AgentType& atom, int j, const MatrixPath& gamma,
                           const VectorPath& xbar, const CouplingSpec& coupling,
                           const std::vector<Vector>& destinations,
                           const TimeGrid& grid);

// Φ(t,0) for dΦ/dt = Π(t)Φ, Π = (1/r)ΓBBᵀ − Aᵀ, with Φ(0,0) = I, plus node
// inverses so that Φ(t_a, t_b) = Φ(t_a,0)·Φ(t_b,0)⁻¹ without storing K²
// matrices. max_condition records the worst spectral condition number met
// while forming the inverses.
struct TransitionPath {
  MatrixPath phi0;
  MatrixPath inv0;
  Scalar max_condition = 1.0;

  [[nodiscard]] Matrix eval(int k_t, int k_eta) const {
    return phi0[k_t] * inv0[k_eta];
  }
};
TransitionPath solve_transition(const AgentType& atom, const MatrixPath& gamma,
                                const TimeGrid& grid);

// Closed-loop pieces of the best response ẋ = (A − (1/r)BBᵀΓ)x − (1/r)BBᵀβ:
// the homogeneous propagator H(t) (which equals Φ(0,t)ᵀ, no inversion
// involved) and the zero-initial-state response to the offset term.
MatrixPath closed_loop_homogeneous(const AgentType& atom, const MatrixPath& gamma,
                                   const TimeGrid& grid);
VectorPath closed_loop_forced(const AgentType& atom, const MatrixPath& gamma,
                              const VectorPath& beta, const TimeGrid& grid);

Scalar branch_cost(const RiccatiBundle& bundle, const Vector& x0);

VectorPath closed_loop_trajectory(const RiccatiBundle& bundle, const Vector& x0,
                                  const TimeGrid& grid);

// Node-wise feedback controls along a state path.
VectorPath control_path(const RiccatiBundle& bundle, const VectorPath& states);

} // namespace dcc
