#pragma once

#include <cstdint>
#include <vector>

#include "dcc/time_grid.hpp"
#include "dcc/types.hpp"

namespace dcc {

enum class CouplingMode { cooperative, noncooperative };

// Social coupling. Each agent pays q/2‖x_i − Z·mean‖² along the path; summing
// over the population and expanding turns this into the per-agent running
// cost q/2‖x‖² + q·meanᵀL x with L = ZᵀZ − Z − Zᵀ.
//
// The noncooperative mode keeps every agent minimizing its own cost against
// the mean instead of sharing the social cost; the only change downstream is
// the forcing matrix of the offset equation (tracking target Z·mean).
struct CouplingSpec {
  Scalar q = 0.0;
  Matrix Z;
  CouplingMode mode = CouplingMode::cooperative;

  // L = ZᵀZ − Z − Zᵀ, symmetric by construction.
  [[nodiscard]] Matrix mean_coupling() const {
    return Z.transpose() * Z - Z - Z.transpose();
  }

  // F in the offset equation β̇ = Πβ − F·x̄(t):
  // cooperative F = qL, noncooperative F = −qZ.
  [[nodiscard]] Matrix offset_forcing() const {
    if (mode == CouplingMode::cooperative) return q * mean_coupling();
    return Matrix(-q * Z);
  }
};

// One point of the finite type distribution: dynamics, effort weight, and the
// terminal weights M_j toward each destination.
struct AgentType {
  Matrix A;                 // n×n drift
  Matrix B;                 // n×m input map
  Scalar r = 1.0;           // control effort weight, > 0
  Vector terminal_weights;  // length l, entries > 0
  Scalar weight = 1.0;      // mass of this type
};

enum class InitialKind { gaussian, points };

// Initial state distribution: a Gaussian (sampled with the scenario seed
// where an empirical measure is needed) or an explicit point list with
// uniform weights.
struct InitialDistribution {
  InitialKind kind = InitialKind::gaussian;
  Vector mean;
  Matrix covariance;
  std::vector<Vector> points;

  [[nodiscard]] Vector mean_vector() const;
};

struct SolverConfig {
  Scalar tol = 1e-3;          // fixed-point sup-norm residual target
  int max_iter = 200;
  Scalar damping = 0.5;       // Picard damping α
  int mc_samples = 10000;     // empirical measure size for Gaussian P₀
  long enumeration_cap = 4096;
};

struct Scenario {
  int state_dim = 0;         // n
  int control_dim = 0;       // m
  int num_destinations = 0;  // l
  Scalar horizon = 1.0;      // T
  int steps = 0;             // K; 0 picks the default 1000 (dt = 1e-3·T)
  CouplingSpec coupling;
  std::vector<Vector> destinations;  // p_j
  std::vector<AgentType> atoms;
  InitialDistribution initial;
  SolverConfig solver;
  std::uint64_t seed = 0;

  [[nodiscard]] TimeGrid grid() const {
    return TimeGrid(horizon, steps > 0 ? steps : 1000);
  }

  // Weight-averaged drift, used for the fixed-point initial guess.
  [[nodiscard]] Matrix mean_drift() const;

  // Throws ValidationError naming the offending field.
  void validate() const;
};

} // namespace dcc
