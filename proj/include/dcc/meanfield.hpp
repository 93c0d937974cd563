#pragma once

#include <cstdint>
#include <vector>

#include "dcc/riccati.hpp"
#include "dcc/scenario.hpp"

namespace dcc {

// Weighted point set standing in for the initial distribution inside every
// expectation: the points themselves for an explicit list, a fixed-seed
// sample for a Gaussian. Using one measure everywhere keeps the fixed point,
// the fractions, and the cost formula mutually consistent.
struct EmpiricalMeasure {
  std::vector<Vector> points;
  std::vector<Scalar> weights;  // sum to 1

  static EmpiricalMeasure from_initial(const InitialDistribution& initial,
                                       int mc_samples, std::uint64_t seed);
  [[nodiscard]] Vector mean() const;
  [[nodiscard]] Scalar mean_norm() const;       // E‖x⁰‖
  [[nodiscard]] Scalar second_moment() const;   // E‖x⁰‖²
};

// Pairwise quadric rows: x⁰ lies in basin j iff
// ½x⁰ᵀ(Γ_j(0)−Γ_k(0))x⁰ + (β_j(0)−β_k(0))ᵀx⁰ + δ_j(0)−δ_k(0) ≤ 0 for all k.
// Ties (boundary points) go to the smaller index.
struct BasinClassifier {
  struct Row {
    Matrix quad;
    Vector lin;
    Scalar offset = 0.0;
    [[nodiscard]] Scalar eval(const Vector& x) const {
      return 0.5 * x.dot(quad * x) + lin.dot(x) + offset;
    }
  };
  int num_destinations = 0;
  std::vector<std::vector<Row>> rows;  // [atom][j*l + k]

  [[nodiscard]] const Row& row(int atom, int j, int k) const {
    return rows[atom][j * num_destinations + k];
  }
  [[nodiscard]] int classify(int atom, const Vector& x0) const;
};

BasinClassifier compute_basins(
    const std::vector<std::vector<RiccatiBundle>>& bundles);

struct MeanFieldSolution {
  VectorPath xbar;
  std::vector<std::vector<RiccatiBundle>> bundles;   // [atom][j], against xbar
  std::vector<std::vector<MatrixPath>> homogeneous;  // closed-loop H per pair
  BasinClassifier classifier;
  EmpiricalMeasure measure;
  Vector fractions;  // population mass per destination
  Scalar residual = 0.0;
  int iterations = 0;
  std::vector<Scalar> residual_history;
};

// One application of the mean operator: best responses against xbar,
// averaged over the measure and the type atoms. Affinity of the closed loop
// in x⁰ reduces the average to per-basin first moments, so the cost is one
// offset solve and one forced-response solve per (atom, destination).
VectorPath apply_G(const VectorPath& xbar, const Scenario& scenario,
                   const EmpiricalMeasure& measure, const TimeGrid& grid);

// Damped Picard iteration x̄ ← (1−α)x̄ + α·G(x̄) from the uncontrolled
// propagation of the initial mean. α is solver.damping, promoted to 1 when
// q = 0 (G is then constant and one update lands exactly on the fixed
// point). The returned residual comes from a fresh application of G at the
// returned path.
MeanFieldSolution find_fixed_point(const Scenario& scenario);

struct AssumptionReport {
  Scalar k1 = 0.0, k2 = 0.0, k3 = 0.0;
  Scalar horizon_bound = 0.0;  // √(max(k₁+k₂, k₃))·T, needs < π/2
  bool horizon_ok = false;
  Vector coupling_eigenvalues;  // of L
  bool coupling_ok = false;     // L ⪰ 0
  Scalar initial_second_moment = 0.0;
  Scalar max_transition_condition = 1.0;
  int grid_stride = 1;  // decimation used for the triple-maximum bound
};

// Contraction and convexity diagnostics. Reports only; callers decide
// whether to proceed (the solver itself always proceeds).
AssumptionReport check_assumptions(const Scenario& scenario);

// Limiting per-agent social cost at the fixed point. Cooperative mode:
// −½∫q x̄ᵀLx̄ dt plus the expected chosen branch cost. Noncooperative mode
// restores the ½q‖Zx̄‖² constant the auxiliary cost drops, giving the
// realized per-agent cost limit under the noncooperative strategies.
Scalar asymptotic_social_cost(const MeanFieldSolution& sol,
                              const Scenario& scenario);

} // namespace dcc
