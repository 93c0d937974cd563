#include "dcc/scenario.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "dcc/errors.hpp"
#include "dcc/rng.hpp"

namespace dcc {

Matrix covariance_factor(const Matrix& covariance) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
  if (eig.info() != Eigen::Success)
    throw ValidationError("initial.covariance: eigendecomposition failed");
  Vector lambda = eig.eigenvalues();
  for (int i = 0; i < lambda.size(); ++i)
    lambda(i) = lambda(i) > 0.0 ? std::sqrt(lambda(i)) : 0.0;
  return eig.eigenvectors() * lambda.asDiagonal() *
         eig.eigenvectors().transpose();
}

Vector InitialDistribution::mean_vector() const {
  if (kind == InitialKind::gaussian) return mean;
  if (points.empty()) throw ValidationError("initial.points: empty list");
  Vector acc = Vector::Zero(points.front().size());
  for (const Vector& p : points) acc += p;
  return acc / static_cast<Scalar>(points.size());
}

Matrix Scenario::mean_drift() const {
  Matrix acc = Matrix::Zero(state_dim, state_dim);
  for (const AgentType& atom : atoms) acc += atom.weight * atom.A;
  return acc;
}

namespace {

void check_dims(const Matrix& M, int rows, int cols, const std::string& field) {
  if (M.rows() != rows || M.cols() != cols)
    throw ValidationError(field + ": expected " + std::to_string(rows) + "x" +
                          std::to_string(cols) + ", got " +
                          std::to_string(M.rows()) + "x" +
                          std::to_string(M.cols()));
  if (!M.allFinite()) throw ValidationError(field + ": non-finite entries");
}

} // namespace

void Scenario::validate() const {
  if (state_dim < 1) throw ValidationError("n: must be >= 1");
  if (control_dim < 1) throw ValidationError("m: must be >= 1");
  if (num_destinations < 1) throw ValidationError("l: must be >= 1");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ValidationError("horizon: must be finite and positive");
  if (steps < 0) throw ValidationError("steps: must be >= 0");
  if (!(coupling.q >= 0.0) || !std::isfinite(coupling.q))
    throw ValidationError("q: must be finite and >= 0");
  check_dims(coupling.Z, state_dim, state_dim, "Z");

  if (static_cast<int>(destinations.size()) != num_destinations)
    throw ValidationError("destinations: expected " +
                          std::to_string(num_destinations) + " points, got " +
                          std::to_string(destinations.size()));
  for (std::size_t j = 0; j < destinations.size(); ++j) {
    if (destinations[j].size() != state_dim || !destinations[j].allFinite())
      throw ValidationError("destinations[" + std::to_string(j) +
                            "]: expected finite vector of length " +
                            std::to_string(state_dim));
    for (std::size_t k = 0; k < j; ++k)
      if ((destinations[j] - destinations[k]).norm() == 0.0)
        throw ValidationError("destinations: entries " + std::to_string(k) +
                              " and " + std::to_string(j) + " coincide");
  }

  if (atoms.empty()) throw ValidationError("atoms: empty list");
  Scalar total_weight = 0.0;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const std::string prefix = "atoms[" + std::to_string(a) + "]";
    const AgentType& atom = atoms[a];
    check_dims(atom.A, state_dim, state_dim, prefix + ".A");
    check_dims(atom.B, state_dim, control_dim, prefix + ".B");
    if (!(atom.r > 0.0) || !std::isfinite(atom.r))
      throw ValidationError(prefix + ".r: must be finite and positive");
    if (atom.terminal_weights.size() != num_destinations)
      throw ValidationError(prefix + ".M: expected " +
                            std::to_string(num_destinations) + " weights");
    for (int j = 0; j < atom.terminal_weights.size(); ++j)
      if (!(atom.terminal_weights(j) > 0.0) ||
          !std::isfinite(atom.terminal_weights(j)))
        throw ValidationError(prefix + ".M[" + std::to_string(j) +
                              "]: must be finite and positive");
    if (!(atom.weight >= 0.0 && atom.weight <= 1.0))
      throw ValidationError(prefix + ".weight: must lie in [0,1]");
    total_weight += atom.weight;
  }
  if (std::abs(total_weight - 1.0) > 1e-12)
    throw ValidationError("atoms: weights sum to " +
                          std::to_string(total_weight) + ", expected 1");

  if (initial.kind == InitialKind::gaussian) {
    if (initial.mean.size() != state_dim || !initial.mean.allFinite())
      throw ValidationError("initial.mean: expected finite vector of length " +
                            std::to_string(state_dim));
    check_dims(initial.covariance, state_dim, state_dim, "initial.covariance");
    if (!initial.covariance.isApprox(initial.covariance.transpose(), 1e-12))
      throw ValidationError("initial.covariance: not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(initial.covariance);
    if (eig.eigenvalues().minCoeff() < -1e-10)
      throw ValidationError("initial.covariance: not positive semidefinite");
  } else {
    if (initial.points.empty()) throw ValidationError("initial.points: empty list");
    for (std::size_t i = 0; i < initial.points.size(); ++i)
      if (initial.points[i].size() != state_dim || !initial.points[i].allFinite())
        throw ValidationError("initial.points[" + std::to_string(i) +
                              "]: expected finite vector of length " +
                              std::to_string(state_dim));
  }

  if (!(solver.tol > 0.0)) throw ValidationError("solver.tol: must be positive");
  if (solver.max_iter < 1) throw ValidationError("solver.max_iter: must be >= 1");
  if (!(solver.damping > 0.0 && solver.damping <= 1.0))
    throw ValidationError("solver.damping: must lie in (0,1]");
  if (solver.mc_samples < 1)
    throw ValidationError("solver.mc_samples: must be >= 1");
  if (solver.enumeration_cap < 1)
    throw ValidationError("solver.enumeration_cap: must be >= 1");
}

} // namespace dcc
