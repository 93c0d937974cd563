#include "dcc/riccati.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <string>

#include "dcc/errors.hpp"
#include "dcc/integrate.hpp"

namespace dcc {

namespace {

void check_destination(const AgentType& atom, int j) {
  if (j < 0 || j >= atom.terminal_weights.size())
    throw ValidationError("destination index " + std::to_string(j) +
                          " outside 0.." +
                          std::to_string(atom.terminal_weights.size() - 1));
}

} // namespace

Vector RiccatiBundle::control(Scalar t, const Vector& x) const {
  return -(1.0 / r) * B.transpose() * (gamma.at(t) * x + beta.at(t));
}

Vector RiccatiBundle::control_at(int k, const Vector& x) const {
  return -(1.0 / r) * B.transpose() * (gamma[k] * x + beta[k]);
}

Scalar RiccatiBundle::cost(const Vector& x0) const {
  return 0.5 * x0.dot(gamma[0] * x0) + beta[0].dot(x0) + delta[0];
}

MatrixPath solve_gamma(const AgentType& atom, int j, Scalar q,
                       const TimeGrid& grid) {
  check_destination(atom, j);
  const int n = static_cast<int>(atom.A.rows());
  const Matrix S = atom.B * atom.B.transpose() / atom.r;  // BBᵀ/r
  const Matrix Q = q * Matrix::Identity(n, n);
  const Matrix At = atom.A.transpose();
  const Matrix terminal =
      atom.terminal_weights(j) * Matrix::Identity(n, n);

  auto rhs = [&](Scalar, const Matrix& G) -> Matrix {
    return G * S * G - G * atom.A - At * G - Q;
  };
  auto symmetrize = [](Matrix& G) { G = 0.5 * (G + G.transpose()).eval(); };
  return integrate_backward_projected(rhs, terminal, grid, symmetrize);
}

OffsetPair solve_offset(const AgentType& atom, int j, const MatrixPath& gamma,
                        const VectorPath& xbar, const CouplingSpec& coupling,
                        const std::vector<Vector>& destinations,
                        const TimeGrid& grid) {
  check_destination(atom, j);
  if (!(gamma.grid == grid) || !(xbar.grid == grid))
    throw ValidationError("offset solve: gamma/xbar grid mismatch");
  const int n = static_cast<int>(atom.A.rows());
  const Matrix S = atom.B * atom.B.transpose() / atom.r;
  const Matrix At = atom.A.transpose();
  const Matrix F = coupling.offset_forcing();
  const Vector& p = destinations[j];
  const Scalar M = atom.terminal_weights(j);

  // Joint state y = [β; δ] so δ picks up β at the RK4 stage values.
  Vector yT(n + 1);
  yT.head(n) = -M * p;
  yT(n) = 0.5 * M * p.squaredNorm();

  auto rhs = [&](Scalar t, const Vector& y) -> Vector {
    const Vector beta = y.head(n);
    Vector dy(n + 1);
    dy.head(n) = gamma.at(t) * (S * beta) - At * beta - F * xbar.at(t);
    dy(n) = 0.5 * beta.dot(S * beta);
    return dy;
  };
  VectorPath joint = integrate_backward(rhs, yT, grid);

  OffsetPair out;
  std::vector<Vector> betas(grid.size());
  std::vector<Scalar> deltas(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    betas[k] = joint[k].head(n);
    deltas[k] = joint[k](n);
  }
  out.beta = VectorPath(grid, std::move(betas));
  out.delta = ScalarPath(grid, std::move(deltas));
  return out;
}

RiccatiBundle solve_bundle(const AgentType& atom, int j, const MatrixPath& gamma,
                           const VectorPath& xbar, const CouplingSpec& coupling,
                           const std::vector<Vector>& destinations,
                           const TimeGrid& grid) {
  RiccatiBundle bundle;
  bundle.destination = j;
  bundle.A = atom.A;
  bundle.B = atom.B;
  bundle.r = atom.r;
  bundle.terminal_weight = atom.terminal_weights(j);
  bundle.target = destinations[j];
  bundle.gamma = gamma;
  OffsetPair offset =
      solve_offset(atom, j, gamma, xbar, coupling, destinations, grid);
  bundle.beta = std::move(offset.beta);
  bundle.delta = std::move(offset.delta);
  return bundle;
}

TransitionPath solve_transition(const AgentType& atom, const MatrixPath& gamma,
                                const TimeGrid& grid) {
  const int n = static_cast<int>(atom.A.rows());
  const Matrix S = atom.B * atom.B.transpose() / atom.r;
  const Matrix At = atom.A.transpose();

  auto rhs = [&](Scalar t, const Matrix& P) -> Matrix {
    return (gamma.at(t) * S - At) * P;  // Π(t)·Φ
  };
  TransitionPath out;
  out.phi0 = integrate_forward(rhs, Matrix(Matrix::Identity(n, n)), grid);

  std::vector<Matrix> inverses(grid.size());
  Scalar worst = 1.0;
  for (int k = 0; k < grid.size(); ++k) {
    Eigen::JacobiSVD<Matrix> svd(out.phi0[k],
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Scalar smin = svd.singularValues().minCoeff();
    if (smin <= 0.0)
      throw IntegrationError("transition matrix singular at node " +
                                 std::to_string(k),
                             k);
    worst = std::max(worst, svd.singularValues().maxCoeff() / smin);
    inverses[k] = out.phi0[k].partialPivLu().inverse();
  }
  out.inv0 = MatrixPath(grid, std::move(inverses));
  out.max_condition = worst;
  return out;
}

MatrixPath closed_loop_homogeneous(const AgentType& atom, const MatrixPath& gamma,
                                   const TimeGrid& grid) {
  const int n = static_cast<int>(atom.A.rows());
  const Matrix S = atom.B * atom.B.transpose() / atom.r;
  auto rhs = [&](Scalar t, const Matrix& H) -> Matrix {
    return (atom.A - S * gamma.at(t)) * H;
  };
  return integrate_forward(rhs, Matrix(Matrix::Identity(n, n)), grid);
}

VectorPath closed_loop_forced(const AgentType& atom, const MatrixPath& gamma,
                              const VectorPath& beta, const TimeGrid& grid) {
  const int n = static_cast<int>(atom.A.rows());
  const Matrix S = atom.B * atom.B.transpose() / atom.r;
  auto rhs = [&](Scalar t, const Vector& b) -> Vector {
    return (atom.A - S * gamma.at(t)) * b - S * beta.at(t);
  };
  return integrate_forward(rhs, Vector(Vector::Zero(n)), grid);
}

Scalar branch_cost(const RiccatiBundle& bundle, const Vector& x0) {
  return bundle.cost(x0);
}

VectorPath closed_loop_trajectory(const RiccatiBundle& bundle, const Vector& x0,
                                  const TimeGrid& grid) {
  const Matrix S = bundle.B * bundle.B.transpose() / bundle.r;
  auto rhs = [&](Scalar t, const Vector& x) -> Vector {
    return bundle.A * x - S * (bundle.gamma.at(t) * x + bundle.beta.at(t));
  };
  return integrate_forward(rhs, x0, grid);
}

VectorPath control_path(const RiccatiBundle& bundle, const VectorPath& states) {
  std::vector<Vector> controls(states.grid.size());
  for (int k = 0; k < states.grid.size(); ++k)
    controls[k] = bundle.control_at(k, states[k]);
  return VectorPath(states.grid, std::move(controls));
}

} // namespace dcc
