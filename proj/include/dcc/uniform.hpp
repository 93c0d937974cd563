#pragma once

#include <dcc/meanfield.hpp>
#include <dcc/riccati.hpp>
#include <dcc/scenario.hpp>

namespace dcc {

// Fast path for a homogeneous population with two destinations that carry the
// same terminal weight.  All agents then share one Riccati solution, the two
// candidate offsets differ only through the targets, and the indifference set
// between the destinations is a halfspace instead of a general quadric.
bool uniform_fast_path_eligible(const Scenario& scenario);

// Basis representation of the affine map lambda -> mean path.  Writing the
// fixed point as xbar(t) = R1(t) mu0 + R2(t) p_lambda, each column of R1/R2 is
// itself a fixed point of the mean dynamics with a basis vector in place of
// the initial mean (R1) or the weighted target (R2).
struct UniformPathBasis {
  MatrixPath R1;
  MatrixPath R2;
  Vector mu0;
  MatrixPath gamma;        // shared across destinations
  MatrixPath homogeneous;  // closed-loop transition, x(t) = H(t) x(0) part
  int iterations = 0;      // worst case over basis columns
};

UniformPathBasis solve_path_basis(const Scenario& scenario);

// Indifference halfspace {x : a'x <= c} for preferring destination 0.
struct HalfspaceSplit {
  Vector a;
  Scalar c = 0;
};

HalfspaceSplit halfspace_split(const Scenario& scenario,
                               const UniformPathBasis& basis,
                               const Vector& lambda);

// Fraction of the initial distribution that prefers each destination when the
// population plans against the mean path generated by lambda.  Gaussian
// initial laws are split analytically, point laws by exact counting.
Vector fraction_map(const Vector& lambda, const Scenario& scenario,
                    const UniformPathBasis& basis);

struct LambdaSolution {
  Vector lambda;        // fixed point of the fraction map
  VectorPath xbar;      // R1 mu0 + R2 p_lambda
  Scalar residual = 0;  // |F(lambda)_0 - lambda_0| at the returned point
  int iterations = 0;   // bisection steps
  bool bracket_ok = true;
  UniformPathBasis basis;
};

// Scalar bisection on g(lambda) = F(lambda)_0 - lambda_0 over [0, 1].
LambdaSolution solve_lambda_bisection(const Scenario& scenario, Scalar tol);

// Expand a lambda solution into the same bundle/classifier/measure form the
// generic solver returns, so downstream consumers do not care which path
// produced the mean field.
MeanFieldSolution solution_from_lambda(const Scenario& scenario,
                                       const LambdaSolution& lambda_solution);

}  // namespace dcc
