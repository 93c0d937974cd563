#include "dcc/meanfield.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <string>

#include "dcc/errors.hpp"
#include "dcc/integrate.hpp"
#include "dcc/rng.hpp"

namespace dcc {

EmpiricalMeasure EmpiricalMeasure::from_initial(
    const InitialDistribution& initial, int mc_samples, std::uint64_t seed) {
  EmpiricalMeasure out;
  if (initial.kind == InitialKind::points) {
    out.points = initial.points;
    out.weights.assign(initial.points.size(),
                       1.0 / static_cast<Scalar>(initial.points.size()));
    return out;
  }
  const int n = static_cast<int>(initial.mean.size());
  const Matrix factor = covariance_factor(initial.covariance);
  Rng rng(derive_seed(seed, stream_mean_field_samples));
  out.points.reserve(mc_samples);
  for (int s = 0; s < mc_samples; ++s)
    out.points.push_back(initial.mean + factor * rng.normal_vector(n));
  out.weights.assign(mc_samples, 1.0 / static_cast<Scalar>(mc_samples));
  return out;
}

Vector EmpiricalMeasure::mean() const {
  Vector acc = Vector::Zero(points.front().size());
  for (std::size_t s = 0; s < points.size(); ++s) acc += weights[s] * points[s];
  return acc;
}

Scalar EmpiricalMeasure::mean_norm() const {
  Scalar acc = 0.0;
  for (std::size_t s = 0; s < points.size(); ++s)
    acc += weights[s] * points[s].norm();
  return acc;
}

Scalar EmpiricalMeasure::second_moment() const {
  Scalar acc = 0.0;
  for (std::size_t s = 0; s < points.size(); ++s)
    acc += weights[s] * points[s].squaredNorm();
  return acc;
}

int BasinClassifier::classify(int atom, const Vector& x0) const {
  const int l = num_destinations;
  for (int j = 0; j < l; ++j) {
    bool inside = true;
    for (int k = 0; k < l && inside; ++k) {
      if (k == j) continue;
      inside = row(atom, j, k).eval(x0) <= 0.0;
    }
    if (inside) return j;
  }
  // Roundoff can in principle produce a strict pairwise cycle; fall back to
  // the destination whose worst pairwise margin is smallest.
  int best = 0;
  Scalar best_margin = std::numeric_limits<Scalar>::infinity();
  for (int j = 0; j < l; ++j) {
    Scalar margin = -std::numeric_limits<Scalar>::infinity();
    for (int k = 0; k < l; ++k) {
      if (k == j) continue;
      margin = std::max(margin, row(atom, j, k).eval(x0));
    }
    if (margin < best_margin) {
      best_margin = margin;
      best = j;
    }
  }
  return best;
}

BasinClassifier compute_basins(
    const std::vector<std::vector<RiccatiBundle>>& bundles) {
  BasinClassifier classifier;
  classifier.num_destinations =
      bundles.empty() ? 0 : static_cast<int>(bundles.front().size());
  const int l = classifier.num_destinations;
  classifier.rows.resize(bundles.size());
  for (std::size_t a = 0; a < bundles.size(); ++a) {
    classifier.rows[a].resize(static_cast<std::size_t>(l) * l);
    for (int j = 0; j < l; ++j)
      for (int k = 0; k < l; ++k) {
        BasinClassifier::Row& row = classifier.rows[a][j * l + k];
        row.quad = bundles[a][j].gamma[0] - bundles[a][k].gamma[0];
        row.lin = bundles[a][j].beta[0] - bundles[a][k].beta[0];
        row.offset = bundles[a][j].delta[0] - bundles[a][k].delta[0];
      }
  }
  return classifier;
}

namespace {

// x̄-independent pieces, reused across Picard iterations: Γ and the
// closed-loop homogeneous propagator per (atom, destination).
struct Kernels {
  std::vector<std::vector<MatrixPath>> gamma;
  std::vector<std::vector<MatrixPath>> hom;
};

Kernels solve_kernels(const Scenario& scenario, const TimeGrid& grid) {
  Kernels kernels;
  kernels.gamma.resize(scenario.atoms.size());
  kernels.hom.resize(scenario.atoms.size());
  for (std::size_t a = 0; a < scenario.atoms.size(); ++a) {
    const AgentType& atom = scenario.atoms[a];
    for (int j = 0; j < scenario.num_destinations; ++j) {
      kernels.gamma[a].push_back(
          solve_gamma(atom, j, scenario.coupling.q, grid));
      kernels.hom[a].push_back(
          closed_loop_homogeneous(atom, kernels.gamma[a].back(), grid));
    }
  }
  return kernels;
}

// Basin-partitioned measure statistics per atom. The closed loop is affine
// in x⁰ inside each basin, so the population average needs only these.
struct BasinAggregates {
  std::vector<std::vector<Scalar>> mass;    // [atom][j]
  std::vector<std::vector<Vector>> moment;  // [atom][j], first moments
};

BasinAggregates aggregate_basins(const BasinClassifier& classifier,
                                 const EmpiricalMeasure& measure,
                                 const Scenario& scenario) {
  const int l = scenario.num_destinations;
  BasinAggregates agg;
  agg.mass.assign(scenario.atoms.size(), std::vector<Scalar>(l, 0.0));
  agg.moment.assign(scenario.atoms.size(),
                    std::vector<Vector>(l, Vector::Zero(scenario.state_dim)));
  for (std::size_t a = 0; a < scenario.atoms.size(); ++a) {
    for (std::size_t s = 0; s < measure.points.size(); ++s) {
      const int j = classifier.classify(static_cast<int>(a), measure.points[s]);
      agg.mass[a][j] += measure.weights[s];
      agg.moment[a][j] += measure.weights[s] * measure.points[s];
    }
  }
  return agg;
}

// One application of G given precomputed kernels. Optionally hands back the
// bundles, classifier and fractions it computed along the way. When `frozen`
// is given, the sample-to-basin assignment is taken from it instead of being
// recomputed, which makes the map affine in xbar.
VectorPath apply_with_kernels(const Kernels& kernels, const VectorPath& xbar,
                              const Scenario& scenario,
                              const EmpiricalMeasure& measure,
                              const TimeGrid& grid,
                              std::vector<std::vector<RiccatiBundle>>* out_bundles,
                              BasinClassifier* out_classifier,
                              Vector* out_fractions,
                              const BasinAggregates* frozen = nullptr) {
  const int n = scenario.state_dim;
  const int l = scenario.num_destinations;

  std::vector<std::vector<RiccatiBundle>> bundles(scenario.atoms.size());
  for (std::size_t a = 0; a < scenario.atoms.size(); ++a)
    for (int j = 0; j < l; ++j)
      bundles[a].push_back(solve_bundle(scenario.atoms[a], j,
                                        kernels.gamma[a][j], xbar,
                                        scenario.coupling,
                                        scenario.destinations, grid));

  BasinClassifier classifier;
  BasinAggregates computed;
  if (!frozen) {
    classifier = compute_basins(bundles);
    computed = aggregate_basins(classifier, measure, scenario);
  }
  const BasinAggregates& agg = frozen ? *frozen : computed;

  std::vector<Vector> values(grid.size(), Vector::Zero(n));
  Vector fractions = Vector::Zero(l);
  for (std::size_t a = 0; a < scenario.atoms.size(); ++a) {
    const AgentType& atom = scenario.atoms[a];
    for (int j = 0; j < l; ++j) {
      fractions(j) += atom.weight * agg.mass[a][j];
      if (agg.mass[a][j] == 0.0 && agg.moment[a][j].isZero(0.0)) continue;
      const VectorPath forced = closed_loop_forced(
          atom, kernels.gamma[a][j], bundles[a][j].beta, grid);
      const MatrixPath& hom = kernels.hom[a][j];
      for (int k = 0; k < grid.size(); ++k)
        values[k] += atom.weight *
                     (hom[k] * agg.moment[a][j] + agg.mass[a][j] * forced[k]);
    }
  }

  if (out_bundles) *out_bundles = std::move(bundles);
  if (out_classifier) *out_classifier = std::move(classifier);
  if (out_fractions) *out_fractions = std::move(fractions);
  return VectorPath(grid, std::move(values));
}

VectorPath initial_guess(const Scenario& scenario,
                         const EmpiricalMeasure& measure,
                         const TimeGrid& grid) {
  const Matrix drift = scenario.mean_drift();
  auto rhs = [&](Scalar, const Vector& x) -> Vector { return drift * x; };
  return integrate_forward(rhs, measure.mean(), grid);
}

} // namespace

VectorPath apply_G(const VectorPath& xbar, const Scenario& scenario,
                   const EmpiricalMeasure& measure, const TimeGrid& grid) {
  const Kernels kernels = solve_kernels(scenario, grid);
  return apply_with_kernels(kernels, xbar, scenario, measure, grid, nullptr,
                            nullptr, nullptr);
}

MeanFieldSolution find_fixed_point(const Scenario& scenario) {
  const TimeGrid grid = scenario.grid();
  MeanFieldSolution sol;
  sol.measure = EmpiricalMeasure::from_initial(
      scenario.initial, scenario.solver.mc_samples, scenario.seed);

  const Kernels kernels = solve_kernels(scenario, grid);
  const Scalar alpha =
      scenario.coupling.q == 0.0 ? 1.0 : scenario.solver.damping;
  const Scalar tol = scenario.solver.tol;
  const int max_iter = scenario.solver.max_iter;

  VectorPath x = initial_guess(scenario, sol.measure, grid);
  int updates = 0;
  Scalar damp = alpha;
  VectorPath best_x = x;
  Scalar best_res = std::numeric_limits<Scalar>::infinity();
  int since_improvement = 0;

  const auto give_up = [&](Scalar res) {
    throw ConvergenceError(
        "fixed-point iteration: residual " + std::to_string(res) +
            " above tol " + std::to_string(tol) + " after " +
            std::to_string(updates) + " updates",
        sol.residual_history);
  };

  while (true) {
    VectorPath g = apply_with_kernels(kernels, x, scenario, sol.measure, grid,
                                      &sol.bundles, &sol.classifier,
                                      &sol.fractions);
    Scalar res = sup_distance(g, x);
    sol.residual_history.push_back(res);
    if (res <= tol) {
      sol.xbar = std::move(x);
      sol.residual = res;
      sol.iterations = updates;
      sol.homogeneous = kernels.hom;
      return sol;
    }
    if (updates >= max_iter) give_up(res);

    if (res < 0.98 * best_res) {
      best_res = res;
      best_x = x;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }

    // The sample-to-basin assignment jumps discretely as the mean path
    // moves, so near the fixed point the damped iteration can fall into a
    // small limit cycle of boundary samples flipping back and forth. On a
    // plateau, freeze the assignment (the map is then affine, and the damped
    // iteration on it converges geometrically) and re-classify at the frozen
    // solution. A self-consistent assignment ends the search; otherwise keep
    // the refined iterate only if it beat the best residual so far, and
    // shrink the damping to tame the flip oscillation.
    if (since_improvement >= 8 && updates + 1 < max_iter) {
      const BasinAggregates frozen =
          aggregate_basins(sol.classifier, sol.measure, scenario);
      while (updates < max_iter) {
        const VectorPath fg =
            apply_with_kernels(kernels, x, scenario, sol.measure, grid,
                               nullptr, nullptr, nullptr, &frozen);
        const Scalar fres = sup_distance(fg, x);
        sol.residual_history.push_back(fres);
        if (fres <= 0.1 * tol) break;
        for (int k = 0; k < grid.size(); ++k)
          x[k] = (1.0 - damp) * x[k] + damp * fg[k];
        ++updates;
      }

      g = apply_with_kernels(kernels, x, scenario, sol.measure, grid,
                             &sol.bundles, &sol.classifier, &sol.fractions);
      res = sup_distance(g, x);
      sol.residual_history.push_back(res);
      if (res <= tol) {
        sol.xbar = std::move(x);
        sol.residual = res;
        sol.iterations = updates;
        sol.homogeneous = kernels.hom;
        return sol;
      }
      if (updates >= max_iter) give_up(res);

      if (res < best_res) {
        best_res = res;
        best_x = x;
      } else {
        x = best_x;
        g = apply_with_kernels(kernels, x, scenario, sol.measure, grid,
                               &sol.bundles, &sol.classifier, &sol.fractions);
        res = sup_distance(g, x);
        sol.residual_history.push_back(res);
      }
      damp = std::max(damp * 0.5, alpha / 64.0);
      since_improvement = 0;
    }

    for (int k = 0; k < grid.size(); ++k)
      x[k] = (1.0 - damp) * x[k] + damp * g[k];
    ++updates;
  }
}

namespace {

Scalar spectral_norm(const Matrix& M) {
  return Eigen::JacobiSVD<Matrix>(M).singularValues().maxCoeff();
}

} // namespace

AssumptionReport check_assumptions(const Scenario& scenario) {
  const TimeGrid grid = scenario.grid();
  AssumptionReport report;

  const Matrix L = scenario.coupling.mean_coupling();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (L + L.transpose()));
  report.coupling_eigenvalues = eig.eigenvalues();
  report.coupling_ok = report.coupling_eigenvalues.minCoeff() >= -1e-12;

  const EmpiricalMeasure measure = EmpiricalMeasure::from_initial(
      scenario.initial, scenario.solver.mc_samples, scenario.seed);
  if (scenario.initial.kind == InitialKind::gaussian)
    report.initial_second_moment = scenario.initial.mean.squaredNorm() +
                                   scenario.initial.covariance.trace();
  else
    report.initial_second_moment = measure.second_moment();

  // Triple maxima are evaluated on a decimated grid; the factors below are
  // smooth so the stride costs accuracy only in the last digits of a bound
  // that is itself a sufficient condition.
  const int stride = std::max(1, grid.steps / 64);
  report.grid_stride = stride;

  Scalar k1_sum = 0.0, k2_sum = 0.0, k3_sum = 0.0;
  for (int j = 0; j < scenario.num_destinations; ++j) {
    Scalar k1_max = 0.0, k2_max = 0.0, k3_max = 0.0;
    for (const AgentType& atom : scenario.atoms) {
      const MatrixPath gamma = solve_gamma(atom, j, scenario.coupling.q, grid);
      const TransitionPath trans = solve_transition(atom, gamma, grid);
      report.max_transition_condition =
          std::max(report.max_transition_condition, trans.max_condition);

      // k₁ factor: ‖Φ(0,t)‖ = ‖Φ(t,0)⁻¹‖.
      for (int k = 0; k < grid.size(); ++k)
        k1_max = std::max(k1_max, spectral_norm(trans.inv0[k]));

      // k₂ integrand collapses to Φ(t,0)⁻ᵀ·W(t)·Φ(T,0)⁻¹·p_j with the
      // cumulative Gramian W(t) = ∫₀ᵗ Φ(σ,0)ᵀBBᵀΦ(σ,0) dσ.
      const Scalar Mj = atom.terminal_weights(j);
      const Vector tail = trans.inv0[grid.steps] * scenario.destinations[j];
      Matrix W = Matrix::Zero(scenario.state_dim, scenario.state_dim);
      Matrix prev = trans.phi0[0].transpose() * atom.B * atom.B.transpose() *
                    trans.phi0[0];
      for (int k = 0; k < grid.size(); ++k) {
        if (k > 0) {
          const Matrix cur = trans.phi0[k].transpose() * atom.B *
                             atom.B.transpose() * trans.phi0[k];
          W += 0.5 * (grid.time(k) - grid.time(k - 1)) * (prev + cur);
          prev = cur;
        }
        const Vector v =
            (Mj / atom.r) * (trans.inv0[k].transpose() * (W * tail));
        k2_max = std::max(k2_max, v.norm());
      }

      // k₃ factor: Ψ(σ,t,σ,τ)L = Φ(t,0)⁻ᵀ(Φ(σ,0)ᵀB)(BᵀΦ(σ,0))(Φ(τ,0)⁻¹L).
      if (scenario.coupling.q > 0.0) {
        std::vector<int> nodes;
        for (int k = 0; k < grid.size(); k += stride) nodes.push_back(k);
        if (nodes.back() != grid.steps) nodes.push_back(grid.steps);
        std::vector<Matrix> U, E, D;
        for (int k : nodes) {
          U.push_back(trans.inv0[k].transpose());
          const Matrix C = trans.phi0[k].transpose() * atom.B;
          E.push_back(C * C.transpose());
          D.push_back(trans.inv0[k] * L);
        }
        for (std::size_t it = 0; it < nodes.size(); ++it)
          for (std::size_t is = 0; is < nodes.size(); ++is) {
            const Matrix UE = U[it] * E[is];
            for (std::size_t iu = 0; iu < nodes.size(); ++iu)
              k3_max = std::max(k3_max, (scenario.coupling.q / atom.r) *
                                            spectral_norm(UE * D[iu]));
          }
      }
    }
    k1_sum += k1_max;
    k2_sum += k2_max;
    k3_sum += k3_max;
  }

  report.k1 = measure.mean_norm() * k1_sum;
  report.k2 = k2_sum;
  report.k3 = k3_sum;
  report.horizon_bound =
      std::sqrt(std::max(report.k1 + report.k2, report.k3)) * scenario.horizon;
  report.horizon_ok = report.horizon_bound < 1.5707963267948966;
  return report;
}

Scalar asymptotic_social_cost(const MeanFieldSolution& sol,
                              const Scenario& scenario) {
  const Scalar q = scenario.coupling.q;
  Scalar coupling_term = 0.0;
  if (q > 0.0) {
    if (scenario.coupling.mode == CouplingMode::cooperative) {
      const Matrix L = scenario.coupling.mean_coupling();
      coupling_term = -0.5 * quadrature_map(sol.xbar, [&](Scalar, const Vector& v) {
        return q * v.dot(L * v);
      });
    } else {
      const Matrix& Z = scenario.coupling.Z;
      coupling_term = 0.5 * quadrature_map(sol.xbar, [&](Scalar, const Vector& v) {
        return q * (Z * v).squaredNorm();
      });
    }
  }

  Scalar expectation = 0.0;
  for (std::size_t a = 0; a < scenario.atoms.size(); ++a) {
    const Scalar w = scenario.atoms[a].weight;
    for (std::size_t s = 0; s < sol.measure.points.size(); ++s) {
      const Vector& x0 = sol.measure.points[s];
      const int j = sol.classifier.classify(static_cast<int>(a), x0);
      expectation += w * sol.measure.weights[s] * sol.bundles[a][j].cost(x0);
    }
  }
  return coupling_term + expectation;
}

} // namespace dcc
