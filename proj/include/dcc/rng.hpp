#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dcc/errors.hpp"
#include "dcc/types.hpp"

namespace dcc {

// Deterministic random source. mt19937_64 supplies the raw bits; doubles are
// produced by explicit bit manipulation so streams do not depend on the
// standard library's distribution implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on (0,1); (x >> 11) keeps 53 bits, +0.5 keeps the value off 0.
  Scalar uniform() { return (static_cast<Scalar>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

  // Standard normal, Box-Muller; two uniforms per draw, no cached spare, so
  // the number of raw draws per call is fixed.
  Scalar normal() {
    const Scalar u1 = uniform();
    const Scalar u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  Vector normal_vector(int n) {
    Vector z(n);
    for (int i = 0; i < n; ++i) z(i) = normal();
    return z;
  }

  // Index drawn by inverse CDF on a single uniform.
  int categorical(const std::vector<Scalar>& weights) {
    const Scalar u = uniform();
    Scalar acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u <= acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

private:
  std::mt19937_64 gen_;
};

// splitmix64 step; decorrelates per-purpose substreams of one scenario seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Substream tags. Initial states and type indices use separate streams so a
// population of size N is a prefix of the population of size N' > N.
enum : std::uint64_t {
  stream_initial_states = 1,
  stream_type_indices = 2,
  stream_mean_field_samples = 3,
};

// Symmetric PSD square root via eigendecomposition; negative eigenvalues from
// roundoff are clamped to zero so semidefinite covariances are accepted.
Matrix covariance_factor(const Matrix& covariance);

} // namespace dcc
