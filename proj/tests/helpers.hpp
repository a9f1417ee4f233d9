#pragma once

#include <cmath>
#include <random>

#include "povmopt/tomography.hpp"

namespace testing {

using namespace povmopt;

/// Complex Gaussian entries, Hermitian part.
inline HermitianOperator random_hermitian(int d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) m(i, k) = Complex(n(rng), n(rng));
  return HermitianOperator::symmetrized(m);
}

inline DensityMatrix random_state(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix x(d, d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) x(i, k) = Complex(n(rng), n(rng));
  Matrix rho = x * x.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(HermitianOperator::symmetrized(rho));
}

inline DensityMatrix random_pure(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Ket v(d);
  for (int i = 0; i < d; ++i) v(i) = Complex(n(rng), n(rng));
  return DensityMatrix::pure(v.normalized());
}

/// Hermitian basis direction `idx` of d x d matrices: diagonal units, then
/// symmetric and antisymmetric off-diagonal pairs.
inline HermitianOperator basis_direction(int d, int idx) {
  Matrix e = Matrix::Zero(d, d);
  if (idx < d) {
    e(idx, idx) = 1.0;
    return HermitianOperator(e);
  }
  idx -= d;
  for (int i = 0; i < d; ++i) {
    for (int k = i + 1; k < d; ++k) {
      if (idx == 0) {
        e(i, k) = 1.0;
        e(k, i) = 1.0;
        return HermitianOperator(e);
      }
      if (idx == 1) {
        e(i, k) = Complex(0.0, 1.0);
        e(k, i) = Complex(0.0, -1.0);
        return HermitianOperator(e);
      }
      idx -= 2;
    }
  }
  return HermitianOperator(e);
}

inline double frob(const Matrix& a, const Matrix& b) { return (a - b).norm(); }

/// Frequencies equal to the Born probabilities, renormalized per column.
inline FrequencyTable exact_freqs(const Povm& p, const ProbeEnsemble& probes) {
  RealMatrix f = born_probabilities(p, probes);
  for (Eigen::Index m = 0; m < f.cols(); ++m) f.col(m) /= f.col(m).sum();
  return FrequencyTable(f);
}

}  // namespace testing
