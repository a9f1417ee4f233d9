#pragma once

#include <vector>

#include "povmopt/quantum.hpp"

namespace povmopt {

struct GilbertConfig {
  int max_iters = 2000;
  /// Stop once the duality gap tr[(M - rho)(s - rho)] falls to this value.
  double dist_tol = 1e-8;
  /// Keep ||M - rho_k||_F for every iterate in ProjectionResult::distances.
  bool record_distances = false;

  void validate() const;
};

struct ProjectionResult {
  DensityMatrix state;
  double distance = 0.0;  // ||M - state||_F
  int iterations = 0;
  bool converged = false;
  /// The input had an anti-Hermitian part that was dropped.
  bool symmetrized = false;
  std::vector<double> distances;
};

/// Linear-maximization oracle over the state space: the projector onto a
/// top eigenvector of X.
DensityMatrix max_eigvec_oracle(const HermitianOperator& x);

/// Frobenius-nearest density matrix to M by Gilbert's algorithm.
///
/// Starts at the maximally mixed state, held as the uniform mixture of M's
/// eigenprojectors, and alternates oracle (toward) steps with away steps
/// that drain weight from the worst active atom. Each step uses an exact
/// line search, so the distance to M never increases. If `max_iters` runs
/// out first, the best iterate comes back with `converged == false`.
ProjectionResult project_to_state_space(const HermitianOperator& m, const GilbertConfig& cfg = {});

/// Non-Hermitian input is replaced by its Hermitian part and flagged.
ProjectionResult project_to_state_space(const Matrix& m, const GilbertConfig& cfg = {});

/// Euclidean projection onto the probability simplex (sort and threshold).
RealVector project_to_simplex(const RealVector& v);

/// Closed-form nearest state: eigendecompose, project the spectrum onto the
/// simplex, reassemble.
DensityMatrix eigen_simplex_projection(const HermitianOperator& m);

}  // namespace povmopt
