#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "povmopt/linalg.hpp"

namespace povmopt {

inline constexpr double kStateTol = 1e-9;

bool is_valid_state(const HermitianOperator& op, double tol = kStateTol);

/// Checks squareness and Hermiticity first; throws InvalidInput on either.
bool is_valid_state(const Matrix& m, double tol = kStateTol);

/// Positive semidefinite, unit-trace Hermitian operator.
class DensityMatrix {
 public:
  /// Throws InvalidInput unless `op` is a valid state within `tol`.
  explicit DensityMatrix(HermitianOperator op, double tol = kStateTol);

  static DensityMatrix pure(const Ket& ket);
  static DensityMatrix maximally_mixed(int dim);

  int dim() const { return op_.dim(); }
  const HermitianOperator& op() const { return op_; }
  const Matrix& matrix() const { return op_.matrix(); }

 private:
  HermitianOperator op_;
};

/// Ordered measurement operators sharing one dimension.
///
/// Positivity and completeness are not enforced here; `is_valid_povm`
/// checks them. Optimizers also pass momentum-extrapolated element lists
/// through this type.
class Povm {
 public:
  Povm() = default;
  /// Throws InvalidInput if the elements disagree on dimension.
  explicit Povm(std::vector<HermitianOperator> elements);

  /// Appends I - sum(free) as the last element.
  static Povm complete(std::span<const HermitianOperator> free);

  int dim() const { return elements_.empty() ? 0 : elements_.front().dim(); }
  int size() const { return static_cast<int>(elements_.size()); }
  bool empty() const { return elements_.empty(); }

  const HermitianOperator& operator[](int l) const { return elements_[static_cast<std::size_t>(l)]; }
  const std::vector<HermitianOperator>& elements() const { return elements_; }

  /// The first L-1 elements; the last one is implied by completeness.
  std::span<const HermitianOperator> free_elements() const {
    return {elements_.data(), elements_.empty() ? 0 : elements_.size() - 1};
  }

  std::vector<double> traces() const;

 private:
  std::vector<HermitianOperator> elements_;
};

/// Throws InvalidInput on an empty element list.
bool is_valid_povm(const Povm& p, double tol = kStateTol);

/// (tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2, clamped to [0, 1].
double state_fidelity(const DensityMatrix& sigma, const DensityMatrix& rho);

struct FidelityReport {
  std::vector<double> per_element;
  std::vector<double> weights;
  double overall = 0.0;
};

/// Element-wise fidelities of the trace-normalized elements, combined as
/// (sum_l w_l sqrt(F_l))^2 with w_l = sqrt(tr(P_l) tr(Q_l)) / d.
///
/// An element with trace below 1e-12 on either side gets weight 0; its
/// per-element value is 1 when both are null and 0 otherwise.
FidelityReport overall_povm_fidelity(const Povm& p, const Povm& q);

/// Random valid POVM: A_l = X_l X_l^dagger with complex Gaussian X_l,
/// S = sum A_l, P_l = S^{-1/2} A_l S^{-1/2}. Deterministic in `seed`.
Povm random_povm(int dim, int count, std::uint64_t seed);

}  // namespace povmopt
