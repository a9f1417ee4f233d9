#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace povmopt {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Ket = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

/// Malformed arguments: wrong shapes, non-Hermitian operators, empty lists.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An objective was evaluated where it is undefined (e.g. log of a zero probability).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A requested POVM assembly would violate positivity or completeness.
class ConstraintViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kHermitianTol = 1e-12;

bool is_hermitian(const Matrix& m, double tol = kHermitianTol);

/// (M + M^dagger) / 2
Matrix hermitian_part(const Matrix& m);

/// Re tr(A B) for Hermitian A, B (the Hilbert-Schmidt inner product).
double hs_inner(const Matrix& a, const Matrix& b);

struct EigenPairs {
  RealVector values;  // ascending
  Matrix vectors;     // columns
};

EigenPairs hermitian_eigen(const Matrix& m);
RealVector hermitian_eigenvalues(const Matrix& m);
double min_eigenvalue(const Matrix& m);
double max_eigenvalue(const Matrix& m);

/// V f(Lambda) V^dagger with eigenvalues below zero clamped to 0 before the sqrt.
Matrix psd_sqrt(const Matrix& m);

/// A d x d complex matrix equal to its conjugate transpose within 1e-12 per entry.
///
/// Arithmetic between Hermitian operators and real scalars stays Hermitian
/// bit-for-bit, so those operators skip the check.
class HermitianOperator {
 public:
  HermitianOperator() = default;

  /// Throws InvalidInput when `m` is not square or not Hermitian within `tol`.
  explicit HermitianOperator(Matrix m, double tol = kHermitianTol);

  /// Takes the Hermitian part of `m` instead of rejecting it.
  static HermitianOperator symmetrized(const Matrix& m);
  static HermitianOperator zero(int dim);
  static HermitianOperator identity(int dim);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  double trace() const { return m_.trace().real(); }

  RealVector eigenvalues() const { return hermitian_eigenvalues(m_); }
  double min_eigenvalue() const { return povmopt::min_eigenvalue(m_); }
  double frobenius_norm() const { return m_.norm(); }

  HermitianOperator& operator+=(const HermitianOperator& o);
  HermitianOperator& operator-=(const HermitianOperator& o);
  HermitianOperator& operator*=(double s);

  friend HermitianOperator operator+(HermitianOperator a, const HermitianOperator& b) { return a += b; }
  friend HermitianOperator operator-(HermitianOperator a, const HermitianOperator& b) { return a -= b; }
  friend HermitianOperator operator*(HermitianOperator a, double s) { return a *= s; }
  friend HermitianOperator operator*(double s, HermitianOperator a) { return a *= s; }

 private:
  struct Unchecked {};
  HermitianOperator(Matrix m, Unchecked) : m_(std::move(m)) {}

  Matrix m_;
};

inline double hs_inner(const HermitianOperator& a, const HermitianOperator& b) {
  return hs_inner(a.matrix(), b.matrix());
}

namespace pauli {
Matrix x();
Matrix y();
Matrix z();
}  // namespace pauli

/// |i> in dimension d.
Ket basis_ket(int dim, int index);

/// Kronecker product of two kets.
Ket kron(const Ket& a, const Ket& b);
Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace povmopt
