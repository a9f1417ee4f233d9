#include "povmopt/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace povmopt {

bool is_hermitian(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - std::conj(m(j, i))) > tol) return false;
    }
  }
  return true;
}

Matrix hermitian_part(const Matrix& m) {
  Matrix h = 0.5 * (m + m.adjoint());
  // Pin the diagonal to real and the lower triangle to the exact conjugate.
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    h(i, i) = Complex(h(i, i).real(), 0.0);
    for (Eigen::Index j = i + 1; j < h.cols(); ++j) h(j, i) = std::conj(h(i, j));
  }
  return h;
}

double hs_inner(const Matrix& a, const Matrix& b) {
  // tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij) for Hermitian B.
  return (a.array() * b.conjugate().array()).sum().real();
}

EigenPairs hermitian_eigen(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  return {es.eigenvalues(), es.eigenvectors()};
}

RealVector hermitian_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double min_eigenvalue(const Matrix& m) { return hermitian_eigenvalues(m).minCoeff(); }
double max_eigenvalue(const Matrix& m) { return hermitian_eigenvalues(m).maxCoeff(); }

Matrix psd_sqrt(const Matrix& m) {
  const auto [values, vectors] = hermitian_eigen(m);
  const RealVector roots = values.cwiseMax(0.0).cwiseSqrt();
  return vectors * roots.cast<Complex>().asDiagonal() * vectors.adjoint();
}

HermitianOperator::HermitianOperator(Matrix m, double tol) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0) {
    throw InvalidInput("operator must be a non-empty square matrix");
  }
  if (!is_hermitian(m_, tol)) throw InvalidInput("operator is not Hermitian");
}

HermitianOperator HermitianOperator::symmetrized(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw InvalidInput("operator must be a non-empty square matrix");
  }
  return HermitianOperator(hermitian_part(m), Unchecked{});
}

HermitianOperator HermitianOperator::zero(int dim) {
  return HermitianOperator(Matrix::Zero(dim, dim), Unchecked{});
}

HermitianOperator HermitianOperator::identity(int dim) {
  return HermitianOperator(Matrix::Identity(dim, dim), Unchecked{});
}

HermitianOperator& HermitianOperator::operator+=(const HermitianOperator& o) {
  if (o.dim() != dim()) throw InvalidInput("dimension mismatch in operator sum");
  m_ += o.m_;
  return *this;
}

HermitianOperator& HermitianOperator::operator-=(const HermitianOperator& o) {
  if (o.dim() != dim()) throw InvalidInput("dimension mismatch in operator difference");
  m_ -= o.m_;
  return *this;
}

HermitianOperator& HermitianOperator::operator*=(double s) {
  m_ *= s;
  return *this;
}

namespace pauli {
Matrix x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
Matrix y() {
  Matrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}
Matrix z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
}  // namespace pauli

Ket basis_ket(int dim, int index) {
  if (index < 0 || index >= dim) throw InvalidInput("basis index out of range");
  Ket k = Ket::Zero(dim);
  k(index) = 1.0;
  return k;
}

Ket kron(const Ket& a, const Ket& b) {
  Ket out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace povmopt
