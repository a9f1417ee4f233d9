#include "povmopt/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SVD>

namespace povmopt {

namespace {

constexpr double kNullTrace = 1e-12;

double clamp_unit(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

bool is_valid_state(const HermitianOperator& op, double tol) {
  return op.min_eigenvalue() >= -tol && std::abs(op.trace() - 1.0) <= tol;
}

bool is_valid_state(const Matrix& m, double tol) {
  if (m.rows() != m.cols() || m.rows() == 0) throw InvalidInput("state must be a non-empty square matrix");
  if (!is_hermitian(m)) throw InvalidInput("state is not Hermitian");
  return is_valid_state(HermitianOperator(m), tol);
}

DensityMatrix::DensityMatrix(HermitianOperator op, double tol) : op_(std::move(op)) {
  if (!is_valid_state(op_, tol)) throw InvalidInput("operator is not a valid density matrix");
}

DensityMatrix DensityMatrix::pure(const Ket& ket) {
  const double n = ket.norm();
  if (n == 0.0) throw InvalidInput("cannot build a state from the zero vector");
  const Ket v = ket / n;
  return DensityMatrix(HermitianOperator::symmetrized(v * v.adjoint()));
}

DensityMatrix DensityMatrix::maximally_mixed(int dim) {
  if (dim < 1) throw InvalidInput("dimension must be positive");
  return DensityMatrix(HermitianOperator::identity(dim) * (1.0 / dim));
}

Povm::Povm(std::vector<HermitianOperator> elements) : elements_(std::move(elements)) {
  for (const auto& e : elements_) {
    if (e.dim() != elements_.front().dim()) throw InvalidInput("POVM elements differ in dimension");
  }
}

Povm Povm::complete(std::span<const HermitianOperator> free) {
  if (free.empty()) throw InvalidInput("need at least one free element");
  const int d = free.front().dim();
  HermitianOperator last = HermitianOperator::identity(d);
  for (const auto& e : free) last -= e;
  std::vector<HermitianOperator> all(free.begin(), free.end());
  all.push_back(std::move(last));
  return Povm(std::move(all));
}

std::vector<double> Povm::traces() const {
  std::vector<double> out;
  out.reserve(elements_.size());
  for (const auto& e : elements_) out.push_back(e.trace());
  return out;
}

bool is_valid_povm(const Povm& p, double tol) {
  if (p.empty()) throw InvalidInput("POVM has no elements");
  const int d = p.dim();
  Matrix sum = Matrix::Zero(d, d);
  for (const auto& e : p.elements()) {
    if (e.min_eigenvalue() < -tol) return false;
    sum += e.matrix();
  }
  return (sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <= tol;
}

double state_fidelity(const DensityMatrix& sigma, const DensityMatrix& rho) {
  if (sigma.dim() != rho.dim()) throw InvalidInput("fidelity of states with different dimensions");
  // tr sqrt(sqrt(sigma) rho sqrt(sigma)) is the nuclear norm of
  // sqrt(sigma) sqrt(rho). Singular values avoid square roots of tiny
  // eigenvalues, and swapping the arguments only transposes the product.
  const Matrix product = psd_sqrt(sigma.matrix()) * psd_sqrt(rho.matrix());
  const double root_trace = Eigen::JacobiSVD<Matrix>(product).singularValues().sum();
  return clamp_unit(root_trace * root_trace);
}

FidelityReport overall_povm_fidelity(const Povm& p, const Povm& q) {
  if (p.size() != q.size() || p.empty()) throw InvalidInput("POVMs differ in element count");
  if (p.dim() != q.dim()) throw InvalidInput("POVMs differ in dimension");

  const int d = p.dim();
  FidelityReport report;
  double weighted = 0.0;
  for (int l = 0; l < p.size(); ++l) {
    const double tp = p[l].trace();
    const double tq = q[l].trace();
    if (tp < kNullTrace || tq < kNullTrace) {
      report.per_element.push_back(tp < kNullTrace && tq < kNullTrace ? 1.0 : 0.0);
      report.weights.push_back(0.0);
      continue;
    }
    // Normalized elements can carry -1e-12-scale eigenvalues; the fidelity
    // clamps them, so skip the state validity check here.
    const DensityMatrix a(p[l] * (1.0 / tp), 1e-6);
    const DensityMatrix b(q[l] * (1.0 / tq), 1e-6);
    const double f = state_fidelity(a, b);
    const double w = std::sqrt(tp * tq) / d;
    report.per_element.push_back(f);
    report.weights.push_back(w);
    weighted += w * std::sqrt(f);
  }
  report.overall = clamp_unit(weighted * weighted);
  return report;
}

Povm random_povm(int dim, int count, std::uint64_t seed) {
  if (dim < 2) throw InvalidInput("random_povm needs dim >= 2");
  if (count < 2) throw InvalidInput("random_povm needs at least 2 elements");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Matrix> psd;
  psd.reserve(static_cast<std::size_t>(count));
  Matrix total = Matrix::Zero(dim, dim);
  for (int l = 0; l < count; ++l) {
    Matrix x(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) x(i, j) = Complex(normal(rng), normal(rng));
    psd.push_back(x * x.adjoint());
    total += psd.back();
  }

  const auto [values, vectors] = hermitian_eigen(hermitian_part(total));
  const Matrix inv_root =
      vectors * values.cwiseSqrt().cwiseInverse().cast<Complex>().asDiagonal() * vectors.adjoint();

  std::vector<HermitianOperator> elements;
  elements.reserve(psd.size());
  for (const auto& a : psd) elements.push_back(HermitianOperator::symmetrized(inv_root * a * inv_root));

  // Fold the rounding residual of sum = I into the last element.
  Matrix residual = Matrix::Identity(dim, dim);
  for (const auto& e : elements) residual -= e.matrix();
  elements.back() = HermitianOperator::symmetrized(elements.back().matrix() + residual);
  return Povm(std::move(elements));
}

}  // namespace povmopt
