#include "povmopt/gilbert.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace povmopt {

namespace {

constexpr double kSameAtom = 1e-12;
constexpr double kDeadWeight = 1e-15;

Ket top_eigenvector(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(x);
  return es.eigenvectors().col(x.rows() - 1);
}

double expectation(const Matrix& x, const Ket& v) { return v.dot(x * v).real(); }

struct Atoms {
  std::vector<Ket> kets;
  std::vector<double> weights;

  Matrix mixture(int dim) const {
    Matrix rho = Matrix::Zero(dim, dim);
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (std::size_t j = 0; j < kets.size(); ++j) rho += (weights[j] / total) * (kets[j] * kets[j].adjoint());
    return hermitian_part(rho);
  }

  void prune() {
    std::size_t out = 0;
    for (std::size_t j = 0; j < kets.size(); ++j) {
      if (weights[j] > kDeadWeight) {
        kets[out] = kets[j];
        weights[out] = weights[j];
        ++out;
      }
    }
    kets.resize(out);
    weights.resize(out);
  }
};

}  // namespace

void GilbertConfig::validate() const {
  if (max_iters < 1) throw InvalidInput("GilbertConfig.max_iters must be >= 1");
  if (!(dist_tol > 0.0)) throw InvalidInput("GilbertConfig.dist_tol must be > 0");
}

DensityMatrix max_eigvec_oracle(const HermitianOperator& x) {
  return DensityMatrix::pure(top_eigenvector(x.matrix()));
}

ProjectionResult project_to_state_space(const HermitianOperator& m, const GilbertConfig& cfg) {
  cfg.validate();
  const int d = m.dim();
  const Matrix& target = m.matrix();

  // Atoms start as M's eigenprojectors. When M is already a state its own
  // spectrum gives the weights, so the loop stops at once with rho = M.
  Atoms atoms;
  const auto eig = hermitian_eigen(target);
  const bool already_state = eig.values.minCoeff() >= 0.0 && std::abs(eig.values.sum() - 1.0) <= kStateTol;
  for (int i = 0; i < d; ++i) {
    atoms.kets.push_back(eig.vectors.col(i));
    atoms.weights.push_back(already_state ? eig.values(i) / eig.values.sum() : 1.0 / d);
  }
  atoms.prune();
  Matrix rho = atoms.mixture(d);

  ProjectionResult result{DensityMatrix::maximally_mixed(d), 0.0, 0, false, false, {}};
  if (cfg.record_distances) result.distances.push_back((target - rho).norm());

  int k = 0;
  for (; k < cfg.max_iters; ++k) {
    const Matrix residual = target - rho;
    const double residual_on_rho = hs_inner(residual, rho);

    const Ket toward = top_eigenvector(residual);
    const double fw_gap = expectation(residual, toward) - residual_on_rho;
    if (fw_gap <= cfg.dist_tol) {
      result.converged = true;
      break;
    }

    std::size_t worst = 0;
    double worst_value = expectation(residual, atoms.kets[0]);
    for (std::size_t j = 1; j < atoms.kets.size(); ++j) {
      const double v = expectation(residual, atoms.kets[j]);
      if (v < worst_value) {
        worst_value = v;
        worst = j;
      }
    }
    const double away_gap = residual_on_rho - worst_value;
    const bool can_go_away = atoms.weights[worst] < 1.0 - kDeadWeight;

    if (fw_gap >= away_gap || !can_go_away) {
      const Matrix s = toward * toward.adjoint();
      const Matrix dir = s - rho;
      const double sq = dir.squaredNorm();
      if (sq <= 0.0) break;
      const double gamma = std::clamp(fw_gap / sq, 0.0, 1.0);
      rho += gamma * dir;
      for (auto& w : atoms.weights) w *= 1.0 - gamma;

      auto same = std::find_if(atoms.kets.begin(), atoms.kets.end(),
                               [&](const Ket& v) { return std::norm(v.dot(toward)) >= 1.0 - kSameAtom; });
      if (same != atoms.kets.end()) {
        atoms.weights[static_cast<std::size_t>(same - atoms.kets.begin())] += gamma;
      } else {
        atoms.kets.push_back(toward);
        atoms.weights.push_back(gamma);
      }
    } else {
      const Ket& v = atoms.kets[worst];
      const Matrix dir = rho - v * v.adjoint();
      const double sq = dir.squaredNorm();
      if (sq <= 0.0) break;
      const double w = atoms.weights[worst];
      const double gamma_max = w / (1.0 - w);
      const double gamma = std::clamp(away_gap / sq, 0.0, gamma_max);
      rho += gamma * dir;
      for (auto& wj : atoms.weights) wj *= 1.0 + gamma;
      atoms.weights[worst] = gamma == gamma_max ? 0.0 : atoms.weights[worst] - gamma;
    }
    atoms.prune();
    rho = hermitian_part(rho);
    if (cfg.record_distances) result.distances.push_back((target - rho).norm());
  }

  const Matrix final_rho = atoms.mixture(d);
  result.state = DensityMatrix(HermitianOperator::symmetrized(final_rho));
  result.distance = (target - final_rho).norm();
  result.iterations = k;
  return result;
}

ProjectionResult project_to_state_space(const Matrix& m, const GilbertConfig& cfg) {
  if (m.rows() != m.cols() || m.rows() == 0) throw InvalidInput("projection input must be square");
  const bool asymmetric = !is_hermitian(m);
  ProjectionResult r = project_to_state_space(HermitianOperator::symmetrized(m), cfg);
  r.symmetrized = asymmetric;
  return r;
}

RealVector project_to_simplex(const RealVector& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw InvalidInput("cannot project an empty vector");
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cumulative += sorted[static_cast<std::size_t>(i)];
    const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (sorted[static_cast<std::size_t>(i)] - candidate > 0.0) threshold = candidate;
  }
  return (v.array() - threshold).cwiseMax(0.0);
}

DensityMatrix eigen_simplex_projection(const HermitianOperator& m) {
  const auto [values, vectors] = hermitian_eigen(m.matrix());
  const RealVector p = project_to_simplex(values);
  return DensityMatrix(
      HermitianOperator::symmetrized(vectors * p.cast<Complex>().asDiagonal() * vectors.adjoint()));
}

}  // namespace povmopt
