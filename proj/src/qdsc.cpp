#include "povmopt/qdsc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>

namespace povmopt {

namespace {

constexpr double kNegEigTol = 1e-9;
constexpr double kRankTol = 1e-9;
constexpr double kTinyVector = 1e-12;

void require_qubit(const Povm& p) {
  if (p.dim() != 2) throw UnsupportedDimension("Bloch representation needs dim 2, got " + std::to_string(p.dim()));
}

Eigen::Vector3d bloch_vector(const HermitianOperator& op) {
  return {0.5 * hs_inner(op.matrix(), pauli::x()), 0.5 * hs_inner(op.matrix(), pauli::y()),
          0.5 * hs_inner(op.matrix(), pauli::z())};
}

/// Orthogonal map taking the columns of B into the reference frame: the
/// first non-negligible column becomes +z, the next independent one lands in
/// the xz-plane with positive x, and the y axis is oriented by the first
/// column with a y component. Falls back to the identity axes when the
/// columns do not span enough directions.
Eigen::Matrix3d gauge_frame(const RealMatrix& B) {
  std::vector<Eigen::Vector3d> candidates;
  for (Eigen::Index l = 0; l < B.cols(); ++l) candidates.emplace_back(B.col(l));
  const std::vector<Eigen::Vector3d> axes = {Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX(),
                                             Eigen::Vector3d::UnitY()};

  Eigen::Vector3d ez = Eigen::Vector3d::Zero();
  Eigen::Vector3d ex = Eigen::Vector3d::Zero();
  for (const auto& v : candidates) {
    if (v.norm() > kTinyVector) {
      ez = v.normalized();
      break;
    }
  }
  if (ez.isZero()) return Eigen::Matrix3d::Identity();
  for (const auto& v : candidates) {
    const Eigen::Vector3d perp = v - v.dot(ez) * ez;
    if (perp.norm() > kTinyVector) {
      ex = perp.normalized();
      break;
    }
  }
  if (ex.isZero()) {
    for (const auto& v : axes) {
      const Eigen::Vector3d perp = v - v.dot(ez) * ez;
      if (perp.norm() > 0.5) {
        ex = perp.normalized();
        break;
      }
    }
  }
  Eigen::Vector3d ey = ez.cross(ex);
  for (const auto& v : candidates) {
    const double y = v.dot(ey);
    if (std::abs(y) > kTinyVector) {
      if (y < 0.0) ey = -ey;
      break;
    }
  }
  Eigen::Matrix3d r;
  r.row(0) = ex.transpose();
  r.row(1) = ey.transpose();
  r.row(2) = ez.transpose();
  return r;
}

/// Rotates B into the gauge frame. The entries the frame zeroes by
/// construction are set to exactly 0 to drop rounding residue.
RealMatrix to_gauge(const RealMatrix& B) {
  RealMatrix out = gauge_frame(B) * B;
  if (out.cols() >= 1) out(0, 0) = out(1, 0) = 0.0;
  if (out.cols() >= 2) out(1, 1) = 0.0;
  return out;
}

/// Derivative of C(N+) with respect to N, given W = dC/dN+ and P = N+.
RealMatrix pinv_chain(const RealMatrix& N, const RealMatrix& P, const RealMatrix& W) {
  const Eigen::Index n = N.rows();
  const RealMatrix I = RealMatrix::Identity(n, n);
  const RealMatrix P2 = P * P;
  const RealMatrix out = -P * W * P + P2 * W * (I - N * P).transpose() + (I - P * N).transpose() * W * P2;
  return 0.5 * (out + out.transpose());
}

RealMatrix symmetric_psd_part(const RealMatrix& m) {
  const RealMatrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(sym);
  const RealVector lam = es.eigenvalues().cwiseMax(0.0);
  const RealMatrix out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

QdscData::QdscData(RealMatrix freqs) : f_(std::move(freqs)) {
  if (f_.size() == 0) throw InvalidInput("frequency data is empty");
  if (!f_.allFinite() || (f_.array() < 0.0).any()) throw InvalidInput("frequencies must be finite and non-negative");
  for (Eigen::Index m = 0; m < f_.cols(); ++m) {
    if (std::abs(f_.col(m).sum() - 1.0) > 1e-12) {
      throw InvalidInput("frequency vector " + std::to_string(m) + " does not sum to 1");
    }
  }
}

QdscData QdscData::from_counts(const CountsTable& counts) {
  return QdscData(FrequencyTable::from_counts(counts).values());
}

QdscData QdscData::exact(const Povm& povm, const ProbeEnsemble& probes) {
  RealMatrix p = born_probabilities(povm, probes);
  // Renormalize so rounding cannot trip the 1e-12 column check.
  for (Eigen::Index m = 0; m < p.cols(); ++m) p.col(m) /= p.col(m).sum();
  return QdscData(std::move(p));
}

RealMatrix pseudo_inverse(const RealMatrix& m, double rel_cutoff) {
  if (m.size() == 0) return RealMatrix(m.cols(), m.rows());
  Eigen::JacobiSVD<RealMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RealVector& s = svd.singularValues();
  const double cutoff = rel_cutoff * (s.size() > 0 ? s(0) : 0.0);
  RealVector inv = RealVector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

BlochFactor factor_to_bloch(const RealMatrix& N) {
  if (N.rows() != N.cols()) throw InvalidInput("Gram matrix must be square");
  if ((N - N.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, N.cwiseAbs().maxCoeff())) {
    throw InvalidInput("Gram matrix must be symmetric");
  }
  const Eigen::Index L = N.rows();
  BlochFactor out;
  out.B = RealMatrix::Zero(3, L);
  if (L == 0) return out;

  Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (N + N.transpose()));
  const RealVector& lam = es.eigenvalues();  // ascending
  if (lam(0) < -kNegEigTol * std::max(1.0, lam(L - 1))) throw InvalidInput("Gram matrix has a negative eigenvalue " + std::to_string(lam(0)));
  const Eigen::Index keep = std::min<Eigen::Index>(3, L);
  if (L > 3 && lam(L - 4) > kRankTol * std::max(1.0, lam(L - 1))) out.rank_clamped = true;
  // Eigenvalues at rounding level would contribute components of order
  // sqrt(1e-16), so they count as zero.
  const double floor = 1e-12 * lam(L - 1);
  for (Eigen::Index k = 0; k < keep; ++k) {
    const Eigen::Index idx = L - 1 - k;
    if (lam(idx) <= floor) continue;
    out.B.row(k) = std::sqrt(lam(idx)) * es.eigenvectors().col(idx).transpose();
  }
  out.B = to_gauge(out.B);
  return out;
}

BlochModel bloch_decompose(const Povm& p) {
  require_qubit(p);
  const int L = p.size();
  BlochModel m;
  m.a.resize(L);
  m.N.resize(L, L);
  for (int i = 0; i < L; ++i) m.a(i) = 0.5 * p[i].trace();
  for (int i = 0; i < L; ++i) {
    for (int l = 0; l <= i; ++l) {
      const double v = 0.5 * hs_inner(p[i], p[l]) - 0.25 * p[i].trace() * p[l].trace();
      m.N(i, l) = v;
      m.N(l, i) = v;
    }
  }
  // Any Hermitian 2x2 family gives a PSD Gram matrix; clip rounding noise.
  m.N = symmetric_psd_part(m.N);
  auto factor = factor_to_bloch(m.N);
  m.B = std::move(factor.B);
  m.rank_clamped = factor.rank_clamped;
  m.N_pinv = pseudo_inverse(m.N);
  return m;
}

std::vector<HermitianOperator> bloch_operators(const RealVector& a, const RealMatrix& B) {
  if (B.rows() != 3 || B.cols() != a.size()) throw InvalidInput("Bloch model shapes disagree");
  std::vector<HermitianOperator> out;
  out.reserve(static_cast<std::size_t>(a.size()));
  const Matrix sx = pauli::x();
  const Matrix sy = pauli::y();
  const Matrix sz = pauli::z();
  for (Eigen::Index l = 0; l < a.size(); ++l) {
    Matrix m = a(l) * Matrix::Identity(2, 2) + B(0, l) * sx + B(1, l) * sy + B(2, l) * sz;
    out.push_back(HermitianOperator::symmetrized(m));
  }
  return out;
}

Povm gauge_fixed(const Povm& p) {
  require_qubit(p);
  RealMatrix B(3, p.size());
  RealVector a(p.size());
  for (int l = 0; l < p.size(); ++l) {
    B.col(l) = bloch_vector(p[l]);
    a(l) = 0.5 * p[l].trace();
  }
  return Povm(bloch_operators(a, to_gauge(B)));
}

double qdsc_cost(const RealVector& a, const RealMatrix& N_pinv, const QdscData& data) {
  if (a.size() != data.outcomes() || N_pinv.rows() != a.size() || N_pinv.cols() != a.size()) {
    throw InvalidInput("model and data disagree on the number of outcomes");
  }
  double cost = 0.0;
  for (Eigen::Index m = 0; m < data.freqs().cols(); ++m) {
    const RealVector r = data.freqs().col(m) - a;
    const double s = 1.0 - r.dot(N_pinv * r);
    cost += s * s;
  }
  return cost;
}

double qdsc_cost(const BlochModel& model, const QdscData& data) { return qdsc_cost(model.a, model.N_pinv, data); }

QdscGradient qdsc_gradients(const RealVector& a, const RealMatrix& N_pinv, const QdscData& data) {
  if (a.size() != data.outcomes() || N_pinv.rows() != a.size() || N_pinv.cols() != a.size()) {
    throw InvalidInput("model and data disagree on the number of outcomes");
  }
  const Eigen::Index L = a.size();
  QdscGradient g{RealVector::Zero(L), RealMatrix::Zero(L, L)};
  const RealMatrix sym = N_pinv + N_pinv.transpose();
  for (Eigen::Index m = 0; m < data.freqs().cols(); ++m) {
    const RealVector r = data.freqs().col(m) - a;
    const double s = 1.0 - r.dot(N_pinv * r);
    g.a += 2.0 * s * (sym * r);
    g.N_pinv -= 2.0 * s * (r * r.transpose());
  }
  return g;
}

QdscGradient qdsc_gradients(const BlochModel& model, const QdscData& data) {
  return qdsc_gradients(model.a, model.N_pinv, data);
}

ObjectiveFunction make_qdsc_objective(QdscData data) {
  auto shared = std::make_shared<const QdscData>(std::move(data));
  ObjectiveFunction f;
  f.eval = [shared](const Povm& p) { return qdsc_cost(bloch_decompose(p), *shared); };
  f.grad = [shared](const Povm& p) {
    const BlochModel m = bloch_decompose(p);
    const QdscGradient g = qdsc_gradients(m, *shared);
    const RealMatrix A = pinv_chain(m.N, m.N_pinv, 0.5 * (g.N_pinv + g.N_pinv.transpose()));
    const int L = p.size();
    // Gradient of the cost with respect to each of the L elements, before
    // the last one is eliminated.
    std::vector<HermitianOperator> full;
    full.reserve(static_cast<std::size_t>(L));
    for (int j = 0; j < L; ++j) {
      HermitianOperator gj = (0.5 * g.a(j)) * HermitianOperator::identity(2);
      for (int l = 0; l < L; ++l) {
        gj += A(j, l) * (p[l] - (0.5 * p[l].trace()) * HermitianOperator::identity(2));
      }
      full.push_back(std::move(gj));
    }
    std::vector<HermitianOperator> out;
    out.reserve(static_cast<std::size_t>(L - 1));
    for (int j = 0; j + 1 < L; ++j) out.push_back(full[static_cast<std::size_t>(j)] - full.back());
    return out;
  };
  return f;
}

Povm sic_povm_qubit() {
  const double c = 1.0 / std::sqrt(3.0);
  RealMatrix B(3, 4);
  B << c, c, -c, -c,  //
      c, -c, c, -c,   //
      c, -c, -c, c;
  // (1/2)|psi><psi| = (I + n.sigma)/4
  return Povm(bloch_operators(RealVector::Constant(4, 0.25), 0.25 * B));
}

ProbeEnsemble qdsc_probes() {
  std::vector<DensityMatrix> states;
  std::vector<std::string> labels;
  const Matrix id = Matrix::Identity(2, 2);
  auto add = [&](double x, double y, double z, std::string label) {
    const Matrix m = 0.5 * (id + x * pauli::x() + y * pauli::y() + z * pauli::z());
    states.emplace_back(HermitianOperator::symmetrized(m));
    labels.push_back(std::move(label));
  };
  add(0, 0, 1, "+z");
  add(0, 0, -1, "-z");
  constexpr double pi = std::numbers::pi;
  for (int i = 1; i <= 6; ++i) {
    for (int n = 1; n <= 8; ++n) {
      const double polar = i * pi / 4.0;
      const double az = n * pi / 8.0;
      add(std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), std::cos(polar),
          "ring" + std::to_string(i) + "_" + std::to_string(n));
    }
  }
  return ProbeEnsemble(std::move(states), std::move(labels));
}

void QdscConfig::validate() const {
  if (shots < 1) throw InvalidInput("QdscConfig.shots must be >= 1");
  if (!(epsilon > 0.0)) throw InvalidInput("QdscConfig.epsilon must be > 0");
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidInput("QdscConfig.beta must be in (0,1)");
  if (!(stop_tol >= 0.0)) throw InvalidInput("QdscConfig.stop_tol must be >= 0");
  if (max_iters < 1) throw InvalidInput("QdscConfig.max_iters must be >= 1");
  if (!(min_epsilon > 0.0)) throw InvalidInput("QdscConfig.min_epsilon must be > 0");
  gilbert.validate();
  t_solver.validate();
}

namespace {

/// (N+, a) coordinates of an iterate.
struct BlochPoint {
  RealMatrix P;
  RealVector a;
};

BlochPoint point_of(const Povm& p) {
  const BlochModel m = bloch_decompose(p);
  return {m.N_pinv, m.a};
}

/// Maps an (N+, a) step back to a valid POVM, or nothing when no finite
/// objective value is reachable.
std::optional<Povm> realize(const BlochPoint& x, const ObjectiveFunction& objective, const QdscConfig& cfg) {
  const Eigen::Index L = x.a.size();
  const RealMatrix N = symmetric_psd_part(pseudo_inverse(0.5 * (x.P + x.P.transpose())));
  const BlochFactor factor = factor_to_bloch(N);
  const auto ops = bloch_operators(x.a, factor.B);
  std::vector<DensityMatrix> states;
  RealVector start(L - 1);
  for (Eigen::Index l = 0; l + 1 < L; ++l) {
    states.push_back(normalize_and_project(ops[static_cast<std::size_t>(l)], cfg.gilbert));
    start(l) = std::max(0.0, 2.0 * x.a(l));
  }
  // The traces come from a; the scale subproblem only steps in when they
  // would leave P_L with a negative eigenvalue.
  const ScaleVector restored(start);
  try {
    Povm p = assemble_povm(states, restored);
    if (std::isfinite(objective.eval(p))) return p;
  } catch (const ConstraintViolation&) {
  }
  const TSolution sol = solve_t_subproblem(states, objective, restored, cfg.t_solver);
  if (!std::isfinite(sol.value)) return std::nullopt;
  return assemble_povm(states, sol.t);
}

}  // namespace

Povm moment_init(const QdscData& data, const QdscConfig& cfg) {
  cfg.validate();
  const RealMatrix& f = data.freqs();
  const RealVector mean = f.rowwise().mean();
  const RealMatrix centered = f.colwise() - mean;
  // For pure probes spread evenly over the sphere, E[n n^T] = I / 3.
  const RealMatrix N = 3.0 * centered * centered.transpose() / static_cast<double>(f.cols());
  const BlochPoint x{pseudo_inverse(N), mean};
  auto p = realize(x, make_qdsc_objective(data), cfg);
  if (!p) throw DomainError("moment initialization has no finite QDSC cost");
  return *p;
}

QdscResult reconstruct_qdsc(const QdscData& data, const QdscConfig& cfg, const Povm* reference) {
  return reconstruct_qdsc(data, moment_init(data, cfg), cfg, reference);
}

QdscResult reconstruct_qdsc(const QdscData& data, const Povm& init, const QdscConfig& cfg, const Povm* reference) {
  cfg.validate();
  const int L = data.outcomes();
  if (L < 2) throw InvalidInput("QDSC needs at least 2 outcomes");
  require_qubit(init);
  if (init.size() != L) throw InvalidInput("initial POVM and data disagree on the number of outcomes");
  const ObjectiveFunction objective = make_qdsc_objective(data);
  const auto clock_start = std::chrono::steady_clock::now();
  const std::optional<Povm> ref_fixed = reference ? std::optional<Povm>(gauge_fixed(*reference)) : std::nullopt;

  QdscResult out;
  auto record = [&](int k, double cost, double eps, bool accepted, const Povm& current) {
    IterationRecord r;
    r.k = k;
    r.objective = cost;
    r.epsilon = eps;
    r.accepted = accepted;
    if (ref_fixed) {
      auto fid = overall_povm_fidelity(gauge_fixed(current), *ref_fixed);
      r.fid_overall = fid.overall;
      r.fid_elements = std::move(fid.per_element);
    }
    r.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - clock_start).count();
    if (cfg.record_iterates) r.iterate = current;
    out.trace.records.push_back(std::move(r));
  };

  Povm current = init;
  double f_prev = objective.eval(current);
  double eps = cfg.epsilon;
  record(0, f_prev, eps, true, current);

  BlochPoint x = point_of(current);
  BlochPoint x_prev = x;
  BlochPoint companion = x;
  double theta = 1.0;
  out.status = RunStatus::MaxIterations;

  int k = 1;
  for (; k <= cfg.max_iters; ++k) {
    const QdscGradient g = qdsc_gradients(companion.a, companion.P, data);
    const RealMatrix gP = 0.5 * (g.N_pinv + g.N_pinv.transpose());
    const double hP = gP.norm() > 0.0 ? eps * companion.P.norm() / gP.norm() : 0.0;
    const double ha = g.a.norm() > 0.0 ? eps * companion.a.norm() / g.a.norm() : 0.0;
    const BlochPoint step{companion.P - hP * gP, companion.a - ha * g.a};
    std::optional<Povm> next = realize(step, objective, cfg);
    const double f_k = next ? objective.eval(*next) : std::numeric_limits<double>::infinity();

    if (!(f_k <= f_prev)) {
      eps *= cfg.beta;
      companion = x;
      theta = 1.0;
      record(k, f_prev, eps, false, current);
      if (eps < cfg.min_epsilon) {
        out.status = RunStatus::Stalled;
        break;
      }
      continue;
    }

    const double delta = f_prev - f_k;
    current = std::move(*next);
    f_prev = f_k;
    x_prev = x;
    x = point_of(current);
    const double theta_next = next_theta(theta);
    const double w = (theta - 1.0) / theta_next;
    companion = {x.P + w * (x.P - x_prev.P), x.a + w * (x.a - x_prev.a)};
    theta = theta_next;
    record(k, f_k, eps, true, current);
    if (delta < cfg.stop_tol) {
      out.status = RunStatus::Converged;
      break;
    }
  }

  out.povm = gauge_fixed(current);
  out.cost = f_prev;
  out.iterations = std::min(k, cfg.max_iters);
  out.final_epsilon = eps;
  if (ref_fixed) out.fidelity = overall_povm_fidelity(out.povm, *ref_fixed);
  return out;
}

QdscResult run_qdsc(std::uint64_t seed, const QdscConfig& cfg) {
  cfg.validate();
  const Povm target = sic_povm_qubit();
  const CountsTable counts = simulate_counts(target, qdsc_probes(), cfg.shots, seed);
  return reconstruct_qdsc(QdscData::from_counts(counts), cfg, &target);
}

}  // namespace povmopt
