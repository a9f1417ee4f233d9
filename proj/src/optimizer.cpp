#include "povmopt/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "povmopt/kernels.hpp"

namespace povmopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNullTrace = 1e-12;
constexpr int kMaxHalvings = 60;
// Start points are pulled this far inside the feasible set.
constexpr double kInteriorMargin = 1e-6;

HermitianOperator scaled_sum(std::span<const DensityMatrix> states, const RealVector& t) {
  HermitianOperator acc = HermitianOperator::zero(states.front().dim());
  for (std::size_t l = 0; l < states.size(); ++l) acc += t(static_cast<Eigen::Index>(l)) * states[l].op();
  return acc;
}

double last_element_min_eig(std::span<const DensityMatrix> states, const RealVector& t) {
  const int d = states.front().dim();
  return (HermitianOperator::identity(d) - scaled_sum(states, t)).min_eigenvalue();
}

Povm assemble_unchecked(std::span<const DensityMatrix> states, const RealVector& t) {
  std::vector<HermitianOperator> free;
  free.reserve(states.size());
  for (std::size_t l = 0; l < states.size(); ++l) free.push_back(t(static_cast<Eigen::Index>(l)) * states[l].op());
  return Povm::complete(free);
}

double eval_or_inf(const ObjectiveFunction& f, const Povm& p) {
  try {
    const double v = f.eval(p);
    return std::isfinite(v) ? v : kInf;
  } catch (const DomainError&) {
    return kInf;
  }
}

RealVector t_gradient(std::span<const DensityMatrix> states, const ObjectiveFunction& f, const RealVector& t) {
  const auto g = f.grad(assemble_unchecked(states, t));
  RealVector out(t.size());
  for (std::size_t l = 0; l < states.size(); ++l) out(static_cast<Eigen::Index>(l)) = hs_inner(states[l].op(), g[l]);
  return out;
}


/// Interior-point state for the t-subproblem: the slack I - sum t_l rho_l is
/// kept Cholesky-factorizable and every t_l strictly positive.
class Barrier {
 public:
  explicit Barrier(std::span<const DensityMatrix> states) : states_(states), dim_(states.front().dim()) {}

  /// Cholesky of the slack, or nothing when t is not strictly feasible.
  std::optional<Eigen::LLT<Matrix>> slack(const RealVector& t) const {
    if ((t.array() <= 0.0).any()) return std::nullopt;
    const HermitianOperator s = HermitianOperator::identity(dim_) - scaled_sum(states_, t);
    Eigen::LLT<Matrix> llt(s.matrix());
    if (llt.info() != Eigen::Success) return std::nullopt;
    if ((llt.matrixLLT().diagonal().real().array() <= 0.0).any()) return std::nullopt;
    return llt;
  }

  /// -sum ln t_l - ln det(slack)
  double value(const RealVector& t, const Eigen::LLT<Matrix>& llt) const {
    return -t.array().log().sum() - 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
  }

  void derivatives(const RealVector& t, const Eigen::LLT<Matrix>& llt, RealVector& grad, RealMatrix& hess) const {
    const auto n = static_cast<Eigen::Index>(states_.size());
    std::vector<Matrix> solved;
    solved.reserve(states_.size());
    for (const auto& rho : states_) solved.push_back(llt.solve(rho.matrix()));
    grad.resize(n);
    hess.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      grad(i) = -1.0 / t(i) + solved[static_cast<std::size_t>(i)].trace().real();
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double h = (solved[static_cast<std::size_t>(i)] * solved[static_cast<std::size_t>(j)]).trace().real();
        hess(i, j) = h;
        hess(j, i) = h;
      }
      hess(i, i) += 1.0 / (t(i) * t(i));
    }
  }

  /// Smallest eigenvalue of the slack at t.
  double margin(const RealVector& t) const { return last_element_min_eig(states_, t); }

 private:
  std::span<const DensityMatrix> states_;
  int dim_;
};

/// Central-difference Hessian of F(t) from its analytic gradient, with steps
/// small against both t_j and the slack margin.
RealMatrix fd_hessian(std::span<const DensityMatrix> states, const ObjectiveFunction& f, const RealVector& t,
                      const Barrier& barrier) {
  const Eigen::Index n = t.size();
  const double margin = std::max(barrier.margin(t), 0.0);
  RealMatrix h(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double step = std::max(1e-4 * std::min(t(j), margin), 1e-300);
    RealVector up = t;
    RealVector down = t;
    up(j) += step;
    down(j) -= step;
    h.col(j) = (t_gradient(states, f, up) - t_gradient(states, f, down)) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

DomainError with_context(int k, const DomainError& e) {
  return DomainError("iteration " + std::to_string(k) + ": " + e.what());
}

RealVector free_traces(const Povm& p) {
  RealVector t(p.size() - 1);
  for (int l = 0; l + 1 < p.size(); ++l) t(l) = std::max(0.0, p[l].trace());
  return t;
}

class Recorder {
 public:
  Recorder(const OptimizerConfig& cfg, const Povm* reference) : cfg_(cfg), reference_(reference) {}

  void add(IterationTrace& trace, int k, double objective, double eps, bool accepted, const Povm& current) const {
    IterationRecord r;
    r.k = k;
    r.objective = objective;
    r.epsilon = eps;
    r.accepted = accepted;
    if (reference_ != nullptr) {
      auto fid = overall_povm_fidelity(current, *reference_);
      r.fid_overall = fid.overall;
      r.fid_elements = std::move(fid.per_element);
    }
    r.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    if (cfg_.record_iterates) r.iterate = current;
    trace.records.push_back(std::move(r));
  }

 private:
  const OptimizerConfig& cfg_;
  const Povm* reference_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<HermitianOperator> gradient_at(const ObjectiveFunction& f, const Povm& p, int k) {
  try {
    return f.grad(p);
  } catch (const DomainError& e) {
    throw with_context(k, e);
  }
}

OptimizationResult descend(const ObjectiveFunction& objective, const Povm& init, const OptimizerConfig& cfg,
                           const Povm* reference, bool accelerated) {
  cfg.validate();
  if (init.size() < 2) throw InvalidInput("optimization needs a POVM with at least 2 elements");

  const Recorder recorder(cfg, reference);
  OptimizationResult out;
  out.povm = init;

  double f_prev;
  try {
    f_prev = objective.eval(init);
  } catch (const DomainError& e) {
    throw with_context(0, e);
  }
  if (!std::isfinite(f_prev)) throw DomainError("iteration 0: objective is not finite at the initial POVM");

  double eps = cfg.epsilon;
  recorder.add(out.trace, 0, f_prev, eps, true, out.povm);

  // Momentum state (APG only). `companion` holds the L-1 free elements of E.
  std::vector<HermitianOperator> companion(init.free_elements().begin(), init.free_elements().end());
  double theta = 1.0;
  std::vector<HermitianOperator> grad;
  if (!accelerated) grad = gradient_at(objective, out.povm, 0);

  out.status = RunStatus::MaxIterations;
  int k = 1;
  for (; k <= cfg.max_iters; ++k) {
    Povm base = out.povm;
    if (accelerated) {
      try {
        grad = objective.grad(Povm::complete(companion));
        base = Povm::complete(companion);
      } catch (const DomainError&) {
        // The extrapolated companion left the likelihood's domain; restart
        // the momentum from the current POVM.
        companion.assign(out.povm.free_elements().begin(), out.povm.free_elements().end());
        theta = 1.0;
        grad = gradient_at(objective, out.povm, k);
      }
    }

    const auto raw = dg_update(base, grad, eps);
    const auto states = kernels::project_each(raw, cfg.gilbert);
    const auto sol = solve_t_subproblem(states, objective, ScaleVector(free_traces(out.povm)), cfg.t_solver);
    const double f_k = sol.value;

    if (!(f_k <= f_prev)) {
      recorder.add(out.trace, k, f_k, eps, false, out.povm);
      // An increase below stop_tol is round-off at a stationary point.
      if (f_k - f_prev < cfg.stop_tol) {
        out.status = RunStatus::Converged;
        break;
      }
      eps *= cfg.beta;
      if (accelerated) {
        companion.assign(out.povm.free_elements().begin(), out.povm.free_elements().end());
        theta = 1.0;
      }
      if (eps < cfg.min_epsilon) {
        out.status = RunStatus::Stalled;
        break;
      }
      continue;
    }

    Povm candidate = assemble_povm(states, sol.t);
    if (accelerated) {
      const double theta_next = next_theta(theta);
      const double momentum = (theta - 1.0) / theta_next;
      for (int l = 0; l + 1 < candidate.size(); ++l) {
        companion[static_cast<std::size_t>(l)] = candidate[l] + momentum * (candidate[l] - out.povm[l]);
      }
      theta = theta_next;
    }
    const double delta = f_prev - f_k;
    out.povm = std::move(candidate);
    f_prev = f_k;
    recorder.add(out.trace, k, f_k, eps, true, out.povm);
    if (delta < cfg.stop_tol) {
      out.status = RunStatus::Converged;
      break;
    }
    if (!accelerated) grad = gradient_at(objective, out.povm, k);
  }

  out.objective = f_prev;
  out.iterations = std::min(k, cfg.max_iters);
  out.final_epsilon = eps;
  return out;
}

}  // namespace

void TSolverConfig::validate() const {
  if (!(mu_start > 0.0) || !(mu_end > 0.0) || mu_end > mu_start) {
    throw InvalidInput("TSolverConfig needs 0 < mu_end <= mu_start");
  }
  if (!(mu_factor > 1.0)) throw InvalidInput("TSolverConfig.mu_factor must be > 1");
  if (max_newton < 1) throw InvalidInput("TSolverConfig.max_newton must be >= 1");
}

void OptimizerConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInput("epsilon must be > 0");
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidInput("beta must lie in (0, 1)");
  if (!(stop_tol >= 0.0)) throw InvalidInput("stop_tol must be >= 0");
  if (max_iters < 1) throw InvalidInput("max_iters must be >= 1");
  if (!(min_epsilon > 0.0)) throw InvalidInput("min_epsilon must be > 0");
  gilbert.validate();
  t_solver.validate();
}

ScaleVector::ScaleVector(RealVector t) : t_(std::move(t)) {
  for (Eigen::Index i = 0; i < t_.size(); ++i) {
    if (!(t_(i) >= 0.0) || !std::isfinite(t_(i))) throw InvalidInput("scale factors must be finite and >= 0");
  }
}

std::vector<double> IterationTrace::accepted_objectives() const {
  std::vector<double> out;
  for (const auto& r : records)
    if (r.accepted) out.push_back(r.objective);
  return out;
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged:
      return "converged";
    case RunStatus::MaxIterations:
      return "max_iterations";
    case RunStatus::Stalled:
      return "stalled";
  }
  return "unknown";
}

std::vector<HermitianOperator> dg_update(const Povm& povm, std::span<const HermitianOperator> grad, double epsilon) {
  if (static_cast<int>(grad.size()) != povm.size() - 1) throw InvalidInput("gradient must have L-1 entries");
  std::vector<HermitianOperator> out;
  out.reserve(grad.size());
  for (std::size_t l = 0; l < grad.size(); ++l) {
    if (grad[l].dim() != povm.dim()) throw InvalidInput("gradient dimension mismatch");
    out.push_back(povm[static_cast<int>(l)] - epsilon * grad[l]);
  }
  return out;
}

DensityMatrix normalize_and_project(const HermitianOperator& raw, const GilbertConfig& cfg) {
  const double tr = raw.trace();
  if (tr <= kNullTrace) return project_to_state_space(raw, cfg).state;
  return project_to_state_space(raw * (1.0 / tr), cfg).state;
}

TSolution solve_t_subproblem(std::span<const DensityMatrix> states, const ObjectiveFunction& objective,
                             const ScaleVector& start, const TSolverConfig& cfg) {
  cfg.validate();
  if (states.empty()) throw InvalidInput("t-subproblem needs at least one state");
  if (start.size() != static_cast<int>(states.size())) throw InvalidInput("start scale vector has the wrong length");
  for (const auto& s : states) {
    if (s.dim() != states.front().dim()) throw InvalidInput("t-subproblem states differ in dimension");
  }

  const Barrier barrier(states);
  auto f_at = [&](const RealVector& t) { return eval_or_inf(objective, assemble_unchecked(states, t)); };

  RealVector t = start.values().cwiseMax(kInteriorMargin);
  const double top = scaled_sum(states, t).eigenvalues().maxCoeff();
  if (top > 1.0 - kInteriorMargin) t *= (1.0 - kInteriorMargin) / top;
  double f = f_at(t);
  for (int i = 0; i < kMaxHalvings && (!std::isfinite(f) || !barrier.slack(t)); ++i) {
    t *= 0.5;
    f = f_at(t);
  }
  if (!std::isfinite(f) || !barrier.slack(t)) return {ScaleVector(t), kInf, false, 0};

  const RealVector anchor = t;
  const double f_anchor = f;
  const Eigen::Index n = t.size();
  int newton_steps = 0;

  for (double mu = cfg.mu_start; mu >= cfg.mu_end * (1.0 - 1e-12); mu /= cfg.mu_factor) {
    for (int it = 0; it < cfg.max_newton; ++it) {
      const auto llt = barrier.slack(t);
      RealVector g_bar;
      RealMatrix h_bar;
      barrier.derivatives(t, *llt, g_bar, h_bar);
      const RealVector g = t_gradient(states, objective, t) + mu * g_bar;
      const RealMatrix h = fd_hessian(states, objective, t, barrier) + mu * h_bar;
      const double phi = f + mu * barrier.value(t, *llt);

      // Levenberg damping until the Newton direction is a descent direction.
      RealVector dir;
      double damping = 0.0;
      const double scale = std::max(h.diagonal().cwiseAbs().maxCoeff(), 1e-300);
      for (int tries = 0; tries < 30; ++tries) {
        Eigen::LDLT<RealMatrix> ldlt(h + damping * RealMatrix::Identity(n, n));
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
          dir = -ldlt.solve(g);
          if (dir.allFinite() && g.dot(dir) < 0.0) break;
        }
        damping = damping == 0.0 ? 1e-10 * scale : damping * 10.0;
        dir.resize(0);
      }
      if (dir.size() == 0) break;

      const double decrement = -g.dot(dir);
      if (0.5 * decrement <= 1e-15 * std::max(1.0, std::abs(phi))) break;

      double alpha = 1.0;
      bool moved = false;
      for (int hv = 0; hv < kMaxHalvings; ++hv, alpha *= 0.5) {
        const RealVector trial = t + alpha * dir;
        const auto trial_llt = barrier.slack(trial);
        if (!trial_llt) continue;
        const double f_trial = f_at(trial);
        if (!std::isfinite(f_trial)) continue;
        if (f_trial + mu * barrier.value(trial, *trial_llt) <= phi - 1e-4 * alpha * decrement) {
          t = trial;
          f = f_trial;
          moved = true;
          break;
        }
      }
      ++newton_steps;
      if (!moved) break;
    }
  }

  // The interior pull can cost more than the barrier path wins back, e.g.
  // when `start` already sits at a boundary optimum.
  const RealVector& t0 = start.values();
  if (last_element_min_eig(states, t0) >= -kStateTol) {
    const double f0 = f_at(t0);
    if (f0 <= std::min(f, f_anchor)) return {start, f0, false, newton_steps};
  }
  if (!(f < f_anchor)) return {ScaleVector(anchor), f_anchor, false, newton_steps};
  return {ScaleVector(t), f, true, newton_steps};
}

Povm assemble_povm(std::span<const DensityMatrix> states, const ScaleVector& t, double tol) {
  if (states.empty() || t.size() != static_cast<int>(states.size())) {
    throw InvalidInput("assemble_povm needs one scale factor per state");
  }
  Povm p = assemble_unchecked(states, t.values());
  if (p[p.size() - 1].min_eigenvalue() < -tol) {
    throw ConstraintViolation("I - sum t_l rho_l is not positive semidefinite");
  }
  return p;
}

double next_theta(double theta) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta)); }

OptimizationResult run_dg(const ObjectiveFunction& objective, const Povm& init, const OptimizerConfig& cfg,
                          const Povm* reference) {
  return descend(objective, init, cfg, reference, false);
}

OptimizationResult run_apg(const ObjectiveFunction& objective, const Povm& init, const OptimizerConfig& cfg,
                           const Povm* reference) {
  return descend(objective, init, cfg, reference, true);
}

}  // namespace povmopt
