#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "povmopt/gilbert.hpp"

namespace povmopt {

/// A differentiable function over POVM space.
///
/// `grad` returns L-1 operators: the derivative with respect to the first
/// L-1 elements after substituting P_L = I - sum_{l<L} P_l. Both callables
/// must be safe for concurrent read-only use and throw DomainError where the
/// function is undefined.
struct ObjectiveFunction {
  std::function<double(const Povm&)> eval;
  std::function<std::vector<HermitianOperator>(const Povm&)> grad;
};

struct TSolverConfig {
  /// Barrier weights run from mu_start down to mu_end, divided by mu_factor
  /// at each level.
  double mu_start = 1e-2;
  double mu_end = 1e-12;
  double mu_factor = 10.0;
  /// Newton steps per barrier level.
  int max_newton = 40;

  void validate() const;
};

struct OptimizerConfig {
  double epsilon = 0.1;
  double beta = 0.5;
  double stop_tol = 1e-8;
  int max_iters = 5000;
  /// Give up with RunStatus::Stalled once epsilon shrinks below this.
  double min_epsilon = 1e-14;
  GilbertConfig gilbert{};
  TSolverConfig t_solver{};
  /// Store the accepted POVM in every trace record.
  bool record_iterates = false;

  void validate() const;
};

/// Non-negative scale factors t_l for the L-1 projected states.
class ScaleVector {
 public:
  ScaleVector() = default;
  /// Throws InvalidInput on a negative or non-finite entry.
  explicit ScaleVector(RealVector t);

  const RealVector& values() const { return t_; }
  int size() const { return static_cast<int>(t_.size()); }
  double operator[](int l) const { return t_(l); }

 private:
  RealVector t_;
};

struct TSolution {
  ScaleVector t;
  double value = 0.0;  // objective at t; +inf if no finite point was found
  bool improved = false;
  int iterations = 0;
};

struct IterationRecord {
  int k = 0;
  double objective = 0.0;
  double epsilon = 0.0;
  bool accepted = true;
  std::optional<double> fid_overall;
  std::vector<double> fid_elements;
  double elapsed_ms = 0.0;
  std::optional<Povm> iterate;
};

struct IterationTrace {
  std::vector<IterationRecord> records;

  /// Objective values of accepted records, in order.
  std::vector<double> accepted_objectives() const;
};

enum class RunStatus { Converged, MaxIterations, Stalled };

std::string_view to_string(RunStatus s);

struct OptimizationResult {
  Povm povm;
  IterationTrace trace;
  RunStatus status = RunStatus::MaxIterations;
  double objective = 0.0;
  int iterations = 0;
  double final_epsilon = 0.0;
};

/// Raw gradient step P_l - eps * G_l for l < L. The result may be unphysical.
std::vector<HermitianOperator> dg_update(const Povm& povm, std::span<const HermitianOperator> grad, double epsilon);

/// S(raw / tr raw), or S(raw) when tr raw <= 1e-12.
DensityMatrix normalize_and_project(const HermitianOperator& raw, const GilbertConfig& cfg = {});

/// Minimizes F over {P_l = t_l rho_l, P_L = I - sum t_l rho_l} with t >= 0 and
/// P_L PSD.
///
/// Log-barrier interior point: for decreasing mu, damped Newton steps on
/// F(t) - mu (sum_l ln t_l + ln det P_L). dF/dt_l = tr(rho_l G_l) comes from
/// `objective.grad`; the Hessian of F is a central difference of that
/// gradient. Iterates stay strictly feasible. `start` is first pulled into
/// the interior and halved until F is finite there. If the result does not
/// improve on that point, the point itself is returned with
/// `improved == false`.
TSolution solve_t_subproblem(std::span<const DensityMatrix> states, const ObjectiveFunction& objective,
                             const ScaleVector& start, const TSolverConfig& cfg = {});

/// {t_l rho_l} plus I - sum t_l rho_l. Throws ConstraintViolation when the
/// last element has an eigenvalue below -tol.
Povm assemble_povm(std::span<const DensityMatrix> states, const ScaleVector& t, double tol = kStateTol);

/// theta_k = (1 + sqrt(1 + 4 theta_{k-1}^2)) / 2
double next_theta(double theta);

/// Direct-gradient descent over POVM space. A step that raises F is
/// rejected: epsilon shrinks by beta and the previous POVM is kept.
OptimizationResult run_dg(const ObjectiveFunction& objective, const Povm& init, const OptimizerConfig& cfg,
                          const Povm* reference = nullptr);

/// Accelerated projected gradient: gradients are taken at the momentum
/// companion E. A rejected step also resets E to the current POVM and
/// theta to 1.
OptimizationResult run_apg(const ObjectiveFunction& objective, const Povm& init, const OptimizerConfig& cfg,
                           const Povm* reference = nullptr);

}  // namespace povmopt
