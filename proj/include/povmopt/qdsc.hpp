#pragma once

#include <cstdint>

#include "povmopt/optimizer.hpp"
#include "povmopt/tomography.hpp"

namespace povmopt {

/// Qubit POVM in Bloch form: P_l = a_l I + b_l . sigma.
struct BlochModel {
  RealVector a;         // length L
  RealMatrix B;         // 3 x L, columns b_l, gauge fixed
  RealMatrix N;         // L x L Gram matrix b_i . b_l
  RealMatrix N_pinv;    // Moore-Penrose pseudoinverse of N
  bool rank_clamped = false;
};

/// Outcome frequency vectors f_m, one column per probe (L x M).
class QdscData {
 public:
  QdscData() = default;
  /// Throws InvalidInput unless entries are non-negative and each column
  /// sums to 1 within 1e-12.
  explicit QdscData(RealMatrix freqs);
  static QdscData from_counts(const CountsTable& counts);
  /// Noiseless frequencies: the Born probabilities of `povm` on `probes`.
  static QdscData exact(const Povm& povm, const ProbeEnsemble& probes);

  const RealMatrix& freqs() const { return f_; }
  int outcomes() const { return static_cast<int>(f_.rows()); }
  int probes() const { return static_cast<int>(f_.cols()); }

 private:
  RealMatrix f_;
};

/// Pseudoinverse with singular values below rel_cutoff * sigma_max zeroed.
RealMatrix pseudo_inverse(const RealMatrix& m, double rel_cutoff = 1e-10);

struct BlochFactor {
  RealMatrix B;  // 3 x L
  bool rank_clamped = false;
};

/// B with B^T B = N from the three largest eigenpairs, rotated so that b_1
/// points along +z, b_2 lies in the xz-plane with b_2x >= 0, and the first
/// remaining vector with a y component has b_y >= 0. Throws InvalidInput
/// when N is not symmetric or has an eigenvalue below -1e-9.
BlochFactor factor_to_bloch(const RealMatrix& N);

/// a_l = tr(P_l) / 2, N_il = tr(P_i P_l) / 2 - tr(P_i) tr(P_l) / 4.
/// Throws UnsupportedDimension unless dim == 2.
BlochModel bloch_decompose(const Povm& p);

/// Operators a_l I + b_l . sigma. No physicality check.
std::vector<HermitianOperator> bloch_operators(const RealVector& a, const RealMatrix& B);

/// The same POVM rotated into the frame used by factor_to_bloch.
Povm gauge_fixed(const Povm& p);

/// sum_m [1 - (f_m - a)^T N+ (f_m - a)]^2
double qdsc_cost(const RealVector& a, const RealMatrix& N_pinv, const QdscData& data);
double qdsc_cost(const BlochModel& model, const QdscData& data);

struct QdscGradient {
  RealVector a;
  RealMatrix N_pinv;
};

/// Gradients of qdsc_cost with respect to a and to the entries of N+.
QdscGradient qdsc_gradients(const RealVector& a, const RealMatrix& N_pinv, const QdscData& data);
QdscGradient qdsc_gradients(const BlochModel& model, const QdscData& data);

/// qdsc_cost as a function of a qubit POVM, with the matching gradient with
/// respect to the first L-1 elements.
ObjectiveFunction make_qdsc_objective(QdscData data);

/// Four subnormalized projectors with tetrahedral Bloch vectors.
Povm sic_povm_qubit();

/// The poles plus 48 states on six latitude rings of eight.
ProbeEnsemble qdsc_probes();

struct QdscConfig {
  long long shots = 200;
  double epsilon = 0.03;
  double beta = 0.5;
  double stop_tol = 1e-10;
  int max_iters = 50;
  double min_epsilon = 1e-14;
  GilbertConfig gilbert{};
  TSolverConfig t_solver{};
  bool record_iterates = false;

  void validate() const;
};

struct QdscResult {
  Povm povm;  // gauge fixed
  FidelityReport fidelity;
  IterationTrace trace;
  RunStatus status = RunStatus::MaxIterations;
  double cost = 0.0;
  int iterations = 0;
  double final_epsilon = 0.0;
};

/// Data-only starting point: a = mean of the f_m and N = 3 Cov(f_m), which is
/// exact for pure probes spread evenly over the Bloch sphere, mapped to a
/// valid POVM the same way as an iterate.
Povm moment_init(const QdscData& data, const QdscConfig& cfg = {});

/// Accelerated gradient steps on (N+, a). Each step is mapped back to a POVM
/// by factoring N, rebuilding P_l for l < L and projecting each onto a state.
/// Traces come from 2 a_l; the scale subproblem only runs when they would
/// leave P_L with a negative eigenvalue. Step lengths are relative: the a and
/// N+ blocks each move by epsilon times their own norm. Fidelities are taken
/// after gauge-fixing both sides.
QdscResult reconstruct_qdsc(const QdscData& data, const Povm& init, const QdscConfig& cfg,
                            const Povm* reference = nullptr);
/// Same, from moment_init(data).
QdscResult reconstruct_qdsc(const QdscData& data, const QdscConfig& cfg, const Povm* reference = nullptr);

/// Simulates the SIC POVM on qdsc_probes() with `seed` and reconstructs it.
QdscResult run_qdsc(std::uint64_t seed, const QdscConfig& cfg = {});

}  // namespace povmopt
