#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "povmopt/optimizer.hpp"

namespace povmopt {

/// Known input states rho_m with display labels.
class ProbeEnsemble {
 public:
  ProbeEnsemble() = default;
  /// Throws InvalidInput when empty, when dimensions differ, or when the
  /// label count does not match.
  ProbeEnsemble(std::vector<DensityMatrix> states, std::vector<std::string> labels);

  int dim() const { return states_.front().dim(); }
  int size() const { return static_cast<int>(states_.size()); }
  const std::vector<DensityMatrix>& states() const { return states_; }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<DensityMatrix> states_;
  std::vector<std::string> labels_;
};

using CountMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

/// n_lm outcome counts (L rows, M columns), n shots per probe state.
class CountsTable {
 public:
  CountsTable() = default;
  /// Throws InvalidInput on negative counts or a column not summing to n.
  CountsTable(CountMatrix counts, long long shots_per_state);

  const CountMatrix& counts() const { return counts_; }
  long long shots_per_state() const { return shots_; }
  int outcomes() const { return static_cast<int>(counts_.rows()); }
  int probes() const { return static_cast<int>(counts_.cols()); }

 private:
  CountMatrix counts_;
  long long shots_ = 0;
};

/// f_lm = n_lm / n, columns summing to 1.
class FrequencyTable {
 public:
  FrequencyTable() = default;
  /// Throws InvalidInput unless every entry is in [0,1] and columns sum to 1
  /// within 1e-12.
  explicit FrequencyTable(RealMatrix f);
  static FrequencyTable from_counts(const CountsTable& counts);

  const RealMatrix& values() const { return f_; }
  int outcomes() const { return static_cast<int>(f_.rows()); }
  int probes() const { return static_cast<int>(f_.cols()); }

 private:
  RealMatrix f_;
};

/// p_lm = tr(rho_m P_l), clamped to [0, 1].
RealMatrix born_probabilities(const Povm& povm, const ProbeEnsemble& probes);

/// Each column is an independent multinomial draw of `shots` outcomes from
/// the Born distribution of that probe.
CountsTable simulate_counts(const Povm& povm, const ProbeEnsemble& probes, long long shots, std::uint64_t seed);

/// -sum_{l<L,m} f_lm ln tr(rho_m P_l) - sum_m f_Lm ln(1 - sum_{l<L} p_lm),
/// with 0 ln p := 0. Throws DomainError when an observed outcome has
/// probability <= 1e-300.
double neg_log_likelihood(std::span<const HermitianOperator> free, const FrequencyTable& freqs,
                          const ProbeEnsemble& probes);

/// G_l = -sum_m (f_lm / p_lm - f_Lm / p_Lm) rho_m for l < L.
std::vector<HermitianOperator> nll_gradient(std::span<const HermitianOperator> free, const FrequencyTable& freqs,
                                            const ProbeEnsemble& probes);

ObjectiveFunction make_nll_objective(FrequencyTable freqs, ProbeEnsemble probes);

enum class Scenario { OneQubit, OneQutrit, TwoQubits, TwoQutrits };
enum class Algorithm { DG, APG };

std::optional<Scenario> parse_scenario(std::string_view name);
std::string_view to_string(Scenario s);
std::optional<Algorithm> parse_algorithm(std::string_view name);
std::string_view to_string(Algorithm a);

/// Default shots per probe state: 300, 1e5, 1e5, 5e5.
long long default_shots(Scenario s);

ProbeEnsemble probe_ensemble(Scenario s);

/// Projective spin-x measurement; two-party scenarios use products of
/// single-party x projectors.
Povm target_povm(Scenario s);

struct TomographyResult {
  Povm povm;
  FidelityReport fidelity;
  OptimizationResult run;
  CountsTable counts;
};

/// Maximum-likelihood reconstruction from given counts, starting from
/// random_povm(d, L, seed + 1). `reference` feeds the per-iteration fidelity.
TomographyResult reconstruct_povm(const ProbeEnsemble& probes, const CountsTable& counts, Algorithm algorithm,
                                  std::uint64_t seed, const OptimizerConfig& cfg, const Povm* reference = nullptr);

/// Simulates counts of the scenario's target POVM and reconstructs it.
TomographyResult run_tomography(Scenario scenario, Algorithm algorithm, long long shots, std::uint64_t seed,
                                const OptimizerConfig& cfg = {});

}  // namespace povmopt
