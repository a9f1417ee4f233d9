#include "povmopt/tomography.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "povmopt/kernels.hpp"

namespace povmopt {

namespace {

constexpr double kZeroProbability = 1e-300;

struct Table {
  RealMatrix p;        // L x M, last row = 1 - sum of the others
};

Table probability_table(std::span<const HermitianOperator> free, const FrequencyTable& freqs,
                        const ProbeEnsemble& probes) {
  if (static_cast<int>(free.size()) + 1 != freqs.outcomes()) {
    throw InvalidInput("frequency table has " + std::to_string(freqs.outcomes()) + " outcomes, POVM has " +
                       std::to_string(free.size() + 1));
  }
  if (freqs.probes() != probes.size()) throw InvalidInput("frequency table and probe ensemble disagree on M");
  if (free.front().dim() != probes.dim()) throw InvalidInput("POVM and probe dimensions differ");

  const auto head = kernels::born_table(free, probes.states());
  Table t{RealMatrix(head.rows() + 1, head.cols())};
  t.p.topRows(head.rows()) = head;
  t.p.row(head.rows()) = (1.0 - head.colwise().sum().array()).matrix();
  return t;
}

[[noreturn]] void zero_probability(Eigen::Index l, Eigen::Index m) {
  throw DomainError("zero-probability outcome observed (outcome " + std::to_string(l) + ", probe " +
                    std::to_string(m) + ")");
}

Ket qubit_x(int which) {
  Ket k(2);
  k << 1.0, (which == 0 ? 1.0 : -1.0);
  return k / std::sqrt(2.0);
}

/// Spin-1 J_x eigenvectors in the z basis ordered (-1, 0, +1).
Ket qutrit_x(int m) {
  const double r2 = std::sqrt(2.0);
  Ket k(3);
  switch (m) {
    case -1: k << 0.5, -r2 / 2.0, 0.5; break;
    case 0: k << 1.0 / r2, 0.0, -1.0 / r2; break;
    case 1: k << 0.5, r2 / 2.0, 0.5; break;
    default: throw InvalidInput("spin-1 projection must be -1, 0 or 1");
  }
  return k;
}

Ket superposition(const Ket& a, const Ket& b, double phase) {
  return (a + std::polar(1.0, phase) * b) / std::sqrt(2.0);
}

const std::array<double, 3> kPhases{0.0, std::numbers::pi / 2.0, std::numbers::pi};
const std::array<const char*, 3> kPhaseLabels{"0", "pi/2", "pi"};

std::string qutrit_label(int index) {
  static const std::array<const char*, 3> names{"-1", "0", "1"};
  return names[static_cast<std::size_t>(index)];
}

ProbeEnsemble one_qubit_probes() {
  const Ket z0 = basis_ket(2, 0);
  const Ket z1 = basis_ket(2, 1);
  const Complex i(0.0, 1.0);
  std::vector<DensityMatrix> states{
      DensityMatrix::pure(z0),          DensityMatrix::pure(z1),
      DensityMatrix::pure(z0 + z1),     DensityMatrix::pure(z0 - z1),
      DensityMatrix::pure(z0 + i * z1), DensityMatrix::pure(z0 - i * z1),
  };
  return {std::move(states), {"0z", "1z", "(0z+1z)/sqrt2", "(0z-1z)/sqrt2", "(0z+i1z)/sqrt2", "(0z-i1z)/sqrt2"}};
}

ProbeEnsemble one_qutrit_probes() {
  std::vector<DensityMatrix> states;
  std::vector<std::string> labels;
  for (int a = 0; a < 3; ++a) {
    states.push_back(DensityMatrix::pure(basis_ket(3, a)));
    labels.push_back(qutrit_label(a) + "z");
  }
  const std::array<std::pair<int, int>, 3> pairs{{{0, 1}, {1, 2}, {0, 2}}};
  for (const auto& [a, b] : pairs) {
    for (std::size_t j = 0; j < kPhases.size(); ++j) {
      states.push_back(DensityMatrix::pure(superposition(basis_ket(3, a), basis_ket(3, b), kPhases[j])));
      labels.push_back("(" + qutrit_label(a) + "z+e^{i" + kPhaseLabels[j] + "}" + qutrit_label(b) + "z)/sqrt2");
    }
  }
  return {std::move(states), std::move(labels)};
}

ProbeEnsemble two_qubit_probes() {
  auto ket = [](int a, int b) { return kron(basis_ket(2, a), basis_ket(2, b)); };
  auto name = [](int a, int b) { return std::to_string(a) + "z" + std::to_string(b) + "z"; };
  const std::array<std::pair<int, int>, 4> basis{{{0, 0}, {1, 1}, {0, 1}, {1, 0}}};
  std::vector<DensityMatrix> states;
  std::vector<std::string> labels;
  for (const auto& [a, b] : basis) {
    states.push_back(DensityMatrix::pure(ket(a, b)));
    labels.push_back(name(a, b));
  }
  using Pair = std::array<int, 4>;
  const std::array<Pair, 6> pairs{{{0, 0, 0, 1}, {0, 0, 1, 0}, {0, 0, 1, 1}, {0, 1, 1, 0}, {0, 1, 1, 1}, {1, 0, 1, 1}}};
  for (const auto& p : pairs) {
    for (std::size_t j = 0; j < kPhases.size(); ++j) {
      states.push_back(DensityMatrix::pure(superposition(ket(p[0], p[1]), ket(p[2], p[3]), kPhases[j])));
      labels.push_back("(" + name(p[0], p[1]) + "+e^{i" + kPhaseLabels[j] + "}" + name(p[2], p[3]) + ")/sqrt2");
    }
  }
  return {std::move(states), std::move(labels)};
}

ProbeEnsemble two_qutrit_probes() {
  std::vector<DensityMatrix> states;
  std::vector<std::string> labels;
  auto z = [](int a) { return basis_ket(3, a); };
  // Product basis in the listed order: |1,-1>, |-1,0>, |-1,1>, |0,-1>, |0,0>, |0,1>, |1,0>, |1,1>, |-1,-1>.
  const std::array<std::pair<int, int>, 9> basis{{{2, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}, {2, 1}, {2, 2}, {0, 0}}};
  for (const auto& [a, b] : basis) {
    states.push_back(DensityMatrix::pure(kron(z(a), z(b))));
    labels.push_back(qutrit_label(a) + "z," + qutrit_label(b) + "z");
  }
  // Local superpositions on either party with the other in a z eigenstate,
  // relative phases 0 and pi/2.
  const std::array<std::pair<int, int>, 3> pairs{{{0, 1}, {1, 2}, {0, 2}}};
  const std::array<double, 2> phases{0.0, std::numbers::pi / 2.0};
  for (int fixed = 0; fixed < 3; ++fixed) {
    for (const auto& [a, b] : pairs) {
      for (std::size_t j = 0; j < phases.size(); ++j) {
        const Ket sup = superposition(z(a), z(b), phases[j]);
        const std::string sup_label =
            "(" + qutrit_label(a) + "z+e^{i" + kPhaseLabels[j] + "}" + qutrit_label(b) + "z)/sqrt2";
        states.push_back(DensityMatrix::pure(kron(z(fixed), sup)));
        labels.push_back(qutrit_label(fixed) + "z," + sup_label);
        states.push_back(DensityMatrix::pure(kron(sup, z(fixed))));
        labels.push_back(sup_label + "," + qutrit_label(fixed) + "z");
      }
    }
  }
  return {std::move(states), std::move(labels)};
}

std::vector<HermitianOperator> projectors(const std::vector<Ket>& kets) {
  std::vector<HermitianOperator> out;
  out.reserve(kets.size());
  for (const auto& k : kets) out.push_back(DensityMatrix::pure(k).op());
  return out;
}

}  // namespace

ProbeEnsemble::ProbeEnsemble(std::vector<DensityMatrix> states, std::vector<std::string> labels)
    : states_(std::move(states)), labels_(std::move(labels)) {
  if (states_.empty()) throw InvalidInput("probe ensemble is empty");
  if (labels_.size() != states_.size()) throw InvalidInput("probe labels and states differ in count");
  for (const auto& s : states_) {
    if (s.dim() != states_.front().dim()) throw InvalidInput("probe states differ in dimension");
  }
}

CountsTable::CountsTable(CountMatrix counts, long long shots_per_state)
    : counts_(std::move(counts)), shots_(shots_per_state) {
  if (shots_ < 1) throw InvalidInput("shots per state must be >= 1");
  if (counts_.rows() < 1 || counts_.cols() < 1) throw InvalidInput("counts table is empty");
  if ((counts_.array() < 0).any()) throw InvalidInput("counts must be non-negative");
  for (Eigen::Index m = 0; m < counts_.cols(); ++m) {
    if (counts_.col(m).sum() != shots_) {
      throw InvalidInput("counts for probe " + std::to_string(m) + " do not sum to shots_per_state");
    }
  }
}

FrequencyTable::FrequencyTable(RealMatrix f) : f_(std::move(f)) {
  if (f_.rows() < 1 || f_.cols() < 1) throw InvalidInput("frequency table is empty");
  if ((f_.array() < 0.0).any() || (f_.array() > 1.0).any()) throw InvalidInput("frequencies must lie in [0, 1]");
  for (Eigen::Index m = 0; m < f_.cols(); ++m) {
    if (std::abs(f_.col(m).sum() - 1.0) > 1e-12) throw InvalidInput("frequency column does not sum to 1");
  }
}

FrequencyTable FrequencyTable::from_counts(const CountsTable& counts) {
  return FrequencyTable(counts.counts().cast<double>() / static_cast<double>(counts.shots_per_state()));
}

RealMatrix born_probabilities(const Povm& povm, const ProbeEnsemble& probes) {
  if (povm.empty()) throw InvalidInput("POVM has no elements");
  if (povm.dim() != probes.dim()) throw InvalidInput("POVM and probe dimensions differ");
  return kernels::born_table(povm.elements(), probes.states()).cwiseMax(0.0).cwiseMin(1.0);
}

CountsTable simulate_counts(const Povm& povm, const ProbeEnsemble& probes, long long shots, std::uint64_t seed) {
  if (shots < 1) throw InvalidInput("shots must be >= 1");
  const RealMatrix p = born_probabilities(povm, probes);
  std::mt19937_64 rng(seed);
  CountMatrix counts = CountMatrix::Zero(p.rows(), p.cols());
  for (Eigen::Index m = 0; m < p.cols(); ++m) {
    // Sequential conditional binomials: n_l ~ Bin(remaining, p_l / mass_left).
    long long remaining = shots;
    double mass = p.col(m).sum();
    for (Eigen::Index l = 0; l + 1 < p.rows() && remaining > 0; ++l) {
      const double q = mass > 0.0 ? std::clamp(p(l, m) / mass, 0.0, 1.0) : 0.0;
      std::binomial_distribution<long long> draw(remaining, q);
      counts(l, m) = draw(rng);
      remaining -= counts(l, m);
      mass -= p(l, m);
    }
    counts(p.rows() - 1, m) += remaining;
  }
  return CountsTable(std::move(counts), shots);
}

double neg_log_likelihood(std::span<const HermitianOperator> free, const FrequencyTable& freqs,
                          const ProbeEnsemble& probes) {
  if (free.empty()) throw InvalidInput("need at least one free POVM element");
  const Table t = probability_table(free, freqs, probes);
  const RealMatrix& f = freqs.values();
  double total = 0.0;
  for (Eigen::Index m = 0; m < f.cols(); ++m) {
    for (Eigen::Index l = 0; l < f.rows(); ++l) {
      const double fl = f(l, m);
      if (fl == 0.0) continue;
      const double pl = t.p(l, m);
      if (!(pl > kZeroProbability)) zero_probability(l, m);
      total -= fl * std::log(pl);
    }
  }
  return total;
}

std::vector<HermitianOperator> nll_gradient(std::span<const HermitianOperator> free, const FrequencyTable& freqs,
                                            const ProbeEnsemble& probes) {
  if (free.empty()) throw InvalidInput("need at least one free POVM element");
  const Table t = probability_table(free, freqs, probes);
  const RealMatrix& f = freqs.values();
  const Eigen::Index last = f.rows() - 1;

  auto ratio = [&](Eigen::Index l, Eigen::Index m) {
    if (f(l, m) == 0.0) return 0.0;
    if (!(t.p(l, m) > kZeroProbability)) zero_probability(l, m);
    return f(l, m) / t.p(l, m);
  };

  RealMatrix coeff(last, f.cols());
  for (Eigen::Index m = 0; m < f.cols(); ++m) {
    const double tail = ratio(last, m);
    for (Eigen::Index l = 0; l < last; ++l) coeff(l, m) = -(ratio(l, m) - tail);
  }
  return kernels::weighted_sums(coeff, probes.states());
}

ObjectiveFunction make_nll_objective(FrequencyTable freqs, ProbeEnsemble probes) {
  auto data = std::make_shared<const std::pair<FrequencyTable, ProbeEnsemble>>(std::move(freqs), std::move(probes));
  return {
      [data](const Povm& p) { return neg_log_likelihood(p.free_elements(), data->first, data->second); },
      [data](const Povm& p) { return nll_gradient(p.free_elements(), data->first, data->second); },
  };
}

std::optional<Scenario> parse_scenario(std::string_view name) {
  if (name == "one-qubit") return Scenario::OneQubit;
  if (name == "one-qutrit") return Scenario::OneQutrit;
  if (name == "two-qubits") return Scenario::TwoQubits;
  if (name == "two-qutrits") return Scenario::TwoQutrits;
  return std::nullopt;
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::OneQubit: return "one-qubit";
    case Scenario::OneQutrit: return "one-qutrit";
    case Scenario::TwoQubits: return "two-qubits";
    case Scenario::TwoQutrits: return "two-qutrits";
  }
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  if (name == "dg" || name == "DG") return Algorithm::DG;
  if (name == "apg" || name == "APG") return Algorithm::APG;
  return std::nullopt;
}

std::string_view to_string(Algorithm a) { return a == Algorithm::DG ? "dg" : "apg"; }

long long default_shots(Scenario s) {
  switch (s) {
    case Scenario::OneQubit: return 300;
    case Scenario::OneQutrit: return 100000;
    case Scenario::TwoQubits: return 100000;
    case Scenario::TwoQutrits: return 500000;
  }
  return 300;
}

ProbeEnsemble probe_ensemble(Scenario s) {
  switch (s) {
    case Scenario::OneQubit: return one_qubit_probes();
    case Scenario::OneQutrit: return one_qutrit_probes();
    case Scenario::TwoQubits: return two_qubit_probes();
    case Scenario::TwoQutrits: return two_qutrit_probes();
  }
  throw InvalidInput("unknown scenario");
}

Povm target_povm(Scenario s) {
  switch (s) {
    case Scenario::OneQubit:
      return Povm(projectors({qubit_x(0), qubit_x(1)}));
    case Scenario::OneQutrit:
      return Povm(projectors({qutrit_x(-1), qutrit_x(0), qutrit_x(1)}));
    case Scenario::TwoQubits:
      return Povm(projectors({kron(qubit_x(0), qubit_x(0)), kron(qubit_x(0), qubit_x(1)),
                              kron(qubit_x(1), qubit_x(0)), kron(qubit_x(1), qubit_x(1))}));
    case Scenario::TwoQutrits: {
      const std::array<std::pair<int, int>, 9> order{
          {{0, 1}, {0, -1}, {1, 0}, {1, -1}, {0, 0}, {-1, 0}, {1, 1}, {-1, 1}, {-1, -1}}};
      std::vector<Ket> kets;
      for (const auto& [a, b] : order) kets.push_back(kron(qutrit_x(a), qutrit_x(b)));
      return Povm(projectors(kets));
    }
  }
  throw InvalidInput("unknown scenario");
}

TomographyResult reconstruct_povm(const ProbeEnsemble& probes, const CountsTable& counts, Algorithm algorithm,
                                  std::uint64_t seed, const OptimizerConfig& cfg, const Povm* reference) {
  if (counts.probes() != probes.size()) throw InvalidInput("counts and probes disagree on the number of states");
  if (counts.outcomes() < 2) throw InvalidInput("need at least two outcomes");
  if (reference != nullptr && (reference->size() != counts.outcomes() || reference->dim() != probes.dim())) {
    throw InvalidInput("reference POVM does not match the data");
  }

  const ObjectiveFunction nll = make_nll_objective(FrequencyTable::from_counts(counts), probes);
  const Povm init = random_povm(probes.dim(), counts.outcomes(), seed + 1);

  TomographyResult out;
  out.run = algorithm == Algorithm::DG ? run_dg(nll, init, cfg, reference) : run_apg(nll, init, cfg, reference);
  out.povm = out.run.povm;
  if (reference != nullptr) out.fidelity = overall_povm_fidelity(out.povm, *reference);
  out.counts = counts;
  return out;
}

TomographyResult run_tomography(Scenario scenario, Algorithm algorithm, long long shots, std::uint64_t seed,
                                const OptimizerConfig& cfg) {
  const Povm target = target_povm(scenario);
  const ProbeEnsemble probes = probe_ensemble(scenario);
  const CountsTable counts = simulate_counts(target, probes, shots, seed);
  return reconstruct_povm(probes, counts, algorithm, seed, cfg, &target);
}

}  // namespace povmopt
