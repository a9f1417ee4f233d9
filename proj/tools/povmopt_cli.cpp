#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "povmopt/io.hpp"
#include "povmopt/kernels.hpp"
#include "povmopt/qdsc.hpp"
#include "povmopt/tomography.hpp"

namespace fs = std::filesystem;
using namespace povmopt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitUsage = 64;

struct CommonOptions {
  std::uint64_t seed = 1;
  std::string seeds;
  std::optional<long long> shots;
  std::optional<double> epsilon;
  std::optional<double> beta;
  std::optional<double> stop_tol;
  std::optional<int> max_iters;
  std::string out = "out";
  std::string format = "csv";
  std::string counts_file;
};

struct TomographyOptions {
  std::string scenario;
  std::string algorithm = "apg";
  std::string probes_file;
};

struct ProjectOptions {
  std::string input;
  std::string out;
};

struct ValidateOptions {
  std::string input;
  double tol = kStateTol;
};

/// One line of console output per seed, collected so batch runs print in
/// seed order.
struct SeedOutcome {
  std::uint64_t seed = 0;
  int code = kExitOk;
  std::string text;
};

std::vector<std::uint64_t> seed_list(const CommonOptions& o) {
  if (o.seeds.empty()) return {o.seed};
  const auto dots = o.seeds.find("..");
  if (dots == std::string::npos) throw CLI::ValidationError("--seeds", "expected a range like 1..5");
  try {
    std::size_t used_a = 0;
    std::size_t used_b = 0;
    const std::string a = o.seeds.substr(0, dots);
    const std::string b = o.seeds.substr(dots + 2);
    const unsigned long long lo = std::stoull(a, &used_a);
    const unsigned long long hi = std::stoull(b, &used_b);
    if (used_a != a.size() || used_b != b.size() || lo > hi) throw std::invalid_argument("range");
    std::vector<std::uint64_t> out;
    for (unsigned long long s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  } catch (const std::exception&) {
    throw CLI::ValidationError("--seeds", "expected a range like 1..5");
  }
}

fs::path seed_dir(const CommonOptions& o, std::uint64_t seed, bool batch) {
  return batch ? fs::path(o.out) / ("seed_" + std::to_string(seed)) : fs::path(o.out);
}

void write_trace(const fs::path& dir, const IterationTrace& trace, const std::string& format) {
  if (format == "json") {
    io::write_text_file(dir / "trace.jsonl", io::trace_to_jsonl(trace));
  } else {
    io::write_text_file(dir / "trace.csv", io::trace_to_csv(trace));
  }
}

int status_code(RunStatus s) { return s == RunStatus::Converged ? kExitOk : kExitNotConverged; }

std::string format_fidelities(const FidelityReport& f) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  for (std::size_t l = 0; l < f.per_element.size(); ++l) os << (l ? " " : "") << f.per_element[l];
  return os.str();
}

/// Runs `body` once per seed, in parallel for batches, and folds the exit
/// codes: any error wins, then any non-converged run.
int for_each_seed(const CommonOptions& o, const std::function<SeedOutcome(std::uint64_t, bool)>& body) {
  const auto seeds = seed_list(o);
  const bool batch = !o.seeds.empty();
  std::vector<SeedOutcome> results(seeds.size());
  kernels::parallel_for(static_cast<int>(seeds.size()), [&](int i) {
    const std::uint64_t s = seeds[static_cast<std::size_t>(i)];
    try {
      results[static_cast<std::size_t>(i)] = body(s, batch);
    } catch (const std::exception& e) {
      results[static_cast<std::size_t>(i)] = {s, kExitError, std::string("error: ") + e.what()};
    }
  });
  int code = kExitOk;
  for (const auto& r : results) {
    (r.code == kExitError ? std::cerr : std::cout) << (batch ? "seed " + std::to_string(r.seed) + ": " : "")
                                                    << r.text << '\n';
    if (r.code == kExitError) code = kExitError;
    else if (r.code == kExitNotConverged && code == kExitOk) code = kExitNotConverged;
  }
  return code;
}

OptimizerConfig optimizer_config(const CommonOptions& o) {
  OptimizerConfig cfg;
  if (o.epsilon) cfg.epsilon = *o.epsilon;
  if (o.beta) cfg.beta = *o.beta;
  if (o.stop_tol) cfg.stop_tol = *o.stop_tol;
  if (o.max_iters) cfg.max_iters = *o.max_iters;
  cfg.validate();
  return cfg;
}

QdscConfig qdsc_config(const CommonOptions& o) {
  QdscConfig cfg;
  if (o.shots) cfg.shots = *o.shots;
  if (o.epsilon) cfg.epsilon = *o.epsilon;
  if (o.beta) cfg.beta = *o.beta;
  if (o.stop_tol) cfg.stop_tol = *o.stop_tol;
  if (o.max_iters) cfg.max_iters = *o.max_iters;
  cfg.validate();
  return cfg;
}

int cmd_tomography(const CommonOptions& o, const TomographyOptions& t) {
  const Scenario scenario = *parse_scenario(t.scenario);
  const Algorithm algorithm = *parse_algorithm(t.algorithm);
  const OptimizerConfig cfg = optimizer_config(o);
  const long long shots = o.shots.value_or(default_shots(scenario));
  const Povm target = target_povm(scenario);
  const ProbeEnsemble probes = t.probes_file.empty() ? probe_ensemble(scenario)
                                                     : io::probes_from_json(io::read_json_file(t.probes_file));
  if (probes.dim() != target.dim()) throw InvalidInput("probe dimension does not match the scenario");
  const std::optional<CountsTable> imported =
      o.counts_file.empty() ? std::nullopt : std::optional(io::counts_from_json(io::read_json_file(o.counts_file)));

  return for_each_seed(o, [&](std::uint64_t seed, bool batch) {
    const CountsTable counts = imported ? *imported : simulate_counts(target, probes, shots, seed);
    const TomographyResult r = reconstruct_povm(probes, counts, algorithm, seed, cfg, &target);
    const fs::path dir = seed_dir(o, seed, batch);
    io::write_text_file(dir / "povm.json", io::dump(io::povm_to_json(r.povm)));
    io::write_text_file(dir / "fidelity.json", io::dump(io::fidelity_to_json(r.fidelity)));
    io::write_text_file(dir / "counts.json", io::dump(io::counts_to_json(r.counts)));
    write_trace(dir, r.run.trace, o.format);
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << "overall fidelity " << r.fidelity.overall << " (" << to_string(r.run.status) << ", "
       << r.run.iterations << " iterations, NLL " << r.run.objective << ")";
    return SeedOutcome{seed, status_code(r.run.status), os.str()};
  });
}

int cmd_qdsc(const CommonOptions& o) {
  const QdscConfig cfg = qdsc_config(o);
  const Povm target = sic_povm_qubit();
  const ProbeEnsemble probes = qdsc_probes();
  const std::optional<CountsTable> imported =
      o.counts_file.empty() ? std::nullopt : std::optional(io::counts_from_json(io::read_json_file(o.counts_file)));

  return for_each_seed(o, [&](std::uint64_t seed, bool batch) {
    const CountsTable counts = imported ? *imported : simulate_counts(target, probes, cfg.shots, seed);
    const QdscResult r = reconstruct_qdsc(QdscData::from_counts(counts), cfg, &target);
    const fs::path dir = seed_dir(o, seed, batch);
    io::write_text_file(dir / "povm.json", io::dump(io::povm_to_json(r.povm)));
    io::write_text_file(dir / "fidelity.json", io::dump(io::fidelity_to_json(r.fidelity)));
    io::write_text_file(dir / "counts.json", io::dump(io::counts_to_json(counts)));
    write_trace(dir, r.trace, o.format);
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << "element fidelities " << format_fidelities(r.fidelity) << " (" << to_string(r.status)
       << ", " << r.iterations << " iterations, cost " << r.cost << ")";
    return SeedOutcome{seed, status_code(r.status), os.str()};
  });
}

int cmd_project(const ProjectOptions& p) {
  const Matrix m = io::matrix_document_from_json(io::read_json_file(p.input));
  if (!is_hermitian(m, 1e-6)) throw InvalidInput("input matrix is not Hermitian within 1e-6");
  const ProjectionResult r = project_to_state_space(m);
  io::Json j = io::matrix_document(r.state.matrix());
  j["kind"] = "projection";
  j["distance"] = r.distance;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  const std::string text = io::dump(j);
  if (p.out.empty()) {
    std::cout << text;
  } else {
    io::write_text_file(fs::path(p.out) / "state.json", text);
    std::cout << "distance " << r.distance << '\n';
  }
  return kExitOk;
}

int cmd_validate(const ValidateOptions& v) {
  const Povm p = io::povm_from_json(io::read_json_file(v.input));
  const bool ok = is_valid_povm(p, v.tol);
  std::cout << (ok ? "valid" : "invalid") << " POVM: " << p.size() << " elements, dim " << p.dim() << '\n';
  return ok ? kExitOk : kExitNotConverged;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--seed", o.seed, "Seed for simulation and initialization")->capture_default_str();
  cmd->add_option("--seeds", o.seeds, "Run a seed range a..b in parallel, one subdirectory per seed");
  cmd->add_option("--shots", o.shots, "Shots per probe state")->check(CLI::PositiveNumber);
  cmd->add_option("--epsilon", o.epsilon, "Initial step size")->check(CLI::PositiveNumber);
  cmd->add_option("--beta", o.beta, "Step shrink factor in (0,1)")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--stop-tol", o.stop_tol, "Stop when an accepted step changes F by less")->check(CLI::NonNegativeNumber);
  cmd->add_option("--max-iters", o.max_iters, "Iteration limit")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Output directory (created if missing)")->capture_default_str();
  cmd->add_option("--format", o.format, "Trace format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmd->add_option("--counts", o.counts_file, "Use counts from this JSON file instead of simulating")
      ->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"POVM optimization: measurement tomography, detector self-characterization, state projection"};
  app.require_subcommand(1);

  CommonOptions tomo_common;
  TomographyOptions tomo;
  auto* tomography = app.add_subcommand("tomography", "Maximum-likelihood POVM reconstruction");
  tomography->add_option("--scenario", tomo.scenario, "Scenario")
      ->required()
      ->check(CLI::IsMember({"one-qubit", "one-qutrit", "two-qubits", "two-qutrits"}));
  tomography->add_option("--algorithm", tomo.algorithm, "Optimizer")
      ->check(CLI::IsMember({"dg", "apg"}))
      ->capture_default_str();
  tomography->add_option("--probes", tomo.probes_file, "Probe ensemble JSON replacing the scenario default")
      ->check(CLI::ExistingFile);
  add_common(tomography, tomo_common);

  CommonOptions qdsc_common;
  auto* qdsc = app.add_subcommand("qdsc", "Self-characterization of the qubit SIC POVM");
  add_common(qdsc, qdsc_common);

  ProjectOptions proj;
  auto* project = app.add_subcommand("project", "Nearest density matrix to a Hermitian matrix");
  project->add_option("input", proj.input, "Matrix JSON file")->required();
  project->add_option("--out", proj.out, "Write state.json here instead of printing");

  ValidateOptions val;
  auto* validate = app.add_subcommand("validate", "Check a POVM JSON file");
  validate->add_option("input", val.input, "POVM JSON file")->required();
  validate->add_option("--tol", val.tol, "Tolerance")->check(CLI::NonNegativeNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*tomography) {
      seed_list(tomo_common);
      return cmd_tomography(tomo_common, tomo);
    }
    if (*qdsc) {
      seed_list(qdsc_common);
      return cmd_qdsc(qdsc_common);
    }
    if (*project) return cmd_project(proj);
    if (*validate) return cmd_validate(val);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}
