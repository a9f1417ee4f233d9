#include "povmopt/kernels.hpp"

#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>

#include <omp.h>

#include "povmopt/optimizer.hpp"

namespace povmopt::kernels {

namespace {

// Below this many complex multiply-adds the fork/join overhead dominates.
constexpr long kParallelWork = 200000;

bool worth_parallel(long work) { return work >= kParallelWork && thread_cap() > 1; }

double born_entry(const HermitianOperator& e, const DensityMatrix& rho) { return hs_inner(rho.matrix(), e.matrix()); }

HermitianOperator weighted_sum(const RealMatrix& coeff, Eigen::Index l, std::span<const DensityMatrix> probes) {
  const int d = probes.front().dim();
  HermitianOperator acc = HermitianOperator::zero(d);
  for (std::size_t m = 0; m < probes.size(); ++m) {
    const double c = coeff(l, static_cast<Eigen::Index>(m));
    if (c != 0.0) acc += c * probes[m].op();
  }
  return acc;
}

}  // namespace

int thread_cap() {
  if (const char* env = std::getenv("POVM_OPT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

RealMatrix born_table_serial(std::span<const HermitianOperator> elements, std::span<const DensityMatrix> probes) {
  RealMatrix table(elements.size(), probes.size());
  for (std::size_t l = 0; l < elements.size(); ++l)
    for (std::size_t m = 0; m < probes.size(); ++m)
      table(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m)) = born_entry(elements[l], probes[m]);
  return table;
}

RealMatrix born_table_parallel(std::span<const HermitianOperator> elements, std::span<const DensityMatrix> probes) {
  const long rows = static_cast<long>(elements.size());
  const long cols = static_cast<long>(probes.size());
  RealMatrix table(rows, cols);
#pragma omp parallel for collapse(2) schedule(static) num_threads(thread_cap())
  for (long l = 0; l < rows; ++l)
    for (long m = 0; m < cols; ++m)
      table(l, m) = born_entry(elements[static_cast<std::size_t>(l)], probes[static_cast<std::size_t>(m)]);
  return table;
}

RealMatrix born_table(std::span<const HermitianOperator> elements, std::span<const DensityMatrix> probes) {
  if (elements.empty() || probes.empty()) return RealMatrix(elements.size(), probes.size());
  const long d = elements.front().dim();
  const long work = static_cast<long>(elements.size() * probes.size()) * d * d;
  return worth_parallel(work) ? born_table_parallel(elements, probes) : born_table_serial(elements, probes);
}

std::vector<HermitianOperator> weighted_sums_serial(const RealMatrix& coeff, std::span<const DensityMatrix> probes) {
  std::vector<HermitianOperator> out;
  out.reserve(static_cast<std::size_t>(coeff.rows()));
  for (Eigen::Index l = 0; l < coeff.rows(); ++l) out.push_back(weighted_sum(coeff, l, probes));
  return out;
}

std::vector<HermitianOperator> weighted_sums_parallel(const RealMatrix& coeff, std::span<const DensityMatrix> probes) {
  const long rows = static_cast<long>(coeff.rows());
  std::vector<HermitianOperator> out(static_cast<std::size_t>(rows));
#pragma omp parallel for schedule(static) num_threads(thread_cap())
  for (long l = 0; l < rows; ++l) out[static_cast<std::size_t>(l)] = weighted_sum(coeff, l, probes);
  return out;
}

std::vector<HermitianOperator> weighted_sums(const RealMatrix& coeff, std::span<const DensityMatrix> probes) {
  if (probes.empty()) throw InvalidInput("weighted sum over an empty probe list");
  const long d = probes.front().dim();
  const long work = static_cast<long>(coeff.size()) * d * d;
  return worth_parallel(work) ? weighted_sums_parallel(coeff, probes) : weighted_sums_serial(coeff, probes);
}

std::vector<DensityMatrix> project_each_serial(std::span<const HermitianOperator> raw, const GilbertConfig& cfg) {
  std::vector<DensityMatrix> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(normalize_and_project(r, cfg));
  return out;
}

std::vector<DensityMatrix> project_each_parallel(std::span<const HermitianOperator> raw, const GilbertConfig& cfg) {
  // DensityMatrix has no default state; fill with placeholders first.
  std::vector<DensityMatrix> out(raw.size(), DensityMatrix::maximally_mixed(raw.empty() ? 1 : raw.front().dim()));
  parallel_for(static_cast<int>(raw.size()),
               [&](int l) { out[static_cast<std::size_t>(l)] = normalize_and_project(raw[static_cast<std::size_t>(l)], cfg); });
  return out;
}

std::vector<DensityMatrix> project_each(std::span<const HermitianOperator> raw, const GilbertConfig& cfg) {
  if (raw.empty()) return {};
  // One projection costs dozens of d x d eigendecompositions.
  const long d = raw.front().dim();
  const long work = static_cast<long>(raw.size()) * 40 * d * d * d;
  return worth_parallel(work) ? project_each_parallel(raw, cfg) : project_each_serial(raw, cfg);
}

void parallel_for(int count, const std::function<void(int)>& body) {
  std::exception_ptr first;
  std::mutex guard;
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_cap())
  for (int i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard lock(guard);
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace povmopt::kernels
