#pragma once

// Data-parallel inner loops. Each kernel has a serial reference version
// (kept for tests and the benchmark) and an OpenMP version; the unsuffixed
// entry points pick one based on problem size and available threads.
// Serial and parallel versions perform the same floating-point operations
// per output entry, so their results agree bit-for-bit.

#include <functional>
#include <span>
#include <vector>

#include "povmopt/gilbert.hpp"

namespace povmopt::kernels {

/// table(l, m) = tr(rho_m E_l)
RealMatrix born_table_serial(std::span<const HermitianOperator> elements, std::span<const DensityMatrix> probes);
RealMatrix born_table_parallel(std::span<const HermitianOperator> elements, std::span<const DensityMatrix> probes);
RealMatrix born_table(std::span<const HermitianOperator> elements, std::span<const DensityMatrix> probes);

/// out_l = sum_m coeff(l, m) rho_m
std::vector<HermitianOperator> weighted_sums_serial(const RealMatrix& coeff, std::span<const DensityMatrix> probes);
std::vector<HermitianOperator> weighted_sums_parallel(const RealMatrix& coeff, std::span<const DensityMatrix> probes);
std::vector<HermitianOperator> weighted_sums(const RealMatrix& coeff, std::span<const DensityMatrix> probes);

/// normalize_and_project applied to every element.
std::vector<DensityMatrix> project_each_serial(std::span<const HermitianOperator> raw, const GilbertConfig& cfg);
std::vector<DensityMatrix> project_each_parallel(std::span<const HermitianOperator> raw, const GilbertConfig& cfg);
std::vector<DensityMatrix> project_each(std::span<const HermitianOperator> raw, const GilbertConfig& cfg);

/// Thread budget: POVM_OPT_THREADS when set to a positive integer, else the
/// OpenMP default.
int thread_cap();

/// Runs body(0..count-1) across threads. The first exception thrown by any
/// task is rethrown after all tasks finish.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace povmopt::kernels
