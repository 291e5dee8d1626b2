#pragma once

// Seed splitting and a fixed-partition worker pool. Results never depend on the number of
// workers: every task owns its output slot and its own seed, and reductions run afterwards
// in task order.

#include <cstdint>
#include <functional>
#include <random>

namespace perdiff {

/// SplitMix64 finaliser.
std::uint64_t splitmix64(std::uint64_t x);

/// Independent 64-bit seed for stream `index` of a master seed.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t index) { return Rng(stream_seed(master, index)); }

/// Workers from PERDIFF_WORKERS, else the hardware concurrency (at least 1).
int default_workers();

/// Runs task(i) for i in [0, n) on `workers` threads (0 = default_workers()).
/// The first exception thrown by any task is rethrown after all threads join.
void parallel_for(long n, const std::function<void(long)>& task, int workers = 0);

/// Standard normal draw by the Marsaglia polar method (same sequence on every platform).
double standard_normal(Rng& rng);

/// Uniform draw in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace perdiff
