#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <complex>
#include <random>

namespace wnls {

// Seed for substream `stream` of a run with master seed `master`. Every
// sample, chain and trial draws from its own substream, so results do not
// depend on how work is split across workers.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);
std::mt19937_64 make_rng(std::uint64_t master, std::uint64_t stream);

// Standard complex Gaussian (x + iy)/sqrt(2).
std::complex<double> complex_gaussian(std::mt19937_64& rng);

// Worker count from WNLS_WORKERS, falling back to the hardware concurrency.
int worker_count();

// Runs body(i) for i in [0, n). Exceptions are collected and the one with the
// smallest index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int workers = 0);

}  // namespace wnls
