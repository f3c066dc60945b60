#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cpmmd {

using Rng = std::mt19937_64;

/// Derivation rule for every per-run seed in the library:
///   seed_run = mix(mix(master ^ fnv1a(tag)) + index)
/// where mix is the splitmix64 finalizer. Replicates, calibration
/// permutations and data streams each get their own tag so that runs are
/// reproducible and independent of scheduling order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::string_view tag);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform random permutation of 0..n-1 (Fisher-Yates).
std::vector<int> random_permutation(int n, Rng& rng);

}  // namespace cpmmd
