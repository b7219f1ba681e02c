#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace hed {

using Rng = std::mt19937_64;

/// Independent engine for one purpose ("env", "batch", ...) derived from a run seed.
Rng make_stream(std::uint64_t seed, std::string_view purpose);

/// Deterministic child seed for (seed, a, b), via splitmix64 mixing.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Zero-mean normal draw; std == 0 returns 0 without consuming the engine.
double normal(Rng& rng, double std);
double uniform(Rng& rng, double lo, double hi);
std::size_t uniform_index(Rng& rng, std::size_t n);

std::string save_state(const Rng& rng);
Rng load_state(const std::string& state);

}  // namespace hed
