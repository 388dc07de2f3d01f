#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace iceseg {

using Rng = std::mt19937_64;

/// Mixes a base seed with task coordinates (cell, replicate, group, ...) into an
/// independent stream seed. Results never depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal deviate (Marsaglia polar method, no cached second value).
double standard_normal(Rng &rng);

/// Gamma(shape, rate=1) deviate (Marsaglia-Tsang).
double gamma_unit(double shape, Rng &rng);

/// Inverse-Gamma(shape, scale) deviate: 1 / Gamma(shape, rate=scale).
double inverse_gamma(double shape, double scale, Rng &rng);

/// Binomial(n, p) deviate.
std::int64_t binomial(std::int64_t n, double p, Rng &rng);

} // namespace iceseg
