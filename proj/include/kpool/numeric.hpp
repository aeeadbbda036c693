#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace kpool {

/// Cascade (pairwise) summation. The split points depend only on the input
/// length, so the result is a deterministic function of the values.
double pairwise_sum(std::span<const double> values);

/// Deterministic pseudo-random source used everywhere a seed appears.
///
/// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The transformations to uniforms, normals, gammas and
/// categorical draws are implemented here rather than with the
/// <random> distribution classes, whose algorithms are implementation-defined,
/// so seeded results agree across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Derives an independent stream for chunk `index` of a computation.
    static std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index);

    std::uint64_t bits();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer on [lo, hi].
    std::int64_t integer(std::int64_t lo, std::int64_t hi);
    /// Standard normal via Box-Muller; no cached second variate.
    double normal();
    /// Gamma(shape, 1) via Marsaglia-Tsang.
    double gamma(double shape);
    /// Dirichlet(alpha) draw.
    std::vector<double> dirichlet(std::span<const double> alpha);
    /// Index j with probability cumulative[j] - cumulative[j-1], by
    /// inverse-CDF search. `cumulative` is nondecreasing and ends at the
    /// total mass (need not be exactly 1).
    std::size_t categorical(std::span<const double> cumulative);

private:
    std::mt19937_64 engine_;
};

}  // namespace kpool
