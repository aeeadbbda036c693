#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "kpool/distributions.hpp"
#include "kpool/kernels.hpp"

namespace kpool {

inline constexpr std::uint64_t kDefaultSeed = 20240601;

enum class Method {
    Auto,           ///< closed form if the rule has one, else exact pairwise
    ExactPairwise,  ///< exact double sum over both supports
    ClosedForm,     ///< rule-specific formula; InputError if none exists
    MonteCarlo,     ///< seeded sampling estimate
};

/// Evaluation knobs shared by the expectation, entropy, score and
/// divergence functions.
struct EvalOptions {
    Method method = Method::Auto;
    /// Under Auto, switch to Monte Carlo once the product of support sizes
    /// exceeds the threshold. Off unless requested.
    bool allow_monte_carlo = false;
    double monte_carlo_pair_threshold = 1e8;
    std::size_t monte_carlo_draws = 100000;
    std::uint64_t seed = kDefaultSeed;
    /// Worker threads for exact double sums. Results do not depend on it.
    unsigned threads = 1;
};

struct ScoreValue {
    double value;
    KernelKind rule;
    Method method;
};

struct EntropyValue {
    double value;
    KernelKind rule;
    Method method;
};

struct DivergenceValue {
    double value;
    KernelKind rule;
    Method method;
};

struct MonteCarloEstimate {
    double estimate;
    double standard_error;
    std::size_t draws;
    std::uint64_t seed;
};

/// E[L(X, Y)] with X ~ f and Y ~ h independent. Exact double sum (or the
/// rule's closed form under Auto); symmetric in (f, h) bit for bit.
double cross_expectation(const KernelSpec& spec, const ForecastDistribution& f,
                         const ForecastDistribution& h, const EvalOptions& options = {});

/// S_L(f, y) = E_f[L(X, y)] - 1/2 E_f[L(X, X')].
ScoreValue score(const KernelSpec& spec, const ForecastDistribution& f, const Outcome& y,
                 const EvalOptions& options = {});

/// 1/2 E_f[L(X, X')], the expected score of f under itself.
EntropyValue entropy(const KernelSpec& spec, const ForecastDistribution& f,
                     const EvalOptions& options = {});

/// E_{f,h}[L] - 1/2 E_h[L] - 1/2 E_f[L]. Symmetric in (h, f) bit for bit.
DivergenceValue divergence(const KernelSpec& spec, const ForecastDistribution& h,
                           const ForecastDistribution& f, const EvalOptions& options = {});

/// Unbiased estimate of E[L(X, Y)] from `draws` independent pairs.
/// Draws are generated in fixed-size chunks with per-chunk sub-seeds, so the
/// estimate depends only on (draws, seed).
MonteCarloEstimate monte_carlo_expectation(const KernelSpec& spec, const ForecastDistribution& f,
                                           const ForecastDistribution& h, std::size_t draws,
                                           std::uint64_t seed);

/// CRPS by integrating (1(z >= y) - F(z))^2 over the sorted support of f.
double crps_cdf_integral(const EmpiricalDist& f, double y);

/// Integral of (F(z) - H(z))^2 dz for two real-line distributions, by
/// piecewise-constant integration over the pooled support.
double cramer_distance(const EmpiricalDist& f, const EmpiricalDist& h);

/// Rule-specific entropy formula if the rule has one for this representation.
std::optional<double> closed_form_entropy(const KernelSpec& spec, const ForecastDistribution& f);

}  // namespace kpool
