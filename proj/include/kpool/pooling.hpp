#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kpool/distributions.hpp"
#include "kpool/kernels.hpp"
#include "kpool/matrix.hpp"
#include "kpool/scoring.hpp"

namespace kpool {

/// Pool entropy split into average component entropy plus disagreement.
struct Decomposition {
    double pool_entropy = 0.0;
    double avg_component_entropy = 0.0;
    double disagreement = 0.0;
    std::vector<double> per_component_divergence;
    KernelKind rule = KernelKind::SquaredDiff;
    std::vector<double> weights;
    /// Method used for the pool entropy; Monte Carlo skips the divergence cross-check.
    Method method = Method::ExactPairwise;

    /// disagreement / pool_entropy, or 0 when the pool has zero entropy.
    [[nodiscard]] double disagreement_share() const;
    /// Re-checks sign constraints and both identities; throws InvariantError.
    void validate() const;
};

/// Computes the disagreement two ways, as the weighted average divergence
/// between pool and components and as pool entropy minus average component
/// entropy, and throws InvariantError if they differ by more than 1e-9
/// relative. The entropy-difference value is the one reported.
Decomposition decompose(const KernelSpec& spec, const PoolSpec& pool,
                        const EvalOptions& options = {});

/// The rule-specific disagreement formula:
///   se     sum w_i (mu_i - mu)^2
///   mse    sum w_i (mu_i - mu)^T A (mu_i - mu)
///   crps   sum w_i * Cramer distance(F_i, F)
///   es     1/2 E_F||X - X'|| - 1/2 sum w_i E_Fi||X - X'||
///   brier  1/2 sum w_i sum_l (p_il - p_l)^2
///   rps    sum w_i sum_l (P_il - P_l)^2
double closed_form_disagreement(const KernelSpec& spec, const PoolSpec& pool);

struct ExPostReport {
    double pool_score = 0.0;
    double avg_component_score = 0.0;
    std::vector<double> per_component_score;
    double disagreement = 0.0;
    /// avg_component_score - disagreement - pool_score
    double residual = 0.0;
    /// avg - pool at a second outcome, when the pool's support offers one.
    std::optional<double> implied_disagreement_alt;

    void validate() const;
};

/// Scores the pool and each component at y. Also evaluates the implied
/// disagreement (average score minus pool score) at a second support point
/// and checks that it does not depend on the outcome.
ExPostReport ex_post_identity(const KernelSpec& spec, const PoolSpec& pool, const Outcome& y,
                              const EvalOptions& options = {});

struct GenDisagreementReport {
    std::vector<double> h;
    double at_h = 0.0;     ///< average divergence from the components to h
    double at_pool = 0.0;  ///< same quantity at the linear pool
    double gap = 0.0;      ///< at_h - at_pool
    /// -1/2 (h - p)^T L (h - p), which equals the gap for any kernel.
    double quadratic_gap = 0.0;

    void validate() const;
};

/// A pool over a finite outcome set given by its kernel matrix: each
/// component is a probability vector over the same n elements.
class FinitePool {
public:
    FinitePool(Matrix kernel, std::vector<std::vector<double>> components,
               std::vector<double> weights);
    /// Categorical components of a PoolSpec under a categorical kernel.
    FinitePool(const KernelSpec& spec, const PoolSpec& pool);
    /// Probability vectors over an explicit list of outcomes (e.g. a grid of
    /// points in R^d under the quadratic-form kernel).
    FinitePool(const KernelSpec& spec, std::span<const Outcome> support,
               std::vector<std::vector<double>> components, std::vector<double> weights);

    [[nodiscard]] const Matrix& kernel() const noexcept { return kernel_; }
    [[nodiscard]] const std::vector<std::vector<double>>& components() const noexcept {
        return components_;
    }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
    [[nodiscard]] std::size_t outcomes() const noexcept { return kernel_.rows(); }
    /// p = sum_i w_i p_i
    [[nodiscard]] const std::vector<double>& pooled() const noexcept { return pooled_; }

    /// sum_i w_i { p_i^T L h - 1/2 h^T L h - 1/2 p_i^T L p_i }
    [[nodiscard]] double generalized_disagreement(std::span<const double> h) const;

private:
    void init();

    Matrix kernel_;
    std::vector<std::vector<double>> components_;
    std::vector<double> weights_;
    std::vector<double> pooled_;
};

/// Generalized disagreement at h versus at the linear pool.
GenDisagreementReport gen_disagreement(const FinitePool& pool, std::span<const double> h);
/// Categorical pools only; empirical components are rejected.
GenDisagreementReport gen_disagreement(const KernelSpec& spec, const PoolSpec& pool,
                                       std::span<const double> h);

struct GridSearchResult {
    std::vector<double> minimizer;
    double value = 0.0;
    std::size_t evaluated = 0;
};

/// Exhaustive search over the simplex grid {h : h_j = n_j * step} for the
/// minimizer of the generalized disagreement. Intended for small outcome
/// counts; 1/step must be an integer.
GridSearchResult simplex_grid_search(const FinitePool& pool, double step);

}  // namespace kpool
