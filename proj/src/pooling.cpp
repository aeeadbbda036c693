#include "kpool/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "kpool/error.hpp"
#include "kpool/numeric.hpp"

namespace kpool {

namespace {

constexpr double kIdentityTolerance = 1e-9;
constexpr double kTightTolerance = 1e-10;

double weighted_sum(std::span<const double> weights, std::span<const double> values) {
    std::vector<double> terms(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) terms[i] = weights[i] * values[i];
    return pairwise_sum(terms);
}

}  // namespace

double Decomposition::disagreement_share() const {
    return pool_entropy > 0.0 ? disagreement / pool_entropy : 0.0;
}

void Decomposition::validate() const {
    if (!(pool_entropy >= 0.0) || !(avg_component_entropy >= 0.0) || !(disagreement >= 0.0)) {
        throw InvariantError("decomposition has a negative or non-finite term");
    }
    for (double d : per_component_divergence) {
        if (!(d >= 0.0)) throw InvariantError("negative component divergence");
    }
    const double scale = std::max(1.0, pool_entropy);
    if (std::abs(pool_entropy - avg_component_entropy - disagreement) > kIdentityTolerance * scale) {
        throw InvariantError("pool entropy != average entropy + disagreement");
    }
    if (method != Method::MonteCarlo &&
        std::abs(disagreement - weighted_sum(weights, per_component_divergence)) > kIdentityTolerance * scale) {
        throw InvariantError("disagreement != weighted average of component divergences");
    }
    const double share = disagreement_share();
    if (share < 0.0 || share > 1.0 + kIdentityTolerance) {
        throw InvariantError("disagreement share outside [0, 1]");
    }
}

Decomposition decompose(const KernelSpec& spec, const PoolSpec& pool, const EvalOptions& options) {
    spec.require_compatible(pool.space());
    const ForecastDistribution mix = linear_pool(pool);
    const auto& comps = pool.components();

    Decomposition out;
    out.rule = spec.kind();
    out.weights.assign(pool.weights().begin(), pool.weights().end());

    const EntropyValue pool_entropy = entropy(spec, mix, options);
    out.pool_entropy = pool_entropy.value;
    out.method = pool_entropy.method;

    std::vector<double> component_entropy(comps.size());
    out.per_component_divergence.resize(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) {
        component_entropy[i] = entropy(spec, comps[i], options).value;
        out.per_component_divergence[i] = divergence(spec, mix, comps[i], options).value;
    }
    out.avg_component_entropy = weighted_sum(out.weights, component_entropy);

    const double scale = std::max(1.0, out.pool_entropy);
    const double from_entropies = out.pool_entropy - out.avg_component_entropy;
    out.disagreement = detail::clamp_nonnegative(from_entropies, kTightTolerance * scale, "disagreement");

    if (pool_entropy.method != Method::MonteCarlo) {
        const double from_divergences = weighted_sum(out.weights, out.per_component_divergence);
        if (std::abs(from_divergences - out.disagreement) > kIdentityTolerance * scale) {
            throw InvariantError("disagreement via divergences (" + std::to_string(from_divergences) +
                                 ") differs from entropy difference (" +
                                 std::to_string(out.disagreement) + ")");
        }
    }
    return out;
}

double closed_form_disagreement(const KernelSpec& spec, const PoolSpec& pool) {
    spec.require_compatible(pool.space());
    const auto& comps = pool.components();
    const auto w = pool.weights();
    const std::size_t n = comps.size();
    std::vector<double> terms(n);

    switch (spec.kind()) {
        case KernelKind::SquaredDiff:
        case KernelKind::QuadForm: {
            std::vector<std::vector<double>> means(n);
            for (std::size_t i = 0; i < n; ++i) means[i] = mean_and_variance(comps[i]).mean;
            const std::size_t d = means.front().size();
            std::vector<double> pooled(d, 0.0);
            for (std::size_t a = 0; a < d; ++a) {
                std::vector<double> col(n);
                for (std::size_t i = 0; i < n; ++i) col[i] = means[i][a];
                pooled[a] = weighted_sum(w, col);
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (spec.kind() == KernelKind::SquaredDiff) {
                    const double diff = means[i][0] - pooled[0];
                    terms[i] = diff * diff;
                } else {
                    terms[i] = spec.points(means[i], pooled);
                }
            }
            return weighted_sum(w, terms);
        }
        case KernelKind::AbsDiff: {
            const ForecastDistribution pooled = linear_pool(pool);
            const auto& mix = std::get<EmpiricalDist>(pooled);
            for (std::size_t i = 0; i < n; ++i) {
                terms[i] = cramer_distance(std::get<EmpiricalDist>(comps[i]), mix);
            }
            return weighted_sum(w, terms);
        }
        case KernelKind::Euclidean: {
            // Block form over component pairs, without building the pool:
            // D = sum_{i<j} w_i w_j (C_ij - C_ii/2 - C_jj/2), C_ij = E||X_i - X_j||.
            EvalOptions exact;
            exact.method = Method::ExactPairwise;
            std::vector<double> self(n);
            for (std::size_t i = 0; i < n; ++i) {
                self[i] = cross_expectation(spec, comps[i], comps[i], exact);
            }
            std::vector<double> pair_terms;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    if (w[i] == 0.0 || w[j] == 0.0) continue;
                    const double c = cross_expectation(spec, comps[i], comps[j], exact);
                    pair_terms.push_back(w[i] * w[j] * (c - 0.5 * (self[i] + self[j])));
                }
            }
            return detail::clamp_nonnegative(pairwise_sum(pair_terms), kTightTolerance,
                                             "energy-score disagreement");
        }
        case KernelKind::LabelMismatch:
        case KernelKind::OrdinalAbsDiff: {
            const bool ordinal = spec.kind() == KernelKind::OrdinalAbsDiff;
            const ForecastDistribution pooled = linear_pool(pool);
            const auto& mix = std::get<CategoricalDist>(pooled);
            const std::vector<double> ref =
                ordinal ? mix.cumulative() : std::vector<double>(mix.probs().begin(), mix.probs().end());
            for (std::size_t i = 0; i < n; ++i) {
                const auto& c = std::get<CategoricalDist>(comps[i]);
                const std::vector<double> v =
                    ordinal ? c.cumulative() : std::vector<double>(c.probs().begin(), c.probs().end());
                std::vector<double> sq(v.size());
                for (std::size_t l = 0; l < v.size(); ++l) sq[l] = (v[l] - ref[l]) * (v[l] - ref[l]);
                terms[i] = pairwise_sum(sq);
            }
            return (ordinal ? 1.0 : 0.5) * weighted_sum(w, terms);
        }
    }
    throw InputError("no closed-form disagreement for rule " + std::string(spec.name()));
}

void ExPostReport::validate() const {
    const double scale = std::max(1.0, std::abs(avg_component_score));
    if (!(disagreement >= 0.0)) throw InvariantError("negative disagreement");
    if (std::abs(residual) > kIdentityTolerance * scale) {
        throw InvariantError("pool score != average component score - disagreement (residual " +
                             std::to_string(residual) + ")");
    }
    if (implied_disagreement_alt &&
        std::abs(*implied_disagreement_alt - disagreement) > kIdentityTolerance * scale) {
        throw InvariantError("implied disagreement depends on the outcome");
    }
}

namespace {

Outcome alternative_outcome(const OutcomeSpace& space, const Outcome& y) {
    if (space.is_categorical()) {
        return Category{(std::get<Category>(y).index + 1) % space.categories()};
    }
    Point p = std::get<Point>(y);
    for (double& v : p) v += 1.0;
    return p;
}

struct ScoresAt {
    double pool;
    double average;
    std::vector<double> each;
};

ScoresAt scores_at(const KernelSpec& spec, const PoolSpec& pool, const ForecastDistribution& mix,
                   const Outcome& y, const EvalOptions& options) {
    ScoresAt s;
    s.pool = score(spec, mix, y, options).value;
    for (const auto& c : pool.components()) s.each.push_back(score(spec, c, y, options).value);
    s.average = weighted_sum(pool.weights(), s.each);
    return s;
}

}  // namespace

ExPostReport ex_post_identity(const KernelSpec& spec, const PoolSpec& pool, const Outcome& y,
                              const EvalOptions& options) {
    spec.require_compatible(pool.space());
    require_in_space(pool.space(), y);
    const ForecastDistribution mix = linear_pool(pool);
    const ScoresAt at = scores_at(spec, pool, mix, y, options);

    ExPostReport r;
    r.pool_score = at.pool;
    r.avg_component_score = at.average;
    r.per_component_score = at.each;
    r.disagreement = decompose(spec, pool, options).disagreement;
    r.residual = r.avg_component_score - r.disagreement - r.pool_score;

    const ScoresAt alt = scores_at(spec, pool, mix, alternative_outcome(pool.space(), y), options);
    r.implied_disagreement_alt = alt.average - alt.pool;
    r.validate();
    return r;
}

void GenDisagreementReport::validate() const {
    if (gap < -kTightTolerance) {
        throw InvariantError("generalized disagreement below its value at the linear pool (gap " +
                             std::to_string(gap) + ")");
    }
    if (std::abs(gap - quadratic_gap) > kTightTolerance) {
        throw InvariantError("gap differs from -1/2 (h-p)^T L (h-p)");
    }
}

FinitePool::FinitePool(Matrix kernel, std::vector<std::vector<double>> components,
                       std::vector<double> weights)
    : kernel_(std::move(kernel)), components_(std::move(components)) {
    if (components_.empty()) throw InputError("pool has no components");
    if (weights.size() != components_.size()) {
        throw InputError("pool has " + std::to_string(components_.size()) + " components but " +
                         std::to_string(weights.size()) + " weights");
    }
    weights_ = detail::normalized_simplex(std::move(weights), "pool weights");
    init();
}

FinitePool::FinitePool(const KernelSpec& spec, const PoolSpec& pool) {
    if (!pool.space().is_categorical()) {
        throw InputError("generalized disagreement needs a finite outcome space; " +
                         pool.space().describe() + " components are not supported");
    }
    spec.require_compatible(pool.space());
    kernel_ = category_kernel_matrix(spec, pool.space().categories());
    for (const auto& c : pool.components()) {
        const auto p = std::get<CategoricalDist>(c).probs();
        components_.emplace_back(p.begin(), p.end());
    }
    weights_.assign(pool.weights().begin(), pool.weights().end());
    init();
}

FinitePool::FinitePool(const KernelSpec& spec, std::span<const Outcome> support,
                       std::vector<std::vector<double>> components, std::vector<double> weights)
    : FinitePool(kernel_matrix(spec, support), std::move(components), std::move(weights)) {}

void FinitePool::init() {
    const std::size_t n = kernel_.rows();
    if (n == 0 || kernel_.cols() != n) throw InputError("kernel matrix must be square and non-empty");
    for (auto& p : components_) {
        if (p.size() != n) {
            throw InputError("component has " + std::to_string(p.size()) + " probabilities for " +
                             std::to_string(n) + " outcomes");
        }
        p = detail::normalized_simplex(std::move(p), "component probabilities");
    }
    pooled_.assign(n, 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        std::vector<double> col(components_.size());
        for (std::size_t i = 0; i < components_.size(); ++i) col[i] = components_[i][l];
        pooled_[l] = weighted_sum(weights_, col);
    }
}

double FinitePool::generalized_disagreement(std::span<const double> h) const {
    if (h.size() != outcomes()) {
        throw InputError("h has " + std::to_string(h.size()) + " entries for " +
                         std::to_string(outcomes()) + " outcomes");
    }
    const double hh = kernel_.bilinear(h, h);
    std::vector<double> terms(components_.size());
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const auto& p = components_[i];
        terms[i] = kernel_.bilinear(p, h) - 0.5 * hh - 0.5 * kernel_.bilinear(p, p);
    }
    return weighted_sum(weights_, terms);
}

GenDisagreementReport gen_disagreement(const FinitePool& pool, std::span<const double> h_in) {
    if (h_in.size() != pool.outcomes()) {
        throw InputError("h has " + std::to_string(h_in.size()) + " entries for " +
                         std::to_string(pool.outcomes()) + " outcomes");
    }
    GenDisagreementReport r;
    r.h = detail::normalized_simplex(std::vector<double>(h_in.begin(), h_in.end()), "h");
    r.at_h = pool.generalized_disagreement(r.h);
    r.at_pool = pool.generalized_disagreement(pool.pooled());
    r.gap = r.at_h - r.at_pool;
    std::vector<double> c(r.h.size());
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = r.h[j] - pool.pooled()[j];
    r.quadratic_gap = -0.5 * pool.kernel().bilinear(c, c);
    return r;
}

GenDisagreementReport gen_disagreement(const KernelSpec& spec, const PoolSpec& pool,
                                       std::span<const double> h) {
    GenDisagreementReport r = gen_disagreement(FinitePool(spec, pool), h);
    r.validate();
    return r;
}

GridSearchResult simplex_grid_search(const FinitePool& pool, double step) {
    if (!(step > 0.0) || step > 1.0) throw InputError("grid step must lie in (0, 1]");
    const auto total = static_cast<std::size_t>(std::llround(1.0 / step));
    if (std::abs(static_cast<double>(total) * step - 1.0) > 1e-9) {
        throw InputError("grid step must divide 1");
    }
    const std::size_t n = pool.outcomes();
    // number of grid points is C(total + n - 1, n - 1)
    double count = 1.0;
    for (std::size_t i = 1; i < n; ++i) count = count * static_cast<double>(total + i) / static_cast<double>(i);
    if (count > 2e7) throw InputError("simplex grid too large; use a coarser step or fewer outcomes");

    GridSearchResult best;
    best.value = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> parts(n, 0);
    std::vector<double> h(n);
    std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t pos, std::size_t left) {
        if (pos + 1 == n) {
            parts[pos] = left;
            for (std::size_t j = 0; j < n; ++j) h[j] = static_cast<double>(parts[j]) / static_cast<double>(total);
            const double v = pool.generalized_disagreement(h);
            ++best.evaluated;
            if (v < best.value) {
                best.value = v;
                best.minimizer = h;
            }
            return;
        }
        for (std::size_t take = 0; take <= left; ++take) {
            parts[pos] = take;
            walk(pos + 1, left - take);
        }
    };
    walk(0, total);
    return best;
}

}  // namespace kpool
