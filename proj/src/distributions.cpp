#include "kpool/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kpool/error.hpp"
#include "kpool/numeric.hpp"

namespace kpool {

OutcomeSpace OutcomeSpace::real_vector(std::size_t dim) {
    if (dim < 1) throw InputError("real-vector space needs dimension >= 1");
    return OutcomeSpace(SpaceKind::RealVector, dim);
}

OutcomeSpace OutcomeSpace::unordered(std::size_t k) {
    if (k < 2) throw InputError("categorical space needs k >= 2");
    return OutcomeSpace(SpaceKind::UnorderedCategories, k);
}

OutcomeSpace OutcomeSpace::ordered(std::size_t k) {
    if (k < 2) throw InputError("categorical space needs k >= 2");
    return OutcomeSpace(SpaceKind::OrderedCategories, k);
}

std::string OutcomeSpace::describe() const {
    switch (kind_) {
        case SpaceKind::RealLine: return "real-line";
        case SpaceKind::RealVector: return "real-vector(" + std::to_string(size_) + ")";
        case SpaceKind::UnorderedCategories: return "unordered-categories(" + std::to_string(size_) + ")";
        case SpaceKind::OrderedCategories: return "ordered-categories(" + std::to_string(size_) + ")";
    }
    return "unknown";
}

void require_in_space(const OutcomeSpace& space, const Outcome& outcome) {
    if (space.is_categorical()) {
        const auto* c = std::get_if<Category>(&outcome);
        if (c == nullptr) throw InputError("expected a category in " + space.describe());
        if (c->index >= space.categories()) {
            throw InputError("category " + std::to_string(c->index + 1) + " outside " +
                             space.describe());
        }
        return;
    }
    const auto* p = std::get_if<Point>(&outcome);
    if (p == nullptr) throw InputError("expected a point in " + space.describe());
    if (p->size() != space.dim()) {
        throw InputError("point of dimension " + std::to_string(p->size()) + " outside " +
                         space.describe());
    }
}

namespace detail {

std::vector<double> normalized_simplex(std::vector<double> probs, const char* what) {
    if (probs.empty()) throw InputError(std::string(what) + " is empty");
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) {
            throw InputError(std::string(what) + " has a negative or non-finite entry");
        }
    }
    const double total = pairwise_sum(probs);
    if (std::abs(total - 1.0) > kSimplexTolerance) {
        throw InputError(std::string(what) + " sums to " + std::to_string(total) +
                         ", not 1");
    }
    for (double& p : probs) p /= total;
    return probs;
}

}  // namespace detail

CategoricalDist::CategoricalDist(OutcomeSpace space, std::vector<double> probs)
    : space_(space), probs_(detail::normalized_simplex(std::move(probs), "probability vector")) {
    if (!space_.is_categorical()) {
        throw InputError("categorical distribution over non-categorical " + space_.describe());
    }
    if (probs_.size() != space_.categories()) {
        throw InputError("probability vector has " + std::to_string(probs_.size()) +
                         " entries for " + space_.describe());
    }
}

CategoricalDist CategoricalDist::point_mass(OutcomeSpace space, std::size_t index) {
    std::vector<double> probs(space.categories(), 0.0);
    if (index >= probs.size()) throw InputError("point mass outside " + space.describe());
    probs[index] = 1.0;
    return {space, std::move(probs)};
}

std::vector<double> CategoricalDist::cumulative() const {
    std::vector<double> out(probs_.size());
    std::partial_sum(probs_.begin(), probs_.end(), out.begin());
    return out;
}

EmpiricalDist EmpiricalDist::from_flat(OutcomeSpace space, std::vector<double> coords,
                                       std::vector<double> weights) {
    if (space.is_categorical()) {
        throw InputError("empirical distribution over categorical " + space.describe());
    }
    EmpiricalDist d(space);
    d.weights_ = detail::normalized_simplex(std::move(weights), "sample weights");
    if (coords.size() != d.weights_.size() * space.dim()) {
        throw InputError("sample has " + std::to_string(coords.size()) + " coordinates for " +
                         std::to_string(d.weights_.size()) + " points in " + space.describe());
    }
    for (double c : coords) {
        if (!std::isfinite(c)) throw InputError("sample point has a non-finite coordinate");
    }
    d.coords_ = std::move(coords);
    return d;
}

namespace {

std::vector<double> flatten(const OutcomeSpace& space, const std::vector<Point>& points) {
    std::vector<double> flat;
    flat.reserve(points.size() * space.dim());
    for (const Point& p : points) {
        if (p.size() != space.dim()) {
            throw InputError("point of dimension " + std::to_string(p.size()) + " in " +
                             space.describe());
        }
        flat.insert(flat.end(), p.begin(), p.end());
    }
    return flat;
}

}  // namespace

EmpiricalDist::EmpiricalDist(OutcomeSpace space, const std::vector<Point>& points,
                             std::vector<double> weights)
    : EmpiricalDist(from_flat(space, flatten(space, points), std::move(weights))) {}

EmpiricalDist::EmpiricalDist(OutcomeSpace space, const std::vector<Point>& points)
    : EmpiricalDist(space, points,
                    std::vector<double>(points.size(),
                                        points.empty() ? 0.0 : 1.0 / static_cast<double>(points.size()))) {}

EmpiricalDist EmpiricalDist::point_mass(const Point& at) {
    const OutcomeSpace space =
        at.size() == 1 ? OutcomeSpace::real_line() : OutcomeSpace::real_vector(at.size());
    return from_flat(space, at, {1.0});
}

EmpiricalDist EmpiricalDist::merged() const {
    const std::size_t m = size();
    const std::size_t d = dim();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) {
        auto pa = point(a), pb = point(b);
        return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
    };
    std::stable_sort(order.begin(), order.end(), less);

    std::vector<double> coords;
    std::vector<double> weights;
    for (std::size_t idx : order) {
        auto p = point(idx);
        if (!weights.empty() &&
            std::equal(p.begin(), p.end(), coords.end() - static_cast<std::ptrdiff_t>(d))) {
            weights.back() += weights_[idx];
        } else {
            coords.insert(coords.end(), p.begin(), p.end());
            weights.push_back(weights_[idx]);
        }
    }
    return from_flat(space_, std::move(coords), std::move(weights));
}

const OutcomeSpace& space_of(const ForecastDistribution& dist) {
    return std::visit([](const auto& d) -> const OutcomeSpace& { return d.space(); }, dist);
}

std::size_t support_size(const ForecastDistribution& dist) {
    return std::visit([](const auto& d) { return d.size(); }, dist);
}

ForecastDistribution point_mass(const OutcomeSpace& space, const Outcome& at) {
    require_in_space(space, at);
    if (space.is_categorical()) {
        return CategoricalDist::point_mass(space, std::get<Category>(at).index);
    }
    return EmpiricalDist::from_flat(space, std::get<Point>(at), {1.0});
}

PoolSpec::PoolSpec(std::vector<ForecastDistribution> components, std::vector<double> weights)
    : components_(std::move(components)) {
    if (components_.empty()) throw InputError("pool has no components");
    if (weights.size() != components_.size()) {
        throw InputError("pool has " + std::to_string(components_.size()) + " components but " +
                         std::to_string(weights.size()) + " weights");
    }
    weights_ = detail::normalized_simplex(std::move(weights), "pool weights");
    const OutcomeSpace& first = space_of(components_.front());
    for (std::size_t i = 1; i < components_.size(); ++i) {
        const OutcomeSpace& s = space_of(components_[i]);
        if (!(s == first) || components_[i].index() != components_.front().index()) {
            throw InputError("component " + std::to_string(i + 1) + " lives in " + s.describe() +
                             " but component 1 lives in " + first.describe());
        }
    }
}

PoolSpec PoolSpec::equal_weights(std::vector<ForecastDistribution> components) {
    const std::size_t n = components.size();
    if (n == 0) throw InputError("pool has no components");
    return {std::move(components), std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

ForecastDistribution linear_pool(const PoolSpec& pool) {
    const auto& comps = pool.components();
    const auto w = pool.weights();
    if (comps.size() == 1) return comps.front();

    if (const auto* first = std::get_if<CategoricalDist>(&comps.front())) {
        std::vector<double> mix(first->size(), 0.0);
        for (std::size_t i = 0; i < comps.size(); ++i) {
            const auto p = std::get<CategoricalDist>(comps[i]).probs();
            for (std::size_t l = 0; l < mix.size(); ++l) mix[l] += w[i] * p[l];
        }
        return CategoricalDist(first->space(), std::move(mix));
    }

    std::vector<double> coords;
    std::vector<double> weights;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const auto& e = std::get<EmpiricalDist>(comps[i]);
        coords.insert(coords.end(), e.coords().begin(), e.coords().end());
        for (double v : e.weights()) weights.push_back(w[i] * v);
    }
    return EmpiricalDist::from_flat(pool.space(), std::move(coords), std::move(weights));
}

namespace {

Moments weighted_moments(std::span<const double> coords, std::span<const double> weights,
                         std::size_t d) {
    const std::size_t m = weights.size();
    Moments out{std::vector<double>(d, 0.0), Matrix(d, d)};
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t a = 0; a < d; ++a) out.mean[a] += weights[j] * coords[j * d + a];
    // second pass about the mean
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t a = 0; a < d; ++a) {
            const double da = coords[j * d + a] - out.mean[a];
            for (std::size_t b = a; b < d; ++b) {
                out.covariance(a, b) += weights[j] * da * (coords[j * d + b] - out.mean[b]);
            }
        }
    }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < a; ++b) out.covariance(a, b) = out.covariance(b, a);
    return out;
}

}  // namespace

Moments mean_and_variance(const ForecastDistribution& dist,
                          std::optional<std::span<const double>> bin_values) {
    if (const auto* c = std::get_if<CategoricalDist>(&dist)) {
        if (!bin_values) throw InputError("categorical moments need one value per category");
        if (bin_values->size() != c->size()) {
            throw InputError("got " + std::to_string(bin_values->size()) + " bin values for " +
                             std::to_string(c->size()) + " categories");
        }
        return weighted_moments(*bin_values, c->probs(), 1);
    }
    if (bin_values) throw InputError("bin values only apply to categorical distributions");
    const auto& e = std::get<EmpiricalDist>(dist);
    return weighted_moments(e.coords(), e.weights(), e.dim());
}

}  // namespace kpool
