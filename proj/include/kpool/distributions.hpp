#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kpool/matrix.hpp"

namespace kpool {

/// Tolerance within which probability and weight vectors are accepted and
/// renormalized. Larger deviations are rejected.
inline constexpr double kSimplexTolerance = 1e-9;

enum class SpaceKind { RealLine, RealVector, UnorderedCategories, OrderedCategories };

/// Where outcomes live. `size` is the dimension for the real kinds and the
/// category count for the categorical kinds.
class OutcomeSpace {
public:
    static OutcomeSpace real_line() { return OutcomeSpace(SpaceKind::RealLine, 1); }
    static OutcomeSpace real_vector(std::size_t dim);
    static OutcomeSpace unordered(std::size_t k);
    static OutcomeSpace ordered(std::size_t k);

    [[nodiscard]] SpaceKind kind() const noexcept { return kind_; }
    [[nodiscard]] bool is_categorical() const noexcept {
        return kind_ == SpaceKind::UnorderedCategories || kind_ == SpaceKind::OrderedCategories;
    }
    /// Coordinate count of a point; 1 for the real line. Zero for categorical spaces.
    [[nodiscard]] std::size_t dim() const noexcept { return is_categorical() ? 0 : size_; }
    /// Category count; zero for real spaces.
    [[nodiscard]] std::size_t categories() const noexcept { return is_categorical() ? size_ : 0; }

    [[nodiscard]] std::string describe() const;

    friend bool operator==(const OutcomeSpace&, const OutcomeSpace&) = default;

private:
    OutcomeSpace(SpaceKind kind, std::size_t size) : kind_(kind), size_(size) {}

    SpaceKind kind_;
    std::size_t size_;
};

/// A categorical outcome, 0-based. Ordered spaces read index i as rank i+1.
struct Category {
    std::size_t index;
    friend bool operator==(const Category&, const Category&) = default;
};

using Point = std::vector<double>;
using Outcome = std::variant<Category, Point>;

inline Outcome real(double y) { return Point{y}; }

/// Checks that `outcome` belongs to `space`; throws InputError otherwise.
void require_in_space(const OutcomeSpace& space, const Outcome& outcome);

/// Probability vector over k categories.
class CategoricalDist {
public:
    /// Accepts probs that are nonnegative and sum to 1 within
    /// kSimplexTolerance, and renormalizes them.
    CategoricalDist(OutcomeSpace space, std::vector<double> probs);

    static CategoricalDist point_mass(OutcomeSpace space, std::size_t index);

    [[nodiscard]] const OutcomeSpace& space() const noexcept { return space_; }
    [[nodiscard]] std::span<const double> probs() const noexcept { return probs_; }
    [[nodiscard]] std::size_t size() const noexcept { return probs_.size(); }
    /// P_l = p_1 + ... + p_l for l = 1..k.
    [[nodiscard]] std::vector<double> cumulative() const;

    friend bool operator==(const CategoricalDist&, const CategoricalDist&) = default;

private:
    OutcomeSpace space_;
    std::vector<double> probs_;
};

/// Weighted finite sample of points in R^d. Duplicate points are kept.
class EmpiricalDist {
public:
    /// `points` is a list of m >= 1 vectors of length space.dim(); weights are
    /// validated like CategoricalDist probabilities.
    EmpiricalDist(OutcomeSpace space, const std::vector<Point>& points, std::vector<double> weights);
    /// Equal weights 1/m.
    EmpiricalDist(OutcomeSpace space, const std::vector<Point>& points);

    static EmpiricalDist point_mass(const Point& at);
    static EmpiricalDist point_mass(double at) { return point_mass(Point{at}); }

    [[nodiscard]] const OutcomeSpace& space() const noexcept { return space_; }
    [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return space_.dim(); }
    [[nodiscard]] std::span<const double> point(std::size_t j) const {
        return {coords_.data() + j * dim(), dim()};
    }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
    /// All coordinates, row-major m x dim.
    [[nodiscard]] std::span<const double> coords() const noexcept { return coords_; }

    /// Merges duplicate points (summing their weights) and sorts points
    /// lexicographically. The distribution is unchanged.
    [[nodiscard]] EmpiricalDist merged() const;

    friend bool operator==(const EmpiricalDist&, const EmpiricalDist&) = default;

    /// Row-major coordinates (m * dim values) with m weights.
    static EmpiricalDist from_flat(OutcomeSpace space, std::vector<double> coords,
                                   std::vector<double> weights);

private:
    EmpiricalDist(OutcomeSpace space) : space_(space) {}

    OutcomeSpace space_;
    std::vector<double> coords_;
    std::vector<double> weights_;
};

using ForecastDistribution = std::variant<CategoricalDist, EmpiricalDist>;

const OutcomeSpace& space_of(const ForecastDistribution& dist);
std::size_t support_size(const ForecastDistribution& dist);
ForecastDistribution point_mass(const OutcomeSpace& space, const Outcome& at);

/// Components over one outcome space with nonnegative weights summing to one.
class PoolSpec {
public:
    PoolSpec(std::vector<ForecastDistribution> components, std::vector<double> weights);
    static PoolSpec equal_weights(std::vector<ForecastDistribution> components);

    [[nodiscard]] const std::vector<ForecastDistribution>& components() const noexcept {
        return components_;
    }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
    [[nodiscard]] std::size_t size() const noexcept { return components_.size(); }
    [[nodiscard]] const OutcomeSpace& space() const { return space_of(components_.front()); }

private:
    std::vector<ForecastDistribution> components_;
    std::vector<double> weights_;
};

/// The mixture sum_i w_i F^i. Empirical components are concatenated with
/// weights w_i * (component weights), which is the exact mixture.
ForecastDistribution linear_pool(const PoolSpec& pool);

struct Moments {
    std::vector<double> mean;
    Matrix covariance;  ///< Population convention; 1x1 on the real line.
};

/// Weighted mean and covariance. Categorical distributions need one real
/// value per category (e.g. bin midpoints); empirical ones must not get any.
Moments mean_and_variance(const ForecastDistribution& dist,
                          std::optional<std::span<const double>> bin_values = std::nullopt);

namespace detail {
/// Validates a probability vector and returns it renormalized.
std::vector<double> normalized_simplex(std::vector<double> probs, const char* what);
}  // namespace detail

}  // namespace kpool
