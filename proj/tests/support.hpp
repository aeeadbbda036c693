// Test-only helpers: random fixtures and brute-force oracles that do not go
// through the library's evaluation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "kpool/distributions.hpp"
#include "kpool/kernels.hpp"
#include "kpool/matrix.hpp"

namespace kpool::testing {

inline const std::vector<KernelKind>& all_rules() {
    static const std::vector<KernelKind> rules = {
        KernelKind::SquaredDiff, KernelKind::QuadForm,      KernelKind::AbsDiff,
        KernelKind::Euclidean,   KernelKind::LabelMismatch, KernelKind::OrdinalAbsDiff};
    return rules;
}

class Fixtures {
public:
    explicit Fixtures(std::uint64_t seed) : gen_(seed) {}

    std::mt19937_64& gen() { return gen_; }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
    std::size_t index(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(gen_);
    }

    /// Random probability vector; occasionally sparse or a point mass.
    std::vector<double> simplex(std::size_t k) {
        std::vector<double> p(k);
        const double mode = uniform();
        if (mode < 0.1) {
            p[index(0, k - 1)] = 1.0;
            return p;
        }
        double total = 0.0;
        for (double& v : p) {
            v = std::exponential_distribution<double>(1.0)(gen_);
            if (mode < 0.3 && uniform() < 0.4) v = 0.0;
            total += v;
        }
        if (total == 0.0) {
            p[0] = 1.0;
            return p;
        }
        for (double& v : p) v /= total;
        return p;
    }

    Matrix spd(std::size_t d) {
        Matrix b(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) b(i, j) = normal();
        Matrix a(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double s = i == j ? 0.1 : 0.0;
                for (std::size_t k = 0; k < d; ++k) s += b(k, i) * b(k, j);
                a(i, j) = s;
            }
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
        return a;
    }

    /// A kernel for the rule plus the space its fixtures live in.
    std::pair<KernelSpec, OutcomeSpace> rule_setup(KernelKind kind) {
        switch (kind) {
            case KernelKind::SquaredDiff:
            case KernelKind::AbsDiff:
                return {KernelSpec::of_kind(kind), OutcomeSpace::real_line()};
            case KernelKind::Euclidean:
                return {KernelSpec::of_kind(kind), OutcomeSpace::real_vector(index(1, 4))};
            case KernelKind::QuadForm: {
                const std::size_t d = index(1, 4);
                return {KernelSpec::quad_form(spd(d)), OutcomeSpace::real_vector(d)};
            }
            case KernelKind::LabelMismatch:
                return {KernelSpec::of_kind(kind), OutcomeSpace::unordered(index(2, 10))};
            case KernelKind::OrdinalAbsDiff:
                return {KernelSpec::of_kind(kind), OutcomeSpace::ordered(index(2, 10))};
        }
        throw std::logic_error("unreachable");
    }

    /// Random distribution over `space`: categorical probabilities, or an
    /// empirical sample of 1..max_m points with random (sometimes equal)
    /// weights and occasional ties.
    ForecastDistribution distribution(const OutcomeSpace& space, std::size_t max_m = 50) {
        if (space.is_categorical()) return CategoricalDist(space, simplex(space.categories()));
        const std::size_t m = index(1, max_m);
        const double shift = 3.0 * normal();
        const double scale = std::exp(normal());
        const bool ties = uniform() < 0.3;
        std::vector<Point> pts(m, Point(space.dim()));
        for (auto& p : pts)
            for (double& c : p) {
                c = shift + scale * normal();
                if (ties) c = std::round(c * 2.0) / 2.0;
            }
        std::vector<double> w(m, 1.0 / static_cast<double>(m));
        if (uniform() < 0.5) w = simplex(m);
        return EmpiricalDist(space, pts, w);
    }

    Outcome outcome(const OutcomeSpace& space) {
        if (space.is_categorical()) return Category{index(0, space.categories() - 1)};
        Point p(space.dim());
        for (double& c : p) c = 3.0 * normal();
        return p;
    }

    PoolSpec pool(const OutcomeSpace& space, std::size_t n, std::size_t max_m = 50) {
        std::vector<ForecastDistribution> comps;
        for (std::size_t i = 0; i < n; ++i) comps.push_back(distribution(space, max_m));
        std::vector<double> w(n);
        double total = 0.0;
        for (double& v : w) {
            v = uniform() < 0.1 && n > 1 ? 0.0 : uniform(0.05, 1.0);
            total += v;
        }
        if (total == 0.0) {
            w[0] = 1.0;
            total = 1.0;
        }
        for (double& v : w) v /= total;
        return {std::move(comps), std::move(w)};
    }

private:
    std::mt19937_64 gen_;
};

/// Support points and weights of any distribution, as plain vectors.
struct Atoms {
    std::vector<Outcome> points;
    std::vector<double> weights;
};

inline Atoms atoms(const ForecastDistribution& d) {
    Atoms a;
    if (const auto* c = std::get_if<CategoricalDist>(&d)) {
        for (std::size_t l = 0; l < c->size(); ++l) {
            a.points.push_back(Category{l});
            a.weights.push_back(c->probs()[l]);
        }
        return a;
    }
    const auto& e = std::get<EmpiricalDist>(d);
    for (std::size_t j = 0; j < e.size(); ++j) {
        a.points.emplace_back(Point(e.point(j).begin(), e.point(j).end()));
        a.weights.push_back(e.weights()[j]);
    }
    return a;
}

/// Brute-force E[L(X, Y)] with long double accumulation in plain loop order.
inline long double naive_cross_ld(const KernelSpec& spec, const ForecastDistribution& f,
                                  const ForecastDistribution& h) {
    const Atoms a = atoms(f), b = atoms(h);
    long double total = 0.0L;
    for (std::size_t j = 0; j < a.points.size(); ++j)
        for (std::size_t l = 0; l < b.points.size(); ++l)
            total += static_cast<long double>(a.weights[j]) * b.weights[l] *
                     kernel_eval(spec, a.points[j], b.points[l]);
    return total;
}

inline double naive_cross(const KernelSpec& spec, const ForecastDistribution& f,
                          const ForecastDistribution& h) {
    return static_cast<double>(naive_cross_ld(spec, f, h));
}

inline double naive_entropy(const KernelSpec& spec, const ForecastDistribution& f) {
    return 0.5 * naive_cross(spec, f, f);
}

inline double naive_score(const KernelSpec& spec, const ForecastDistribution& f, const Outcome& y) {
    const Atoms a = atoms(f);
    long double el = 0.0L;
    for (std::size_t j = 0; j < a.points.size(); ++j) el += a.weights[j] * kernel_eval(spec, a.points[j], y);
    return static_cast<double>(el) - naive_entropy(spec, f);
}

/// Mixture by hand, independent of linear_pool.
inline ForecastDistribution naive_mixture(const PoolSpec& pool) {
    std::vector<Outcome> pts;
    std::vector<double> w;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const Atoms a = atoms(pool.components()[i]);
        for (std::size_t j = 0; j < a.points.size(); ++j) {
            pts.push_back(a.points[j]);
            w.push_back(pool.weights()[i] * a.weights[j]);
        }
    }
    if (pool.space().is_categorical()) {
        std::vector<double> p(pool.space().categories(), 0.0);
        for (std::size_t j = 0; j < pts.size(); ++j) p[std::get<Category>(pts[j]).index] += w[j];
        return CategoricalDist(pool.space(), p);
    }
    std::vector<Point> v;
    for (auto& o : pts) v.push_back(std::get<Point>(o));
    return EmpiricalDist(pool.space(), v, w);
}

/// Brute-force disagreement in pairwise form,
/// sum_{i<j} w_i w_j (C_ij - C_ii / 2 - C_jj / 2) with C the cross
/// expectations, all in long double. Exactly 0 for a single component.
inline double naive_disagreement(const KernelSpec& spec, const PoolSpec& pool) {
    const std::size_t n = pool.size();
    std::vector<long double> self(n);
    for (std::size_t i = 0; i < n; ++i) self[i] = naive_cross_ld(spec, pool.components()[i], pool.components()[i]);
    long double d = 0.0L;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const long double w = static_cast<long double>(pool.weights()[i]) * pool.weights()[j];
            if (w == 0.0L) continue;
            d += w * (naive_cross_ld(spec, pool.components()[i], pool.components()[j]) - 0.5L * self[i] -
                      0.5L * self[j]);
        }
    return static_cast<double>(d);
}

/// Right-continuous CDF of a real-line distribution, by direct summation.
inline double cdf_at(const EmpiricalDist& f, double z) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j)
        if (f.point(j)[0] <= z) s += f.weights()[j];
    return s;
}

/// Integral of g(z) over the real line for a step integrand that changes
/// only at `knots` and vanishes outside them: evaluate at each gap midpoint.
inline double step_integral(std::vector<double> knots, const std::function<double(double)>& g) {
    std::sort(knots.begin(), knots.end());
    long double total = 0.0L;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double a = knots[k], b = knots[k + 1];
        if (b > a) total += static_cast<long double>(b - a) * g(0.5 * (a + b));
    }
    return static_cast<double>(total);
}

inline std::vector<double> support_values(const EmpiricalDist& f) {
    std::vector<double> v;
    for (std::size_t j = 0; j < f.size(); ++j) v.push_back(f.point(j)[0]);
    return v;
}

inline double oracle_cramer(const EmpiricalDist& f, const EmpiricalDist& h) {
    auto knots = support_values(f);
    auto more = support_values(h);
    knots.insert(knots.end(), more.begin(), more.end());
    return step_integral(knots, [&](double z) {
        const double d = cdf_at(f, z) - cdf_at(h, z);
        return d * d;
    });
}

inline double oracle_crps(const EmpiricalDist& f, double y) {
    auto knots = support_values(f);
    knots.push_back(y);
    return step_integral(knots, [&](double z) {
        const double d = (z >= y ? 1.0 : 0.0) - cdf_at(f, z);
        return d * d;
    });
}

/// Two-pass Pearson correlation.
inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace kpool::testing
