#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kpool/error.hpp"
#include "kpool/numeric.hpp"
#include "kpool/pooling.hpp"
#include "support.hpp"

using namespace kpool;
using namespace kpool::testing;

namespace {

const OutcomeSpace kLine = OutcomeSpace::real_line();

PoolSpec two_point_masses(double a, double b) {
    return PoolSpec::equal_weights({EmpiricalDist::point_mass(a), EmpiricalDist::point_mass(b)});
}

PoolSpec opposite_labels(const OutcomeSpace& space) {
    return PoolSpec::equal_weights({CategoricalDist(space, {1.0, 0.0}), CategoricalDist(space, {0.0, 1.0})});
}

/// -1/2 (h - p)^T L (h - p) by plain loops.
double oracle_gap(const Matrix& l, std::span<const double> h, std::span<const double> p) {
    long double s = 0.0L;
    for (std::size_t a = 0; a < h.size(); ++a)
        for (std::size_t b = 0; b < h.size(); ++b) s += (h[a] - p[a]) * l(a, b) * (h[b] - p[b]);
    return static_cast<double>(-0.5L * s);
}

}  // namespace

TEST_CASE("decompose examples") {
    Fixtures fx(5);
    const auto same = fx.distribution(kLine);
    const auto d0 = decompose(KernelSpec::abs_diff(), PoolSpec({same, same, same}, {0.2, 0.3, 0.5}));
    CHECK(d0.disagreement == doctest::Approx(0.0));
    CHECK(d0.pool_entropy == doctest::Approx(d0.avg_component_entropy));

    const auto se = decompose(KernelSpec::squared_diff(), two_point_masses(0.0, 2.0));
    CHECK(se.pool_entropy == doctest::Approx(1.0));
    CHECK(se.avg_component_entropy == 0.0);
    CHECK(se.disagreement == doctest::Approx(1.0));
    CHECK(se.disagreement_share() == doctest::Approx(1.0));

    const auto br = decompose(KernelSpec::label_mismatch(), opposite_labels(OutcomeSpace::unordered(2)));
    CHECK(br.disagreement == doctest::Approx(0.25));
    CHECK(br.pool_entropy == doctest::Approx(0.25));
    CHECK(br.avg_component_entropy == 0.0);
    CHECK(br.per_component_divergence == std::vector<double>{0.25, 0.25});
}

TEST_CASE("decompose rejects mismatched kernels") {
    CHECK_THROWS_AS(decompose(KernelSpec::ordinal_abs_diff(), two_point_masses(0, 1)), InputError);
    CHECK_THROWS_AS(decompose(KernelSpec::abs_diff(), opposite_labels(OutcomeSpace::ordered(2))), InputError);
}

TEST_CASE("zero-entropy pool has zero share") {
    const auto d = decompose(KernelSpec::abs_diff(), two_point_masses(1.0, 1.0));
    CHECK(d.pool_entropy == 0.0);
    CHECK(d.disagreement_share() == 0.0);
}

TEST_CASE("validate catches a broken identity") {
    Decomposition d;
    d.pool_entropy = 1.0;
    d.avg_component_entropy = 0.5;
    d.disagreement = 0.2;
    d.per_component_divergence = {0.2};
    d.weights = {1.0};
    CHECK_THROWS_AS(d.validate(), InvariantError);
    d.disagreement = 0.5;
    d.per_component_divergence = {0.5};
    CHECK_NOTHROW(d.validate());
}

TEST_CASE("closed-form disagreement examples") {
    CHECK(closed_form_disagreement(KernelSpec::ordinal_abs_diff(), opposite_labels(OutcomeSpace::ordered(2))) ==
          doctest::Approx(0.25));
    const PoolSpec means = PoolSpec::equal_weights(
        {EmpiricalDist::point_mass(Point{0.0, 0.0}), EmpiricalDist::point_mass(Point{2.0, 0.0})});
    CHECK(closed_form_disagreement(KernelSpec::quad_form(Matrix::identity(2)), means) == doctest::Approx(1.0));
    CHECK(closed_form_disagreement(KernelSpec::abs_diff(), two_point_masses(0.0, 1.0)) == doctest::Approx(0.25));
    // half the mean distance between two draws of the pool: 1/2 * 1/2 * 2
    CHECK(closed_form_disagreement(KernelSpec::euclidean(), means) == doctest::Approx(0.5));
}

TEST_CASE("entropy decomposition holds for every rule") {
    Fixtures fx(113);
    for (KernelKind k : all_rules()) {
        CAPTURE(rule_name(k));
        for (int t = 0; t < 150; ++t) {
            auto [spec, space] = fx.rule_setup(k);
            const PoolSpec pool = fx.pool(space, fx.index(1, 6), 25);
            const Decomposition d = decompose(spec, pool);
            const double scale = std::max(1.0, d.pool_entropy);
            CHECK(std::abs(d.pool_entropy - d.avg_component_entropy - d.disagreement) <= 1e-9 * scale);
            double weighted = 0.0;
            for (std::size_t i = 0; i < pool.size(); ++i) weighted += d.weights[i] * d.per_component_divergence[i];
            CHECK(std::abs(d.disagreement - weighted) <= 1e-9 * scale);
            CHECK(d.disagreement >= 0.0);
            CHECK(d.disagreement_share() >= 0.0);
            CHECK(d.disagreement_share() <= 1.0);
            CHECK(rel_err(d.disagreement, naive_disagreement(spec, pool)) <= 1e-9 * scale);
            CHECK(rel_err(closed_form_disagreement(spec, pool), d.disagreement) <= 1e-9 * scale);
            if (pool.size() == 1) CHECK(d.disagreement == doctest::Approx(0.0));
        }
    }
}

TEST_CASE("table of closed forms against hand formulas") {
    Fixtures fx(127);
    for (int t = 0; t < 100; ++t) {
        // squared difference: weighted spread of the means
        const PoolSpec pool = fx.pool(kLine, fx.index(1, 5));
        std::vector<double> mu;
        double mean = 0.0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const Atoms a = atoms(pool.components()[i]);
            double m = 0.0;
            for (std::size_t j = 0; j < a.points.size(); ++j) m += a.weights[j] * std::get<Point>(a.points[j])[0];
            mu.push_back(m);
            mean += pool.weights()[i] * m;
        }
        double spread = 0.0;
        for (std::size_t i = 0; i < pool.size(); ++i) spread += pool.weights()[i] * (mu[i] - mean) * (mu[i] - mean);
        CHECK(rel_err(closed_form_disagreement(KernelSpec::squared_diff(), pool), spread) <= 1e-9);

        // abs diff: weighted Cramer distances to the pool
        const auto mix = std::get<EmpiricalDist>(naive_mixture(pool));
        double cramer = 0.0;
        for (std::size_t i = 0; i < pool.size(); ++i)
            cramer += pool.weights()[i] * oracle_cramer(std::get<EmpiricalDist>(pool.components()[i]), mix);
        CHECK(rel_err(closed_form_disagreement(KernelSpec::abs_diff(), pool), cramer) <= 1e-9);
    }
    for (int t = 0; t < 100; ++t) {
        const std::size_t k = fx.index(2, 9);
        const PoolSpec pool = fx.pool(OutcomeSpace::ordered(k), fx.index(1, 5));
        const auto p = std::get<CategoricalDist>(naive_mixture(pool));
        double brier = 0.0, rps = 0.0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const auto& c = std::get<CategoricalDist>(pool.components()[i]);
            double cum_c = 0.0, cum_p = 0.0;
            for (std::size_t l = 0; l < k; ++l) {
                const double d = c.probs()[l] - p.probs()[l];
                brier += 0.5 * pool.weights()[i] * d * d;
                cum_c += c.probs()[l];
                cum_p += p.probs()[l];
                rps += pool.weights()[i] * (cum_c - cum_p) * (cum_c - cum_p);
            }
        }
        CHECK(rel_err(closed_form_disagreement(KernelSpec::ordinal_abs_diff(), pool), rps) <= 1e-9);
        const PoolSpec labels(
            [&] {
                std::vector<ForecastDistribution> v;
                for (const auto& c : pool.components()) {
                    const auto q = std::get<CategoricalDist>(c).probs();
                    v.push_back(CategoricalDist(OutcomeSpace::unordered(k), {q.begin(), q.end()}));
                }
                return v;
            }(),
            std::vector<double>(pool.weights().begin(), pool.weights().end()));
        CHECK(rel_err(closed_form_disagreement(KernelSpec::label_mismatch(), labels), brier) <= 1e-9);
    }
}

TEST_CASE("ex-post identity examples") {
    Fixtures fx(131);
    const auto same = fx.distribution(kLine);
    const auto r0 = ex_post_identity(KernelSpec::abs_diff(), PoolSpec({same, same}, {0.3, 0.7}), real(0.4));
    CHECK(r0.pool_score == doctest::Approx(r0.avg_component_score));

    const auto se = ex_post_identity(KernelSpec::squared_diff(), two_point_masses(0.0, 2.0), real(5.0));
    CHECK(se.pool_score == doctest::Approx(16.0));
    CHECK(se.avg_component_score == doctest::Approx(17.0));
    CHECK(se.disagreement == doctest::Approx(1.0));
    CHECK(std::abs(se.residual) <= 1e-12);
    REQUIRE(se.implied_disagreement_alt.has_value());
    CHECK(*se.implied_disagreement_alt == doctest::Approx(1.0));

    const PoolSpec mixed = PoolSpec::equal_weights(
        {EmpiricalDist(kLine, {{0.0}, {1.0}}), EmpiricalDist::point_mass(0.0)});
    const auto cr = ex_post_identity(KernelSpec::abs_diff(), mixed, real(1.0));
    CHECK(std::abs(cr.residual) <= 1e-10);
    const double pool_oracle = naive_score(KernelSpec::abs_diff(), naive_mixture(mixed), real(1.0));
    CHECK(cr.pool_score == doctest::Approx(pool_oracle).epsilon(1e-12));

    CHECK_THROWS_AS(ex_post_identity(KernelSpec::abs_diff(), mixed, Category{0}), InputError);
}

TEST_CASE("ex-post identity holds for every rule") {
    Fixtures fx(137);
    for (KernelKind k : all_rules()) {
        CAPTURE(rule_name(k));
        for (int t = 0; t < 100; ++t) {
            auto [spec, space] = fx.rule_setup(k);
            const PoolSpec pool = fx.pool(space, fx.index(1, 6), 25);
            const Outcome y = fx.outcome(space);
            const ExPostReport r = ex_post_identity(spec, pool, y);
            CHECK(std::abs(r.residual) <= 1e-9 * std::max(1.0, std::abs(r.avg_component_score)));
            // independent second outcome
            const Outcome y2 = fx.outcome(space);
            const ExPostReport r2 = ex_post_identity(spec, pool, y2);
            CHECK(std::abs((r.avg_component_score - r.pool_score) - (r2.avg_component_score - r2.pool_score)) <=
                  1e-9 * std::max({1.0, std::abs(r.avg_component_score), std::abs(r2.avg_component_score)}));
            CHECK(rel_err(r.pool_score, std::max(0.0, naive_score(spec, naive_mixture(pool), y))) <= 1e-9);
        }
    }
}

TEST_CASE("generalized disagreement examples") {
    const auto space = OutcomeSpace::unordered(2);
    const PoolSpec pool = opposite_labels(space);
    const std::vector<double> at_pool = {0.5, 0.5};
    const auto r0 = gen_disagreement(KernelSpec::label_mismatch(), pool, at_pool);
    CHECK(r0.gap == doctest::Approx(0.0));
    CHECK(r0.at_pool == doctest::Approx(decompose(KernelSpec::label_mismatch(), pool).disagreement));

    const std::vector<double> corner = {1.0, 0.0};
    const auto r1 = gen_disagreement(KernelSpec::label_mismatch(), pool, corner);
    CHECK(r1.gap == doctest::Approx(0.25));
    CHECK(r1.quadratic_gap == doctest::Approx(0.25));

    const std::vector<double> short_h = {1.0};
    const std::vector<double> bad_h = {0.7, 0.7};
    CHECK_THROWS_AS(gen_disagreement(KernelSpec::label_mismatch(), pool, short_h), InputError);
    CHECK_THROWS_AS(gen_disagreement(KernelSpec::label_mismatch(), pool, bad_h), InputError);
    CHECK_THROWS_AS(gen_disagreement(KernelSpec::abs_diff(), two_point_masses(0, 1), at_pool), InputError);
}

TEST_CASE("linear pool minimizes generalized disagreement") {
    Fixtures fx(139);
    Rng rng(kDefaultSeed);
    for (KernelKind k : {KernelKind::LabelMismatch, KernelKind::OrdinalAbsDiff}) {
        for (int t = 0; t < 20; ++t) {
            auto [spec, space] = fx.rule_setup(k);
            const PoolSpec pool = fx.pool(space, fx.index(1, 5));
            const FinitePool finite(spec, pool);
            const std::vector<double> ones(space.categories(), 1.0);
            const double d = decompose(spec, pool).disagreement;
            CHECK(std::abs(finite.generalized_disagreement(finite.pooled()) - d) <= 1e-10 * std::max(1.0, d));
            double min_gap = 1.0;
            for (int s = 0; s < 1000; ++s) {
                const auto h = rng.dirichlet(ones);
                const auto r = gen_disagreement(finite, h);
                min_gap = std::min(min_gap, r.gap);
                CHECK(std::abs(r.gap - oracle_gap(finite.kernel(), h, finite.pooled())) <= 1e-10);
            }
            CHECK(min_gap >= -1e-10);
        }
    }
}

TEST_CASE("quadratic-form kernel on a grid: pool minimizes") {
    Fixtures fx(149);
    Rng rng(3);
    for (int t = 0; t < 10; ++t) {
        const std::size_t d = fx.index(1, 3);
        const auto spec = KernelSpec::quad_form(fx.spd(d));
        std::vector<Outcome> grid;
        for (int g = 0; g < 6; ++g) {
            Point p(d);
            for (double& c : p) c = std::round(4.0 * fx.normal()) / 2.0;
            grid.push_back(p);
        }
        std::vector<std::vector<double>> comps;
        for (int i = 0; i < 3; ++i) comps.push_back(fx.simplex(grid.size()));
        const FinitePool pool(spec, grid, comps, {0.2, 0.3, 0.5});
        const std::vector<double> ones(grid.size(), 1.0);
        for (int s = 0; s < 500; ++s) {
            const auto h = rng.dirichlet(ones);
            const auto r = gen_disagreement(pool, h);
            CHECK(r.gap >= -1e-10);
            CHECK(std::abs(r.gap - oracle_gap(pool.kernel(), h, pool.pooled())) <= 1e-10 * std::max(1.0, r.at_h));
        }
    }
}

TEST_CASE("grid search finds the pool") {
    const Matrix l = Matrix::from_rows({{0, 1, 2}, {1, 0, 1}, {2, 1, 0}});
    const FinitePool pool(l, {{0.6, 0.3, 0.1}, {0.1, 0.2, 0.7}}, {0.5, 0.5});
    const auto best = simplex_grid_search(pool, 0.01);
    CHECK(best.evaluated == 5151);
    for (std::size_t a = 0; a < 3; ++a) CHECK(std::abs(best.minimizer[a] - pool.pooled()[a]) <= 0.01 + 1e-12);
    CHECK(best.value >= pool.generalized_disagreement(pool.pooled()) - 1e-10);
    CHECK_THROWS_AS(simplex_grid_search(pool, 0.03), InputError);
}

TEST_CASE("squared error: the arithmetic mean minimizes") {
    Fixtures fx(151);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = fx.index(2, 6);
        std::vector<double> xs(n);
        for (double& x : xs) x = std::round(10.0 * fx.normal()) / 4.0;
        std::vector<double> w = fx.simplex(n);
        if (*std::max_element(w.begin(), w.end()) == 1.0) w.assign(n, 1.0 / static_cast<double>(n));

        std::vector<ForecastDistribution> comps;
        std::vector<Outcome> grid;
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            comps.push_back(EmpiricalDist::point_mass(xs[i]));
            grid.push_back(real(xs[i]));
            mu += w[i] * xs[i];
        }
        const PoolSpec pool(comps, w);
        const auto mom = mean_and_variance(linear_pool(pool));
        CHECK(std::abs(mom.mean[0] - mu) <= 1e-10 * std::max(1.0, std::abs(mu)));
        const Decomposition dec = decompose(KernelSpec::squared_diff(), pool);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(dec.per_component_divergence[i] - (mu - xs[i]) * (mu - xs[i])) <=
                  1e-10 * std::max(1.0, mu * mu + xs[i] * xs[i]));

        // point masses on the grid itself: the pool is w
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> e(n, 0.0);
            e[i] = 1.0;
            rows.push_back(e);
        }
        const FinitePool finite(KernelSpec::squared_diff(), grid, rows, w);
        CHECK(std::abs(finite.generalized_disagreement(w) - dec.disagreement) <= 1e-10 * std::max(1.0, dec.disagreement));
    }
}

TEST_CASE("empirical pools are rejected by the categorical generalized disagreement") {
    const std::vector<double> h = {0.5, 0.5};
    CHECK_THROWS_AS(gen_disagreement(KernelSpec::abs_diff(), two_point_masses(0, 1), h), InputError);
}

TEST_CASE("decomposition under monte carlo stays close") {
    Fixtures fx(157);
    const auto space = OutcomeSpace::real_vector(2);
    const PoolSpec pool = fx.pool(space, 3, 80);
    EvalOptions o;
    o.allow_monte_carlo = true;
    o.monte_carlo_pair_threshold = 1.0;
    o.monte_carlo_draws = 200000;
    const auto mc = decompose(KernelSpec::euclidean(), pool, o);
    const auto ex = decompose(KernelSpec::euclidean(), pool);
    CHECK(mc.pool_entropy == doctest::Approx(ex.pool_entropy).epsilon(0.05));
}
