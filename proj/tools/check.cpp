#include <algorithm>
#include <cmath>
#include <limits>

#include "commands.hpp"
#include "kpool/error.hpp"
#include "kpool/numeric.hpp"
#include "kpool/pooling.hpp"

namespace kpool::cli {

namespace {

constexpr double kIdentityTol = 1e-9;
constexpr double kGapTol = 1e-10;
constexpr double kCrpsTol = 1e-10;
constexpr std::size_t kNdTrials = 1000;
constexpr std::size_t kMaxSupport = 12;
constexpr std::size_t kGapDraws = 20;

/// Seeded random fixtures for one rule.
class Generator {
public:
    Generator(std::uint64_t seed, std::size_t max_components) : rng_(seed), max_components_(max_components) {}

    Rng& rng() { return rng_; }

    std::pair<KernelSpec, OutcomeSpace> setup(KernelKind kind) {
        switch (kind) {
            case KernelKind::SquaredDiff:
            case KernelKind::AbsDiff:
                return {KernelSpec::of_kind(kind), OutcomeSpace::real_line()};
            case KernelKind::Euclidean:
                return {KernelSpec::of_kind(kind), OutcomeSpace::real_vector(pick(1, 3))};
            case KernelKind::QuadForm: {
                const std::size_t d = pick(1, 3);
                return {KernelSpec::quad_form(spd(d)), OutcomeSpace::real_vector(d)};
            }
            case KernelKind::LabelMismatch:
                return {KernelSpec::of_kind(kind), OutcomeSpace::unordered(pick(2, 10))};
            case KernelKind::OrdinalAbsDiff:
                return {KernelSpec::of_kind(kind), OutcomeSpace::ordered(pick(2, 10))};
        }
        throw std::logic_error("unknown kernel kind");
    }

    std::vector<double> simplex(std::size_t k) {
        std::vector<double> p(k);
        double total = 0.0;
        const bool sparse = rng_.uniform() < 0.2;
        for (double& v : p) {
            v = sparse && rng_.uniform() < 0.4 ? 0.0 : rng_.gamma(1.0);
            total += v;
        }
        if (!(total > 0.0)) {
            p[rng_.integer(0, static_cast<std::int64_t>(k) - 1)] = 1.0;
            return p;
        }
        for (double& v : p) v /= total;
        return p;
    }

    ForecastDistribution distribution(const OutcomeSpace& space) {
        if (space.is_categorical()) return CategoricalDist(space, simplex(space.categories()));
        const std::size_t m = pick(1, kMaxSupport);
        const double shift = 3.0 * rng_.normal();
        const double scale = std::exp(rng_.normal());
        std::vector<Point> pts(m, Point(space.dim()));
        for (auto& p : pts)
            for (double& c : p) c = shift + scale * rng_.normal();
        return EmpiricalDist(space, pts, simplex(m));
    }

    Outcome outcome(const OutcomeSpace& space) {
        if (space.is_categorical()) return Category{pick(0, space.categories() - 1)};
        Point p(space.dim());
        for (double& c : p) c = 3.0 * rng_.normal();
        return p;
    }

    PoolSpec pool(const OutcomeSpace& space) {
        const std::size_t n = pick(1, max_components_);
        std::vector<ForecastDistribution> comps;
        for (std::size_t i = 0; i < n; ++i) comps.push_back(distribution(space));
        return {std::move(comps), simplex(n)};
    }

    Matrix spd(std::size_t d) {
        Matrix b(d, d), a(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) b(i, j) = rng_.normal();
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                double s = i == j ? 0.1 : 0.0;
                for (std::size_t k = 0; k < d; ++k) s += b(k, i) * b(k, j);
                a(i, j) = a(j, i) = s;
            }
        return a;
    }

    std::size_t pick(std::size_t lo, std::size_t hi) {
        return static_cast<std::size_t>(rng_.integer(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
    }

private:
    Rng rng_;
    std::size_t max_components_;
};

struct Property {
    std::string name;
    std::string rule;
    std::string statistic;  ///< "max_abs_residual", "min_gap" or "max_quadratic_form"
    double tolerance;
    std::size_t instances = 0;
    double value;
    bool failed = false;

    Property(std::string n, std::string r, std::string stat, double tol)
        : name(std::move(n)), rule(std::move(r)), statistic(std::move(stat)), tolerance(tol),
          value(statistic == "min_gap" ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity()) {}

    void record(double v) {
        ++instances;
        if (std::isnan(v)) {
            failed = true;
            value = v;
            return;
        }
        if (std::isnan(value)) return;
        value = statistic == "min_gap" ? std::min(value, v) : std::max(value, v);
    }
    [[nodiscard]] bool passed() const {
        if (failed || std::isnan(value) || instances == 0) return false;
        return statistic == "min_gap" ? value >= -tolerance : value <= tolerance;
    }
};

double rel(double a, double b, double scale) { return std::abs(a - b) / std::max(1.0, std::abs(scale)); }

/// The pool's components as probability vectors over the concatenated
/// supports, so any kernel can be checked on a finite outcome set.
FinitePool finite_pool(const KernelSpec& spec, const PoolSpec& pool) {
    if (pool.space().is_categorical()) return FinitePool(spec, pool);
    std::vector<Outcome> support;
    std::vector<std::size_t> offset;
    for (const auto& c : pool.components()) {
        const auto& e = std::get<EmpiricalDist>(c);
        offset.push_back(support.size());
        for (std::size_t j = 0; j < e.size(); ++j) support.emplace_back(Point(e.point(j).begin(), e.point(j).end()));
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& e = std::get<EmpiricalDist>(pool.components()[i]);
        std::vector<double> p(support.size(), 0.0);
        for (std::size_t j = 0; j < e.size(); ++j) p[offset[i] + j] = e.weights()[j];
        rows.push_back(std::move(p));
    }
    return FinitePool(spec, support, std::move(rows), {pool.weights().begin(), pool.weights().end()});
}

void check_rule(KernelKind kind, const RunConfig& cfg, std::vector<Property>& out) {
    const std::string rule(rule_name(kind));
    Generator gen(Rng::sub_seed(cfg.seed, static_cast<std::uint64_t>(kind)), cfg.max_components);
    Property eq4("entropy-decomposition", rule, "max_abs_residual", kIdentityTol);
    Property table("closed-form-disagreement", rule, "max_abs_residual", kIdentityTol);
    Property expost("ex-post-identity", rule, "max_abs_residual", kIdentityTol);
    Property invariance("disagreement-outcome-invariance", rule, "max_abs_residual", kIdentityTol);
    Property gap("gen-disagreement-gap", rule, "min_gap", kGapTol);
    Property quad("gen-disagreement-quadratic-identity", rule, "max_abs_residual", kGapTol);
    Property symmetry("divergence-symmetry", rule, "max_abs_residual", 0.0);
    Property crps("crps-dual-representation", rule, "max_abs_residual", kCrpsTol);
    Property nd("negative-definite", rule, "max_quadratic_form", 1e-10);

    for (std::size_t t = 0; t < cfg.random; ++t) {
        auto [spec, space] = gen.setup(kind);
        const PoolSpec pool = gen.pool(space);
        try {
            // entropy decomposition through the divergence path only
            const ForecastDistribution mix = linear_pool(pool);
            const double pool_h = entropy(spec, mix).value;
            double avg_h = 0.0, d = 0.0;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                avg_h += pool.weights()[i] * entropy(spec, pool.components()[i]).value;
                d += pool.weights()[i] * divergence(spec, mix, pool.components()[i]).value;
            }
            eq4.record(rel(pool_h, avg_h + d, pool_h));
            table.record(rel(closed_form_disagreement(spec, pool), pool_h - avg_h, pool_h));

            // ex-post identity at two outcomes
            double implied[2] = {0.0, 0.0};
            for (int r = 0; r < 2; ++r) {
                const Outcome y = gen.outcome(space);
                const double s_pool = score(spec, mix, y).value;
                double s_avg = 0.0;
                for (std::size_t i = 0; i < pool.size(); ++i)
                    s_avg += pool.weights()[i] * score(spec, pool.components()[i], y).value;
                expost.record(rel(s_avg - d, s_pool, s_avg));
                implied[r] = s_avg - s_pool;
            }
            invariance.record(rel(implied[0], implied[1], std::max(std::abs(implied[0]), std::abs(implied[1]))));

            // generalized disagreement on the finite support
            const FinitePool fp = finite_pool(spec, pool);
            const std::vector<double> ones(fp.outcomes(), 1.0);
            for (std::size_t s = 0; s < kGapDraws; ++s) {
                const auto h = gen.rng().dirichlet(ones);
                const auto rep = gen_disagreement(fp, h);
                gap.record(rep.gap);
                quad.record(rel(rep.gap, rep.quadratic_gap, rep.at_h));
            }

            const auto f = gen.distribution(space), g = gen.distribution(space);
            symmetry.record(std::abs(divergence(spec, f, g).value - divergence(spec, g, f).value));

            if (kind == KernelKind::AbsDiff) {
                const auto& e = std::get<EmpiricalDist>(f);
                const double y = 3.0 * gen.rng().normal();
                EvalOptions exact;
                exact.method = Method::ExactPairwise;
                const double kernel_form = score(spec, e, real(y), exact).value;
                crps.record(rel(kernel_form, crps_cdf_integral(e, y), kernel_form));
            }

            std::vector<Outcome> outs;
            const std::size_t n_out = space.is_categorical() ? space.categories() : 8;
            for (std::size_t j = 0; j < n_out; ++j)
                outs.push_back(space.is_categorical() ? Outcome(Category{j}) : gen.outcome(space));
            nd.record(check_negative_definite(spec, outs, kNdTrials,
                                              gen.rng().bits())
                          .max_quadratic_form);
        } catch (const InvariantError&) {
            eq4.record(std::numeric_limits<double>::quiet_NaN());
        }
    }
    out.push_back(eq4);
    out.push_back(table);
    out.push_back(expost);
    out.push_back(invariance);
    out.push_back(gap);
    out.push_back(quad);
    out.push_back(symmetry);
    if (kind == KernelKind::AbsDiff) out.push_back(crps);
    out.push_back(nd);
}

/// (x - y)^4 on random real points: not conditionally negative definite,
/// so the pool no longer minimizes the generalized disagreement.
void check_broken_kernel(const RunConfig& cfg, std::vector<Property>& out) {
    Generator gen(Rng::sub_seed(cfg.seed, 0xB0B), cfg.max_components);
    Property gap("gen-disagreement-gap", "quartic", "min_gap", kGapTol);
    Property nd("negative-definite", "quartic", "max_quadratic_form", 1e-10);
    for (std::size_t t = 0; t < std::max<std::size_t>(cfg.random, 1); ++t) {
        std::vector<double> pts(8);
        for (double& x : pts) x = 2.0 * gen.rng().normal();
        const Matrix l = quartic_kernel_matrix(pts);
        nd.record(check_negative_definite(l, kNdTrials, gen.rng().bits()).max_quadratic_form);
        const std::size_t n = gen.pick(2, std::max<std::size_t>(cfg.max_components, 2));
        std::vector<std::vector<double>> comps;
        for (std::size_t i = 0; i < n; ++i) comps.push_back(gen.simplex(pts.size()));
        const FinitePool fp(l, comps, gen.simplex(n));
        const std::vector<double> ones(pts.size(), 1.0);
        for (std::size_t s = 0; s < kGapDraws; ++s) gap.record(gen_disagreement(fp, gen.rng().dirichlet(ones)).gap);
    }
    out.push_back(gap);
    out.push_back(nd);
}

}  // namespace

CheckResult cmd_check(const RunConfig& cfg) {
    if (cfg.random == 0) throw InputError("--random must be at least 1");
    if (cfg.max_components == 0) throw InputError("--max-components must be at least 1");
    std::vector<KernelKind> rules;
    if (cfg.rule) {
        rules.push_back(*cfg.rule);
    } else {
        rules = {KernelKind::SquaredDiff, KernelKind::QuadForm,      KernelKind::AbsDiff,
                 KernelKind::Euclidean,   KernelKind::LabelMismatch, KernelKind::OrdinalAbsDiff};
    }
    std::vector<Property> props;
    for (KernelKind k : rules) check_rule(k, cfg, props);
    if (cfg.inject_broken_kernel) check_broken_kernel(cfg, props);

    CheckResult res;
    res.report.meta["command"] = "check";
    res.report.meta["seed"] = cfg.seed;
    res.report.meta["instances_per_rule"] = cfg.random;
    res.report.meta["max_components"] = cfg.max_components;
    Table t{"properties", {"property", "rule", "instances", "statistic", "value", "tolerance", "status"}, {}, false};
    for (const Property& p : props) {
        const bool ok = p.passed();
        res.passed = res.passed && ok;
        t.add({p.name, p.rule, static_cast<std::int64_t>(p.instances), p.statistic,
               std::isfinite(p.value) ? Cell(p.value) : Cell(std::monostate{}), p.tolerance,
               std::string(ok ? "pass" : "fail")});
    }
    res.report.meta["passed"] = res.passed;
    res.report.tables.push_back(std::move(t));
    return res;
}

}  // namespace kpool::cli
