#include "kpool/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <type_traits>
#include <thread>

#include "kpool/error.hpp"
#include "kpool/numeric.hpp"

namespace kpool {

namespace {

constexpr double kClampTolerance = 1e-10;
constexpr std::size_t kMonteCarloChunk = 4096;

double clamp_scaled(double value, double scale, const char* what) {
    return detail::clamp_nonnegative(value, kClampTolerance * std::max(1.0, std::abs(scale)), what);
}

void require_same_space(const KernelSpec& spec, const ForecastDistribution& f,
                        const ForecastDistribution& h) {
    spec.require_compatible(space_of(f));
    if (!(space_of(f) == space_of(h)) || f.index() != h.index()) {
        throw InputError("distributions live in different spaces: " + space_of(f).describe() +
                         " vs " + space_of(h).describe());
    }
}

bool has_closed_form(KernelKind kind) { return kind != KernelKind::Euclidean; }

// ---------------------------------------------------------------------------
// Moments on R^d

struct MeanCov {
    std::vector<double> mean;
    Matrix cov;
};

MeanCov moments(const EmpiricalDist& e) {
    Moments m = mean_and_variance(ForecastDistribution(e));
    return {std::move(m.mean), std::move(m.covariance)};
}

/// trace(A * Sigma), for the quadratic-form entropy.
double trace_product(const Matrix& a, const Matrix& sigma) {
    double t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t += a(i, j) * sigma(j, i);
    return t;
}

double quad(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
    return spec.points(x, y);
}

// ---------------------------------------------------------------------------
// Step CDFs on the real line

struct PooledCdfs {
    std::vector<double> knots;              ///< sorted, distinct
    std::vector<std::vector<double>> cdf;   ///< cdf[d][k] = F_d(knots[k])
};

PooledCdfs pooled_cdfs(std::span<const EmpiricalDist* const> dists, std::span<const double> extra) {
    PooledCdfs out;
    for (const EmpiricalDist* d : dists) out.knots.insert(out.knots.end(), d->coords().begin(), d->coords().end());
    out.knots.insert(out.knots.end(), extra.begin(), extra.end());
    std::sort(out.knots.begin(), out.knots.end());
    out.knots.erase(std::unique(out.knots.begin(), out.knots.end()), out.knots.end());

    out.cdf.reserve(dists.size());
    for (const EmpiricalDist* d : dists) {
        std::vector<std::pair<double, double>> pts(d->size());
        for (std::size_t j = 0; j < d->size(); ++j) pts[j] = {d->coords()[j], d->weights()[j]};
        std::sort(pts.begin(), pts.end());
        std::vector<double> f(out.knots.size());
        std::size_t next = 0;
        double running = 0.0;
        for (std::size_t k = 0; k < out.knots.size(); ++k) {
            while (next < pts.size() && pts[next].first <= out.knots[k]) running += pts[next++].second;
            f[k] = next == pts.size() ? 1.0 : running;
        }
        out.cdf.push_back(std::move(f));
    }
    return out;
}

/// Sum over gaps [z_k, z_{k+1}) of (z_{k+1} - z_k) * g(k). Outside the
/// pooled support every integrand used here vanishes.
template <typename Integrand>
double integrate_gaps(const PooledCdfs& c, Integrand g) {
    if (c.knots.size() < 2) return 0.0;
    std::vector<double> terms(c.knots.size() - 1);
    for (std::size_t k = 0; k + 1 < c.knots.size(); ++k) terms[k] = (c.knots[k + 1] - c.knots[k]) * g(k);
    return pairwise_sum(terms);
}

double crps_entropy(const EmpiricalDist& f) {
    const EmpiricalDist* d[] = {&f};
    const PooledCdfs c = pooled_cdfs(d, {});
    return integrate_gaps(c, [&](std::size_t k) { return c.cdf[0][k] * (1.0 - c.cdf[0][k]); });
}

double crps_cross(const EmpiricalDist& f, const EmpiricalDist& h) {
    // E|X - Y| = int F(1 - H) + H(1 - F) dz
    const EmpiricalDist* d[] = {&f, &h};
    const PooledCdfs c = pooled_cdfs(d, {});
    return integrate_gaps(c, [&](std::size_t k) {
        const double a = c.cdf[0][k], b = c.cdf[1][k];
        return a * (1.0 - b) + b * (1.0 - a);
    });
}

// ---------------------------------------------------------------------------
// Exact double sums

/// Total order on distributions so that cross sums run in one fixed
/// orientation whichever argument comes first.
bool precedes(const ForecastDistribution& a, const ForecastDistribution& b) {
    if (const auto* ca = std::get_if<CategoricalDist>(&a)) {
        const auto& cb = std::get<CategoricalDist>(b);
        return std::lexicographical_compare(ca->probs().begin(), ca->probs().end(),
                                            cb.probs().begin(), cb.probs().end());
    }
    const auto& ea = std::get<EmpiricalDist>(a);
    const auto& eb = std::get<EmpiricalDist>(b);
    if (ea.size() != eb.size()) return ea.size() < eb.size();
    if (!std::equal(ea.coords().begin(), ea.coords().end(), eb.coords().begin())) {
        return std::lexicographical_compare(ea.coords().begin(), ea.coords().end(),
                                            eb.coords().begin(), eb.coords().end());
    }
    return std::lexicographical_compare(ea.weights().begin(), ea.weights().end(),
                                        eb.weights().begin(), eb.weights().end());
}

template <typename RowFn>
double sum_rows(std::size_t rows, std::size_t row_len, unsigned threads, RowFn row_total) {
    std::vector<double> outer(rows);
    auto work = [&](std::size_t begin, std::size_t end) {
        std::vector<double> buffer(row_len);
        for (std::size_t j = begin; j < end; ++j) outer[j] = row_total(j, buffer);
    };
    const unsigned t = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows)));
    if (t <= 1) {
        work(0, rows);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (rows + t - 1) / t;
        for (unsigned i = 0; i < t; ++i) {
            const std::size_t b = i * chunk, e = std::min(rows, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }
    return pairwise_sum(outer);
}

double exact_cross_ordered(const KernelSpec& spec, const ForecastDistribution& f,
                           const ForecastDistribution& h, unsigned threads) {
    if (const auto* cf = std::get_if<CategoricalDist>(&f)) {
        const auto& ch = std::get<CategoricalDist>(h);
        const auto p = cf->probs();
        const auto q = ch.probs();
        return sum_rows(p.size(), q.size(), 1, [&](std::size_t j, std::vector<double>& buf) {
            for (std::size_t l = 0; l < q.size(); ++l) buf[l] = q[l] * spec.categories(j, l);
            return p[j] * pairwise_sum(buf);
        });
    }
    const auto& ef = std::get<EmpiricalDist>(f);
    const auto& eh = std::get<EmpiricalDist>(h);
    const auto wf = ef.weights();
    const auto wh = eh.weights();
    return sum_rows(ef.size(), eh.size(), threads, [&](std::size_t j, std::vector<double>& buf) {
        const auto x = ef.point(j);
        for (std::size_t l = 0; l < buf.size(); ++l) buf[l] = wh[l] * quad(spec, x, eh.point(l));
        return wf[j] * pairwise_sum(buf);
    });
}

double exact_cross(const KernelSpec& spec, const ForecastDistribution& f,
                   const ForecastDistribution& h, unsigned threads) {
    return precedes(h, f) ? exact_cross_ordered(spec, h, f, threads)
                          : exact_cross_ordered(spec, f, h, threads);
}

// ---------------------------------------------------------------------------
// Closed forms

double closed_cross(const KernelSpec& spec, const ForecastDistribution& f,
                    const ForecastDistribution& h) {
    switch (spec.kind()) {
        case KernelKind::LabelMismatch: {
            const auto p = std::get<CategoricalDist>(f).probs();
            const auto q = std::get<CategoricalDist>(h).probs();
            std::vector<double> prod(p.size());
            for (std::size_t l = 0; l < p.size(); ++l) prod[l] = p[l] * q[l];
            return 1.0 - pairwise_sum(prod);
        }
        case KernelKind::OrdinalAbsDiff: {
            const auto pc = std::get<CategoricalDist>(f).cumulative();
            const auto qc = std::get<CategoricalDist>(h).cumulative();
            std::vector<double> terms(pc.size());
            for (std::size_t l = 0; l < pc.size(); ++l)
                terms[l] = pc[l] * (1.0 - qc[l]) + qc[l] * (1.0 - pc[l]);
            return pairwise_sum(terms);
        }
        case KernelKind::SquaredDiff: {
            const MeanCov a = moments(std::get<EmpiricalDist>(f));
            const MeanCov b = moments(std::get<EmpiricalDist>(h));
            const double d = a.mean[0] - b.mean[0];
            return d * d + (a.cov(0, 0) + b.cov(0, 0));
        }
        case KernelKind::QuadForm: {
            const MeanCov a = moments(std::get<EmpiricalDist>(f));
            const MeanCov b = moments(std::get<EmpiricalDist>(h));
            return quad(spec, a.mean, b.mean) +
                   (trace_product(spec.form(), a.cov) + trace_product(spec.form(), b.cov));
        }
        case KernelKind::AbsDiff:
            return crps_cross(std::get<EmpiricalDist>(f), std::get<EmpiricalDist>(h));
        case KernelKind::Euclidean: break;
    }
    throw InputError("rule " + std::string(spec.name()) + " has no closed form");
}

double closed_entropy(const KernelSpec& spec, const ForecastDistribution& f) {
    switch (spec.kind()) {
        case KernelKind::LabelMismatch: {
            const auto p = std::get<CategoricalDist>(f).probs();
            std::vector<double> terms(p.size());
            for (std::size_t l = 0; l < p.size(); ++l) terms[l] = p[l] * (1.0 - p[l]);
            return 0.5 * pairwise_sum(terms);
        }
        case KernelKind::OrdinalAbsDiff: {
            const auto pc = std::get<CategoricalDist>(f).cumulative();
            std::vector<double> terms(pc.size());
            for (std::size_t l = 0; l < pc.size(); ++l) terms[l] = pc[l] * (1.0 - pc[l]);
            return pairwise_sum(terms);
        }
        case KernelKind::SquaredDiff: return moments(std::get<EmpiricalDist>(f)).cov(0, 0);
        case KernelKind::QuadForm:
            return trace_product(spec.form(), moments(std::get<EmpiricalDist>(f)).cov);
        case KernelKind::AbsDiff: return crps_entropy(std::get<EmpiricalDist>(f));
        case KernelKind::Euclidean: break;
    }
    throw InputError("rule " + std::string(spec.name()) + " has no closed-form entropy");
}

double closed_score(const KernelSpec& spec, const ForecastDistribution& f, const Outcome& y) {
    switch (spec.kind()) {
        case KernelKind::LabelMismatch: {
            const auto p = std::get<CategoricalDist>(f).probs();
            const std::size_t yi = std::get<Category>(y).index;
            std::vector<double> terms(p.size());
            for (std::size_t l = 0; l < p.size(); ++l) {
                const double d = p[l] - (l == yi ? 1.0 : 0.0);
                terms[l] = d * d;
            }
            return 0.5 * pairwise_sum(terms);
        }
        case KernelKind::OrdinalAbsDiff: {
            const auto pc = std::get<CategoricalDist>(f).cumulative();
            const std::size_t yi = std::get<Category>(y).index;
            std::vector<double> terms(pc.size());
            for (std::size_t l = 0; l < pc.size(); ++l) {
                const double d = pc[l] - (l >= yi ? 1.0 : 0.0);
                terms[l] = d * d;
            }
            return pairwise_sum(terms);
        }
        case KernelKind::SquaredDiff: {
            const double d = std::get<Point>(y)[0] - moments(std::get<EmpiricalDist>(f)).mean[0];
            return d * d;
        }
        case KernelKind::QuadForm:
            return quad(spec, std::get<Point>(y), moments(std::get<EmpiricalDist>(f)).mean);
        case KernelKind::AbsDiff:
            return crps_cdf_integral(std::get<EmpiricalDist>(f), std::get<Point>(y)[0]);
        case KernelKind::Euclidean: break;
    }
    throw InputError("rule " + std::string(spec.name()) + " has no closed-form score");
}

// ---------------------------------------------------------------------------
// Method selection

Method resolve(const KernelSpec& spec, const EvalOptions& options, double pairs) {
    switch (options.method) {
        case Method::Auto:
            if (has_closed_form(spec.kind())) return Method::ClosedForm;
            if (options.allow_monte_carlo && pairs > options.monte_carlo_pair_threshold) {
                return Method::MonteCarlo;
            }
            return Method::ExactPairwise;
        case Method::ClosedForm:
            if (!has_closed_form(spec.kind())) {
                throw InputError("rule " + std::string(spec.name()) + " has no closed form");
            }
            return Method::ClosedForm;
        default: return options.method;
    }
}

double pairs_of(const ForecastDistribution& f, const ForecastDistribution& h) {
    return static_cast<double>(support_size(f)) * static_cast<double>(support_size(h));
}

double cross_with(const KernelSpec& spec, const ForecastDistribution& f,
                  const ForecastDistribution& h, Method method, const EvalOptions& options) {
    switch (method) {
        case Method::ClosedForm: return closed_cross(spec, f, h);
        case Method::MonteCarlo:
            return monte_carlo_expectation(spec, f, h, options.monte_carlo_draws, options.seed).estimate;
        default: return exact_cross(spec, f, h, options.threads);
    }
}

double entropy_with(const KernelSpec& spec, const ForecastDistribution& f, Method method,
                    const EvalOptions& options) {
    if (method == Method::ClosedForm) return closed_entropy(spec, f);
    return 0.5 * cross_with(spec, f, f, method, options);
}

}  // namespace

double cross_expectation(const KernelSpec& spec, const ForecastDistribution& f,
                         const ForecastDistribution& h, const EvalOptions& options) {
    require_same_space(spec, f, h);
    const Method m = resolve(spec, options, pairs_of(f, h));
    const double v = cross_with(spec, f, h, m, options);
    if (m == Method::MonteCarlo) return std::max(v, 0.0);
    return clamp_scaled(v, v, "cross expectation");
}

EntropyValue entropy(const KernelSpec& spec, const ForecastDistribution& f,
                     const EvalOptions& options) {
    spec.require_compatible(space_of(f));
    const Method m = resolve(spec, options, pairs_of(f, f));
    const double v = entropy_with(spec, f, m, options);
    const double out = m == Method::MonteCarlo ? std::max(v, 0.0) : clamp_scaled(v, v, "entropy");
    return {out, spec.kind(), m};
}

ScoreValue score(const KernelSpec& spec, const ForecastDistribution& f, const Outcome& y,
                 const EvalOptions& options) {
    spec.require_compatible(space_of(f));
    require_in_space(space_of(f), y);
    const Method m = resolve(spec, options, pairs_of(f, f));
    if (m == Method::ClosedForm) {
        const double v = closed_score(spec, f, y);
        return {clamp_scaled(v, v, "score"), spec.kind(), m};
    }
    const ForecastDistribution at = point_mass(space_of(f), y);
    const double expected_loss = cross_with(spec, f, at, m, options);
    const double v = expected_loss - entropy_with(spec, f, m, options);
    if (m == Method::MonteCarlo) return {std::max(v, 0.0), spec.kind(), m};
    return {clamp_scaled(v, expected_loss, "score"), spec.kind(), m};
}

DivergenceValue divergence(const KernelSpec& spec, const ForecastDistribution& h,
                           const ForecastDistribution& f, const EvalOptions& options) {
    require_same_space(spec, h, f);
    const Method m = resolve(spec, options, pairs_of(h, f));
    const double cross = cross_with(spec, h, f, m, options);
    const double v = cross - (entropy_with(spec, h, m, options) + entropy_with(spec, f, m, options));
    if (m == Method::MonteCarlo) return {std::max(v, 0.0), spec.kind(), m};
    return {clamp_scaled(v, cross, "divergence"), spec.kind(), m};
}

std::optional<double> closed_form_entropy(const KernelSpec& spec, const ForecastDistribution& f) {
    spec.require_compatible(space_of(f));
    if (!has_closed_form(spec.kind())) return std::nullopt;
    return closed_entropy(spec, f);
}

MonteCarloEstimate monte_carlo_expectation(const KernelSpec& spec, const ForecastDistribution& f,
                                           const ForecastDistribution& h, std::size_t draws,
                                           std::uint64_t seed) {
    require_same_space(spec, f, h);
    if (draws < 2) throw InputError("Monte Carlo needs at least 2 draws");

    auto cumulative = [](const ForecastDistribution& d) {
        std::span<const double> w = std::visit(
            [](const auto& x) -> std::span<const double> {
                if constexpr (std::is_same_v<std::decay_t<decltype(x)>, CategoricalDist>) {
                    return x.probs();
                } else {
                    return x.weights();
                }
            },
            d);
        std::vector<double> c(w.size());
        std::partial_sum(w.begin(), w.end(), c.begin());
        return c;
    };
    const std::vector<double> cf = cumulative(f);
    const std::vector<double> ch = cumulative(h);
    const auto* ef = std::get_if<EmpiricalDist>(&f);
    const auto* eh = std::get_if<EmpiricalDist>(&h);

    // Chan et al. combination of per-chunk (count, mean, M2), in chunk order.
    double n_total = 0.0, mean = 0.0, m2 = 0.0;
    const std::size_t chunks = (draws + kMonteCarloChunk - 1) / kMonteCarloChunk;
    for (std::size_t c = 0; c < chunks; ++c) {
        Rng rng(Rng::sub_seed(seed, c));
        const std::size_t n = std::min(kMonteCarloChunk, draws - c * kMonteCarloChunk);
        double cm = 0.0, cm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t a = rng.categorical(cf);
            const std::size_t b = rng.categorical(ch);
            const double v = ef ? quad(spec, ef->point(a), eh->point(b)) : spec.categories(a, b);
            const double delta = v - cm;
            cm += delta / static_cast<double>(i + 1);
            cm2 += delta * (v - cm);
        }
        const double nc = static_cast<double>(n);
        const double delta = cm - mean;
        const double combined = n_total + nc;
        mean += delta * nc / combined;
        m2 += cm2 + delta * delta * n_total * nc / combined;
        n_total = combined;
    }
    const double variance = m2 / (n_total - 1.0);
    return {mean, std::sqrt(variance / n_total), draws, seed};
}

double crps_cdf_integral(const EmpiricalDist& f, double y) {
    if (f.dim() != 1) throw InputError("CRPS needs a real-line distribution");
    const EmpiricalDist* d[] = {&f};
    const double extra[] = {y};
    const PooledCdfs c = pooled_cdfs(d, extra);
    return integrate_gaps(c, [&](std::size_t k) {
        const double diff = (c.knots[k] >= y ? 1.0 : 0.0) - c.cdf[0][k];
        return diff * diff;
    });
}

double cramer_distance(const EmpiricalDist& f, const EmpiricalDist& h) {
    if (f.dim() != 1 || h.dim() != 1) throw InputError("Cramer distance needs real-line distributions");
    const EmpiricalDist* d[] = {&f, &h};
    const PooledCdfs c = pooled_cdfs(d, {});
    return integrate_gaps(c, [&](std::size_t k) {
        const double diff = c.cdf[0][k] - c.cdf[1][k];
        return diff * diff;
    });
}

}  // namespace kpool
