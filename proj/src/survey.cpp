#include "kpool/survey.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <regex>

#include "kpool/distributions.hpp"
#include "kpool/error.hpp"
#include "kpool/kernels.hpp"
#include "kpool/numeric.hpp"
#include "kpool/pooling.hpp"

namespace kpool {

namespace {
constexpr double kRowTolerance = 1e-9;
}

BinScheme::BinScheme(std::vector<double> cuts, double lower, double upper)
    : cuts_(std::move(cuts)), lower_(lower), upper_(upper) {
    if (cuts_.empty()) throw InputError("bin scheme needs at least one cut point");
    for (double c : cuts_) {
        if (!std::isfinite(c)) throw InputError("bin cut points must be finite");
    }
    for (std::size_t i = 1; i < cuts_.size(); ++i) {
        if (!(cuts_[i] > cuts_[i - 1])) throw InputError("bin cut points must be strictly increasing");
    }
    if (!(lower_ < cuts_.front()) || !(upper_ > cuts_.back())) {
        throw InputError("truncation bounds must lie outside the extreme cut points");
    }
}

BinScheme BinScheme::inflation_default() {
    return BinScheme({-12, -8, -4, -2, 0, 2, 4, 8, 12}, -25, 25);
}

std::size_t BinScheme::category_of(double x) const {
    if (std::isnan(x)) throw InputError("cannot bin a NaN outcome");
    // number of cuts strictly below x
    return static_cast<std::size_t>(std::lower_bound(cuts_.begin(), cuts_.end(), x) - cuts_.begin());
}

std::vector<double> BinScheme::midpoints() const {
    std::vector<double> mid;
    mid.reserve(categories());
    mid.push_back(0.5 * (lower_ + cuts_.front()));
    for (std::size_t i = 1; i < cuts_.size(); ++i) mid.push_back(0.5 * (cuts_[i - 1] + cuts_[i]));
    mid.push_back(0.5 * (cuts_.back() + upper_));
    return mid;
}

double PeriodDecompositionRow::share_rps() const {
    return pool_erps > 0.0 ? disagreement_rps / pool_erps : 0.0;
}

double PeriodDecompositionRow::share_se() const {
    return pool_variance > 0.0 ? disagreement_se / pool_variance : 0.0;
}

void PeriodDecompositionRow::validate() const {
    auto check = [&](double pool, double avg, double d, const char* what) {
        if (!(pool >= 0.0) || !(avg >= 0.0) || !(d >= 0.0)) {
            throw InvariantError(std::string(what) + " decomposition has a negative term in " + period);
        }
        if (std::abs(pool - avg - d) > kRowTolerance * std::max(1.0, pool)) {
            throw InvariantError(std::string(what) + " decomposition does not add up in " + period);
        }
    };
    check(pool_erps, avg_erps, disagreement_rps, "RPS");
    check(pool_variance, avg_variance, disagreement_se, "SE");
    for (double s : {share_rps(), share_se()}) {
        if (s < 0.0 || s > 1.0 + kRowTolerance) throw InvariantError("disagreement share outside [0, 1]");
    }
}

std::vector<double> clean_probabilities(std::span<const double> raw, std::size_t k,
                                        const PanelOptions& opt, std::string& reason) {
    reason.clear();
    if (raw.size() != k) {
        reason = "expected " + std::to_string(k) + " probabilities, got " + std::to_string(raw.size());
        return {};
    }
    for (double p : raw) {
        if (!std::isfinite(p) || p < 0.0) {
            reason = "negative or non-finite probability";
            return {};
        }
    }
    double total = pairwise_sum(raw);
    std::vector<double> probs(raw.begin(), raw.end());
    const bool percent =
        opt.scale == ProbabilityScale::Percent ||
        (opt.scale == ProbabilityScale::Auto && std::abs(total - 100.0) <= 100.0 * opt.sum_tolerance);
    if (percent) {
        for (double& p : probs) p /= 100.0;
        total /= 100.0;
    }
    if (std::abs(total - 1.0) > opt.sum_tolerance) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "probabilities sum to %.12g", total);
        reason = buf;
        return {};
    }
    for (double& p : probs) p /= total;
    return probs;
}

namespace {

struct RetainedPeriod {
    std::string period;
    std::vector<const PanelRecord*> records;
    std::vector<std::vector<double>> probs;
    std::vector<double> weights;
};

std::vector<RetainedPeriod> retain(const std::vector<PanelRecord>& records, std::size_t k,
                                   const PanelOptions& opt, std::vector<DroppedRecord>& dropped) {
    std::map<std::string, RetainedPeriod> by_period;
    for (const PanelRecord& r : records) {
        std::string reason;
        std::vector<double> probs = clean_probabilities(r.probs, k, opt, reason);
        double weight = 1.0;
        if (reason.empty() && opt.weights) {
            const auto it = opt.weights->find({r.period, r.respondent});
            weight = it == opt.weights->end() ? 0.0 : it->second;
            if (!std::isfinite(weight) || weight < 0.0) reason = "negative or non-finite weight";
        }
        if (!reason.empty()) {
            dropped.push_back({r.period, r.respondent, r.source_line, reason});
            continue;
        }
        RetainedPeriod& p = by_period[r.period];
        p.period = r.period;
        p.records.push_back(&r);
        p.probs.push_back(std::move(probs));
        p.weights.push_back(weight);
    }
    std::vector<RetainedPeriod> out;
    for (auto& [label, p] : by_period) {
        const double total = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
        if (!(total > 0.0)) {
            throw InputError("period " + label + " has zero total weight");
        }
        for (double& w : p.weights) w /= total;
        out.push_back(std::move(p));
    }
    return out;
}

PoolSpec ordinal_pool(const RetainedPeriod& p, std::size_t k) {
    std::vector<ForecastDistribution> comps;
    comps.reserve(p.probs.size());
    for (const auto& probs : p.probs) comps.emplace_back(CategoricalDist(OutcomeSpace::ordered(k), probs));
    return {std::move(comps), p.weights};
}

PoolSpec midpoint_pool(const RetainedPeriod& p, const std::vector<Point>& mids) {
    std::vector<ForecastDistribution> comps;
    comps.reserve(p.probs.size());
    for (const auto& probs : p.probs) comps.emplace_back(EmpiricalDist(OutcomeSpace::real_line(), mids, probs));
    return {std::move(comps), p.weights};
}

}  // namespace

PanelResult run_panel(const std::vector<PanelRecord>& records, const BinScheme& scheme,
                      const PanelOptions& options) {
    const std::size_t k = scheme.categories();
    PanelResult result;
    const auto periods = retain(records, k, options, result.dropped);

    std::vector<Point> mids;
    for (double m : scheme.midpoints()) mids.push_back({m});
    const KernelSpec rps = KernelSpec::ordinal_abs_diff();
    const KernelSpec se = KernelSpec::squared_diff();

    for (const RetainedPeriod& p : periods) {
        const Decomposition r = decompose(rps, ordinal_pool(p, k));
        const Decomposition s = decompose(se, midpoint_pool(p, mids));
        r.validate();
        s.validate();
        PeriodDecompositionRow row;
        row.period = p.period;
        row.respondents = p.records.size();
        row.pool_erps = r.pool_entropy;
        row.avg_erps = r.avg_component_entropy;
        row.disagreement_rps = r.disagreement;
        row.pool_variance = s.pool_entropy;
        row.avg_variance = s.avg_component_entropy;
        row.disagreement_se = s.disagreement;
        row.validate();
        result.rows.push_back(std::move(row));
    }
    return result;
}

RealizedResult realized_scores(const std::vector<PanelRecord>& records, const BinScheme& scheme,
                               const std::map<std::string, double>& outcomes, int horizon,
                               const PanelOptions& options) {
    const std::size_t k = scheme.categories();
    RealizedResult result;
    const auto periods = retain(records, k, options, result.dropped);
    const KernelSpec rps = KernelSpec::ordinal_abs_diff();

    for (const RetainedPeriod& p : periods) {
        const std::string target = shift_period(p.period, horizon);
        const auto it = outcomes.find(target);
        if (it == outcomes.end()) {
            result.warnings.push_back("no realized outcome for target period " + target +
                                      " (forecast period " + p.period + ")");
            continue;
        }
        const std::size_t cat = scheme.category_of(it->second);
        const ExPostReport rep = ex_post_identity(rps, ordinal_pool(p, k), Category{cat});

        RealizedRow row;
        row.period = p.period;
        row.target_period = target;
        row.outcome = it->second;
        row.category = cat + 1;
        row.pool_rps = rep.pool_score;
        row.avg_rps = rep.avg_component_score;
        row.disagreement = rep.disagreement;
        row.residual = rep.residual;
        for (std::size_t i = 0; i < p.records.size(); ++i) {
            row.respondents.push_back({p.records[i]->respondent, rep.per_component_score[i]});
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

std::string shift_period(const std::string& period, int offset) {
    if (offset == 0) return period;
    static const std::regex monthly(R"(^(\d{4})-(\d{2})$)");
    static const std::regex quarterly(R"(^(\d{4})(:?Q)([1-4])$)");
    static const std::regex integer(R"(^-?\d+$)");
    std::smatch m;
    auto floor_div = [](long a, long b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); };
    if (std::regex_match(period, m, monthly)) {
        const long month = std::stol(m[2]);
        if (month < 1 || month > 12) throw InputError("bad month in period label " + period);
        const long idx = std::stol(m[1]) * 12 + (month - 1) + offset;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%04ld-%02ld", floor_div(idx, 12), idx - 12 * floor_div(idx, 12) + 1);
        return buf;
    }
    if (std::regex_match(period, m, quarterly)) {
        const long idx = std::stol(m[1]) * 4 + (std::stol(m[3]) - 1) + offset;
        const long year = floor_div(idx, 4);
        return std::to_string(year) + m[2].str() + std::to_string(idx - 4 * year + 1);
    }
    if (std::regex_match(period, integer)) return std::to_string(std::stoll(period) + offset);
    throw InputError("cannot shift period label '" + period +
                     "'; use YYYY-MM, YYYYQn, YYYY:Qn or an integer");
}

const std::vector<std::string>& component_series_names() {
    static const std::vector<std::string> names = {"pool_erps",     "avg_erps",     "disagreement_rps",
                                                   "pool_variance", "avg_variance", "disagreement_se"};
    return names;
}

std::vector<std::vector<std::optional<double>>> component_correlations(
    const std::vector<PeriodDecompositionRow>& rows) {
    if (rows.size() < 3) throw InputError("correlations need at least 3 periods");
    std::vector<std::vector<double>> series(kComponentSeries);
    for (const auto& r : rows) {
        const double v[] = {r.pool_erps,     r.avg_erps,     r.disagreement_rps,
                            r.pool_variance, r.avg_variance, r.disagreement_se};
        for (std::size_t s = 0; s < kComponentSeries; ++s) series[s].push_back(v[s]);
    }
    const double n = static_cast<double>(rows.size());
    std::vector<double> mean(kComponentSeries), ss(kComponentSeries, 0.0);
    std::vector<std::vector<double>> centered(kComponentSeries);
    for (std::size_t s = 0; s < kComponentSeries; ++s) {
        mean[s] = pairwise_sum(series[s]) / n;
        for (double x : series[s]) centered[s].push_back(x - mean[s]);
        for (double c : centered[s]) ss[s] += c * c;
    }
    std::vector<std::vector<std::optional<double>>> out(
        kComponentSeries, std::vector<std::optional<double>>(kComponentSeries));
    for (std::size_t a = 0; a < kComponentSeries; ++a) {
        for (std::size_t b = a; b < kComponentSeries; ++b) {
            // constant series: correlation undefined
            if (!(ss[a] > 0.0) || !(ss[b] > 0.0)) continue;
            if (a == b) {
                out[a][b] = 1.0;
                continue;
            }
            double cross = 0.0;
            for (std::size_t t = 0; t < rows.size(); ++t) cross += centered[a][t] * centered[b][t];
            const double r = std::clamp(cross / std::sqrt(ss[a] * ss[b]), -1.0, 1.0);
            out[a][b] = r;
            out[b][a] = r;
        }
    }
    return out;
}

SyntheticPanel make_synthetic_panel(const BinScheme& scheme, std::size_t periods,
                                    std::size_t respondents, std::uint64_t seed) {
    if (periods == 0 || respondents == 0) throw InputError("synthetic panel needs periods and respondents");
    const std::size_t k = scheme.categories();
    const auto last = static_cast<double>(k - 1);
    Rng rng(seed);
    SyntheticPanel panel;
    double center = 0.6 * last;
    for (std::size_t t = 0; t < periods; ++t) {
        char label[48];
        std::snprintf(label, sizeof label, "%04zu-%02zu", 2015 + t / 12, t % 12 + 1);
        center = std::clamp(center + 0.3 * rng.normal(), 0.0, last);

        const auto spread = static_cast<std::int64_t>(respondents / 4);
        const auto n = static_cast<std::size_t>(
            static_cast<std::int64_t>(respondents) + rng.integer(-spread, spread));
        std::vector<double> pooled(k, 0.0);
        for (std::size_t i = 0; i < std::max<std::size_t>(n, 1); ++i) {
            const double shift = 0.8 * rng.normal();
            const double width = 0.6 + rng.uniform(0.0, 1.5);
            std::vector<double> alpha(k);
            for (std::size_t l = 0; l < k; ++l) {
                const double z = (static_cast<double>(l) - center - shift) / width;
                alpha[l] = 0.05 + 6.0 * std::exp(-0.5 * z * z);
            }
            std::vector<double> probs = rng.dirichlet(alpha);
            for (std::size_t l = 0; l < k; ++l) pooled[l] += probs[l];
            panel.records.push_back({label, "r" + std::to_string(t) + "-" + std::to_string(i),
                                     std::move(probs), 0});
        }
        std::vector<double> cumulative(k);
        std::partial_sum(pooled.begin(), pooled.end(), cumulative.begin());
        const std::size_t cat = rng.categorical(cumulative);
        const double lo = cat == 0 ? scheme.lower() : scheme.cuts()[cat - 1];
        const double hi = cat + 1 == k ? scheme.upper() : scheme.cuts()[cat];
        // strictly inside (lo, hi] so the value maps back to `cat`
        panel.outcomes[label] = hi - (hi - lo) * rng.uniform() * 0.999;
    }
    return panel;
}

}  // namespace kpool
