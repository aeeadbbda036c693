#include "commands.hpp"

#include <cmath>
#include <map>
#include <variant>

#include "formats.hpp"
#include "kpool/error.hpp"
#include "kpool/pooling.hpp"
#include "kpool/scoring.hpp"

namespace kpool::cli {

namespace {

struct Forecast {
    std::string period;  ///< empty for sample inputs
    std::string id;
    ForecastDistribution dist;
    std::size_t line;
};

struct Loaded {
    KernelSpec spec;
    OutcomeSpace space;
    bool panel = false;
    std::vector<Forecast> forecasts;
};

std::string method_name(Method m) {
    switch (m) {
        case Method::Auto: return "auto";
        case Method::ExactPairwise: return "exact";
        case Method::ClosedForm: return "closed";
        case Method::MonteCarlo: return "mc";
    }
    return "auto";
}

EvalOptions eval_of(const RunConfig& cfg) {
    EvalOptions o;
    o.method = cfg.method;
    o.monte_carlo_draws = cfg.draws;
    o.seed = cfg.seed;
    o.threads = cfg.threads;
    return o;
}

KernelKind require_rule(const RunConfig& cfg) {
    if (!cfg.rule) throw InputError("--rule is required for " + cfg.command);
    return *cfg.rule;
}

BinScheme scheme_of(const RunConfig& cfg, std::size_t k) {
    std::vector<double> cuts = cfg.bins ? read_cuts(*cfg.bins) : BinScheme::inflation_default().cuts();
    BinScheme s(std::move(cuts), cfg.truncate.first, cfg.truncate.second);
    if (s.categories() != k) {
        throw InputError("bin scheme has " + std::to_string(s.categories()) + " bins but the panel has " +
                         std::to_string(k) + " probability columns; pass --bins");
    }
    return s;
}

PanelOptions panel_options(const RunConfig& cfg) {
    PanelOptions o;
    o.scale = cfg.scale;
    o.sum_tolerance = cfg.sum_tolerance;
    return o;
}

KernelSpec spec_for_samples(const RunConfig& cfg, KernelKind rule, std::size_t dim) {
    if (rule == KernelKind::QuadForm) {
        Matrix a = cfg.a_matrix ? read_matrix(*cfg.a_matrix) : Matrix::identity(dim);
        if (a.rows() != dim) {
            throw InputError("A matrix is " + std::to_string(a.rows()) + "x" + std::to_string(a.rows()) +
                             " but samples have dimension " + std::to_string(dim));
        }
        return KernelSpec::quad_form(std::move(a));
    }
    return KernelSpec::of_kind(rule);
}

Loaded load(const RunConfig& cfg) {
    const KernelKind rule = require_rule(cfg);
    if (cfg.a_matrix && rule != KernelKind::QuadForm) throw InputError("--a-matrix only applies to --rule mse");
    const InputFile in = read_input(cfg.input);

    if (const auto* s = std::get_if<SampleFile>(&in)) {
        if (rule == KernelKind::LabelMismatch || rule == KernelKind::OrdinalAbsDiff) {
            throw InputError("--rule " + std::string(rule_name(rule)) + " needs panel (probability) input");
        }
        const bool line = rule == KernelKind::SquaredDiff || rule == KernelKind::AbsDiff;
        if (line && s->dim != 1) {
            throw InputError("--rule " + std::string(rule_name(rule)) + " needs one coordinate per sample, found " +
                             std::to_string(s->dim));
        }
        Loaded l{spec_for_samples(cfg, rule, s->dim),
                 line ? OutcomeSpace::real_line() : OutcomeSpace::real_vector(s->dim), false, {}};
        for (const SampleForecast& f : s->forecasts) {
            try {
                l.forecasts.push_back({"", f.id, to_distribution(f, l.space), f.line});
            } catch (const InputError& e) {
                throw InputError(s->path + ": forecast " + f.id + ": " + e.what(), f.line);
            }
        }
        return l;
    }

    const auto& p = std::get<PanelFile>(in);
    const std::size_t k = p.categories;
    std::optional<BinScheme> scheme;
    OutcomeSpace space = OutcomeSpace::ordered(k);
    switch (rule) {
        case KernelKind::LabelMismatch: space = OutcomeSpace::unordered(k); break;
        case KernelKind::OrdinalAbsDiff: break;
        case KernelKind::SquaredDiff:
        case KernelKind::AbsDiff:
            // bin midpoints stand in for the binned values
            scheme = scheme_of(cfg, k);
            space = OutcomeSpace::real_line();
            break;
        default:
            throw InputError("--rule " + std::string(rule_name(rule)) + " needs sample input with vector coordinates");
    }
    Loaded l{KernelSpec::of_kind(rule), space, true, {}};
    std::vector<Point> mids;
    if (scheme)
        for (double m : scheme->midpoints()) mids.push_back({m});
    const PanelOptions opts = panel_options(cfg);
    for (const PanelRecord& r : p.records) {
        std::string reason;
        std::vector<double> probs = clean_probabilities(r.probs, k, opts, reason);
        if (!reason.empty()) {
            throw InputError(p.path + ": respondent " + r.respondent + " in period " + r.period + ": " + reason,
                             r.source_line);
        }
        ForecastDistribution d = scheme ? ForecastDistribution(EmpiricalDist(l.space, mids, probs))
                                        : ForecastDistribution(CategoricalDist(l.space, probs));
        l.forecasts.push_back({r.period, r.respondent, std::move(d), r.source_line});
    }
    return l;
}

Outcome parse_outcome(const RunConfig& cfg, const Loaded& l) {
    if (!cfg.y) throw InputError("score needs --y");
    const std::string& text = *cfg.y;
    if (l.space.is_categorical()) {
        const double v = parse_number(text, 0, "--y category");
        const auto k = static_cast<double>(l.space.categories());
        if (v != std::floor(v) || v < 1.0 || v > k) {
            throw InputError("--y must be a category number between 1 and " + std::to_string(l.space.categories()));
        }
        return Category{static_cast<std::size_t>(v) - 1};
    }
    Point y;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        y.push_back(parse_number(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start), 0,
                                 "--y coordinate"));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (y.size() != l.space.dim()) {
        throw InputError("--y has " + std::to_string(y.size()) + " coordinates, forecasts have " +
                         std::to_string(l.space.dim()));
    }
    return y;
}

void require_valid(double v, const std::string& what) {
    if (!std::isfinite(v) || v < 0.0) throw InvariantError(what + " is negative or not finite");
}

nlohmann::ordered_json base_meta(const RunConfig& cfg) {
    nlohmann::ordered_json m;
    m["command"] = cfg.command;
    if (cfg.rule) m["rule"] = std::string(rule_name(*cfg.rule));
    m["method"] = method_name(cfg.method);
    m["seed"] = cfg.seed;
    return m;
}

/// Groups of forecast indices: one per period for panels, one overall for
/// samples. Ordered by period label.
std::map<std::string, std::vector<std::size_t>> groups_of(const Loaded& l) {
    std::map<std::string, std::vector<std::size_t>> g;
    for (std::size_t i = 0; i < l.forecasts.size(); ++i) g[l.forecasts[i].period].push_back(i);
    return g;
}

}  // namespace

Report cmd_score(const RunConfig& cfg) {
    const Loaded l = load(cfg);
    const Outcome y = parse_outcome(cfg, l);
    const EvalOptions opts = eval_of(cfg);
    Report rep;
    rep.meta = base_meta(cfg);

    Table scores{"scores", {}, {}, false};
    if (l.panel) scores.columns = {"period", "respondent", "score", "entropy"};
    else scores.columns = {"forecast", "score", "entropy"};
    for (const Forecast& f : l.forecasts) {
        const double s = score(l.spec, f.dist, y, opts).value;
        const double h = entropy(l.spec, f.dist, opts).value;
        require_valid(s, "score of " + f.id);
        require_valid(h, "entropy of " + f.id);
        if (l.panel) scores.add({f.period, f.id, s, h});
        else scores.add({f.id, s, h});
    }
    rep.tables.push_back(std::move(scores));

    if (cfg.divergences) {
        Table div{"divergences", {}, {}, false};
        if (l.panel) div.columns = {"period", "respondent_a", "respondent_b", "divergence"};
        else div.columns = {"forecast_a", "forecast_b", "divergence"};
        for (const auto& [period, idx] : groups_of(l)) {
            for (std::size_t a = 0; a < idx.size(); ++a) {
                for (std::size_t b = a + 1; b < idx.size(); ++b) {
                    const Forecast& fa = l.forecasts[idx[a]];
                    const Forecast& fb = l.forecasts[idx[b]];
                    const double d = divergence(l.spec, fa.dist, fb.dist, opts).value;
                    require_valid(d, "divergence between " + fa.id + " and " + fb.id);
                    if (l.panel) div.add({period, fa.id, fb.id, d});
                    else div.add({fa.id, fb.id, d});
                }
            }
        }
        rep.tables.push_back(std::move(div));
    }
    return rep;
}

Report cmd_decompose(const RunConfig& cfg) {
    const Loaded l = load(cfg);
    const EvalOptions opts = eval_of(cfg);
    std::optional<WeightFile> wf;
    if (cfg.weights != "equal") {
        wf = read_weights(cfg.weights);
        if (wf->panel != l.panel) {
            throw InputError(cfg.weights + ": weight file layout does not match the input (" +
                             std::string(l.panel ? "period,respondent,weight" : "forecast_id,weight") +
                             " expected)");
        }
    }

    Report rep;
    rep.meta = base_meta(cfg);
    Table main{"decomposition", {}, {}, false};
    Table comps{"components", {}, {}, true};
    if (l.panel) {
        main.columns = {"period", "pool_entropy", "avg_entropy", "disagreement", "disagreement_share"};
        comps.columns = {"period", "respondent", "weight", "entropy", "divergence"};
    } else {
        main.columns = {"pool_entropy", "avg_entropy", "disagreement", "disagreement_share"};
        comps.columns = {"forecast", "weight", "entropy", "divergence"};
    }

    for (const auto& [period, idx] : groups_of(l)) {
        std::vector<ForecastDistribution> dists;
        std::vector<double> w;
        for (std::size_t i : idx) {
            const Forecast& f = l.forecasts[i];
            dists.push_back(f.dist);
            if (!wf) {
                w.push_back(1.0);
            } else if (l.panel) {
                const auto it = wf->by_respondent.find({f.period, f.id});
                w.push_back(it == wf->by_respondent.end() ? 0.0 : it->second);
            } else {
                const auto it = wf->by_forecast.find(f.id);
                w.push_back(it == wf->by_forecast.end() ? 0.0 : it->second);
            }
        }
        double total = 0.0;
        for (double v : w) total += v;
        if (!(total > 0.0)) {
            throw InputError(l.panel ? "period " + period + " has zero total weight" : "pool has zero total weight");
        }
        for (double& v : w) v /= total;

        const Decomposition d = decompose(l.spec, PoolSpec(std::move(dists), w), opts);
        d.validate();
        if (l.panel) main.add({period, d.pool_entropy, d.avg_component_entropy, d.disagreement, d.disagreement_share()});
        else main.add({d.pool_entropy, d.avg_component_entropy, d.disagreement, d.disagreement_share()});
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const Forecast& f = l.forecasts[idx[j]];
            const double h = entropy(l.spec, f.dist, opts).value;
            if (l.panel) comps.add({period, f.id, w[j], h, d.per_component_divergence[j]});
            else comps.add({f.id, w[j], h, d.per_component_divergence[j]});
        }
    }
    rep.tables.push_back(std::move(main));
    rep.tables.push_back(std::move(comps));
    return rep;
}

Report cmd_panel(const RunConfig& cfg) {
    if (cfg.rule) throw InputError("panel always reports RPS and SE; drop --rule");
    const PanelFile p = read_panel(cfg.input);
    const BinScheme scheme = scheme_of(cfg, p.categories);
    PanelOptions opts = panel_options(cfg);
    if (cfg.weights != "equal") {
        WeightFile wf = read_weights(cfg.weights);
        if (!wf.panel) throw InputError(cfg.weights + ": panel weights need header period,respondent,weight");
        opts.weights = std::move(wf.by_respondent);
    }

    Report rep;
    rep.meta["command"] = "panel";
    rep.meta["report"] = cfg.report;
    auto warn_dropped = [&](const std::vector<DroppedRecord>& dropped) {
        for (const DroppedRecord& d : dropped) {
            nlohmann::ordered_json w;
            w["warning"] = "dropped record";
            w["file"] = p.path;
            w["line"] = d.source_line;
            w["period"] = d.period;
            w["respondent"] = d.respondent;
            w["reason"] = d.reason;
            rep.warnings.push_back(std::move(w));
        }
    };

    if (cfg.report == "decomposition" || cfg.report == "correlations") {
        const PanelResult res = run_panel(p.records, scheme, opts);
        warn_dropped(res.dropped);
        rep.meta["dropped"] = res.dropped.size();
        if (cfg.report == "decomposition") {
            Table t{"periods",
                    {"period", "respondents", "pool_erps", "avg_erps", "disagreement_rps", "share_rps", "pool_variance",
                     "avg_variance", "disagreement_se", "share_se"},
                    {},
                    false};
            for (const PeriodDecompositionRow& r : res.rows) {
                r.validate();
                t.add({r.period, static_cast<std::int64_t>(r.respondents), r.pool_erps, r.avg_erps,
                       r.disagreement_rps, r.share_rps(), r.pool_variance, r.avg_variance, r.disagreement_se,
                       r.share_se()});
            }
            rep.tables.push_back(std::move(t));
        } else {
            const auto corr = component_correlations(res.rows);
            const auto& names = component_series_names();
            Table t{"correlations", {"series"}, {}, false};
            for (const auto& n : names) t.columns.push_back(n);
            for (std::size_t a = 0; a < names.size(); ++a) {
                std::vector<Cell> row{names[a]};
                for (std::size_t b = 0; b < names.size(); ++b) {
                    if (corr[a][b]) {
                        if (!(std::abs(*corr[a][b]) <= 1.0)) throw InvariantError("correlation outside [-1, 1]");
                        row.emplace_back(*corr[a][b]);
                    } else {
                        row.emplace_back(std::monostate{});
                    }
                }
                t.add(std::move(row));
            }
            rep.tables.push_back(std::move(t));
        }
        return rep;
    }

    if (cfg.report != "realized" && cfg.report != "respondents") {
        throw InputError("--report must be decomposition, realized, respondents or correlations");
    }
    if (!cfg.outcomes) throw InputError("--report " + cfg.report + " needs --outcomes");
    const RealizedResult res = realized_scores(p.records, scheme, read_outcomes(*cfg.outcomes), cfg.horizon, opts);
    warn_dropped(res.dropped);
    for (const std::string& w : res.warnings) {
        nlohmann::ordered_json j;
        j["warning"] = w;
        rep.warnings.push_back(std::move(j));
    }
    rep.meta["horizon"] = cfg.horizon;
    rep.meta["dropped"] = res.dropped.size();
    if (cfg.report == "realized") {
        Table t{"realized",
                {"period", "target_period", "outcome", "category", "pool_rps", "avg_rps", "disagreement", "residual",
                 "respondents"},
                {},
                false};
        for (const RealizedRow& r : res.rows) {
            if (std::abs(r.residual) > 1e-9 * std::max(1.0, std::abs(r.avg_rps))) {
                throw InvariantError("realized score identity fails in period " + r.period);
            }
            t.add({r.period, r.target_period, r.outcome, static_cast<std::int64_t>(r.category), r.pool_rps, r.avg_rps,
                   r.disagreement, r.residual, static_cast<std::int64_t>(r.respondents.size())});
        }
        rep.tables.push_back(std::move(t));
    } else {
        Table t{"respondents", {"period", "target_period", "respondent", "rps", "pool_rps"}, {}, false};
        for (const RealizedRow& r : res.rows)
            for (const RespondentScore& s : r.respondents) {
                require_valid(s.rps, "RPS of " + s.respondent);
                t.add({r.period, r.target_period, s.respondent, s.rps, r.pool_rps});
            }
        rep.tables.push_back(std::move(t));
    }
    return rep;
}

}  // namespace kpool::cli
