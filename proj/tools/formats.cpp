#include "formats.hpp"

#include <set>

#include "kpool/error.hpp"

namespace kpool::cli {

namespace {

void expect_tag(const CsvDocument& doc, const std::string& kind, const std::string& path) {
    if (!doc.format_tag) return;
    const std::string want = "kpool-" + kind + " v1";
    if (*doc.format_tag != want) {
        throw InputError(path + ": expected format '" + want + "', found '" + *doc.format_tag + "'", 1);
    }
}

const CsvRecord& header_of(const CsvDocument& doc, const std::string& path) {
    if (doc.records.empty()) throw InputError(path + ": file has no header row");
    return doc.records.front();
}

void expect_columns(const CsvRecord& r, std::size_t n, const std::string& path) {
    if (r.fields.size() != n) {
        throw InputError(path + ": expected " + std::to_string(n) + " fields, found " +
                             std::to_string(r.fields.size()),
                         r.line);
    }
}

bool is_panel_header(const CsvRecord& h) {
    return h.fields.size() >= 2 && h.fields[0] == "period" && h.fields[1] == "respondent";
}

bool is_sample_header(const CsvRecord& h) {
    return h.fields.size() >= 2 && h.fields[0] == "forecast_id" && h.fields[1] == "weight";
}

PanelFile panel_from(const CsvDocument& doc, const std::string& path) {
    expect_tag(doc, "panel", path);
    const CsvRecord& h = header_of(doc, path);
    if (!is_panel_header(h) || h.fields.size() < 4) {
        throw InputError(path + ": panel header must be period,respondent,p1,...,pk with k >= 2", h.line);
    }
    PanelFile f;
    f.path = path;
    f.categories = h.fields.size() - 2;
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t r = 1; r < doc.records.size(); ++r) {
        const CsvRecord& rec = doc.records[r];
        expect_columns(rec, h.fields.size(), path);
        PanelRecord p;
        p.period = rec.fields[0];
        p.respondent = rec.fields[1];
        p.source_line = rec.line;
        if (p.period.empty() || p.respondent.empty()) throw InputError(path + ": empty period or respondent", rec.line);
        if (!seen.insert({p.period, p.respondent}).second) {
            throw InputError(path + ": duplicate row for respondent " + p.respondent + " in period " + p.period,
                             rec.line);
        }
        for (std::size_t c = 2; c < rec.fields.size(); ++c) {
            p.probs.push_back(parse_number(rec.fields[c], rec.line, "probability"));
        }
        f.records.push_back(std::move(p));
    }
    if (f.records.empty()) throw InputError(path + ": no data rows");
    return f;
}

SampleFile sample_from(const CsvDocument& doc, const std::string& path) {
    expect_tag(doc, "sample", path);
    const CsvRecord& h = header_of(doc, path);
    if (!is_sample_header(h) || h.fields.size() < 3) {
        throw InputError(path + ": sample header must be forecast_id,weight,x1,...,xd", h.line);
    }
    SampleFile f;
    f.path = path;
    f.dim = h.fields.size() - 2;
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 1; r < doc.records.size(); ++r) {
        const CsvRecord& rec = doc.records[r];
        expect_columns(rec, h.fields.size(), path);
        const std::string& id = rec.fields[0];
        if (id.empty()) throw InputError(path + ": empty forecast_id", rec.line);
        const double w = parse_number(rec.fields[1], rec.line, "weight");
        if (w < 0.0) throw InputError(path + ": negative weight", rec.line);
        Point x;
        for (std::size_t c = 2; c < rec.fields.size(); ++c) x.push_back(parse_number(rec.fields[c], rec.line, "coordinate"));
        auto [it, fresh] = index.try_emplace(id, f.forecasts.size());
        if (fresh) f.forecasts.push_back({id, rec.line, {}, {}});
        SampleForecast& sf = f.forecasts[it->second];
        sf.points.push_back(std::move(x));
        sf.weights.push_back(w);
    }
    if (f.forecasts.empty()) throw InputError(path + ": no data rows");
    for (SampleForecast& sf : f.forecasts) {
        double total = 0.0;
        for (double w : sf.weights) total += w;
        if (!(total > 0.0)) throw InputError(path + ": forecast " + sf.id + " has zero total weight", sf.line);
        for (double& w : sf.weights) w /= total;
    }
    return f;
}

std::vector<double> all_numbers(const CsvDocument& doc, const std::string& path, const std::string& what) {
    std::vector<double> v;
    for (const CsvRecord& r : doc.records)
        for (const std::string& field : r.fields) v.push_back(parse_number(field, r.line, what));
    if (v.empty()) throw InputError(path + ": no values");
    return v;
}

}  // namespace

InputFile read_input(const std::string& path) {
    const CsvDocument doc = read_csv_file(path);
    if (doc.format_tag) {
        if (doc.format_tag->rfind("kpool-panel", 0) == 0) return panel_from(doc, path);
        if (doc.format_tag->rfind("kpool-sample", 0) == 0) return sample_from(doc, path);
    }
    const CsvRecord& h = header_of(doc, path);
    if (is_panel_header(h)) return panel_from(doc, path);
    if (is_sample_header(h)) return sample_from(doc, path);
    throw InputError(path + ": header must start with period,respondent or forecast_id,weight", h.line);
}

PanelFile read_panel(const std::string& path) { return panel_from(read_csv_file(path), path); }

Matrix read_matrix(const std::string& path) {
    const CsvDocument doc = read_csv_file(path);
    expect_tag(doc, "matrix", path);
    if (doc.records.empty()) throw InputError(path + ": empty matrix");
    const std::size_t d = doc.records.size();
    Matrix a(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        const CsvRecord& r = doc.records[i];
        if (r.fields.size() != d) {
            throw InputError(path + ": matrix must be square; row has " + std::to_string(r.fields.size()) +
                                 " entries, expected " + std::to_string(d),
                             r.line);
        }
        for (std::size_t j = 0; j < d; ++j) a(i, j) = parse_number(r.fields[j], r.line, "matrix entry");
    }
    return a;
}

std::vector<double> read_cuts(const std::string& path) {
    const CsvDocument doc = read_csv_file(path);
    expect_tag(doc, "bins", path);
    return all_numbers(doc, path, "cut point");
}

std::map<std::string, double> read_outcomes(const std::string& path) {
    const CsvDocument doc = read_csv_file(path);
    expect_tag(doc, "outcomes", path);
    const CsvRecord& h = header_of(doc, path);
    if (h.fields != std::vector<std::string>{"period", "value"}) {
        throw InputError(path + ": outcomes header must be period,value", h.line);
    }
    std::map<std::string, double> out;
    for (std::size_t r = 1; r < doc.records.size(); ++r) {
        const CsvRecord& rec = doc.records[r];
        expect_columns(rec, 2, path);
        if (!out.emplace(rec.fields[0], parse_number(rec.fields[1], rec.line, "outcome")).second) {
            throw InputError(path + ": duplicate outcome for period " + rec.fields[0], rec.line);
        }
    }
    return out;
}

WeightFile read_weights(const std::string& path) {
    const CsvDocument doc = read_csv_file(path);
    expect_tag(doc, "weights", path);
    const CsvRecord& h = header_of(doc, path);
    WeightFile w;
    if (h.fields == std::vector<std::string>{"period", "respondent", "weight"}) {
        w.panel = true;
    } else if (h.fields != std::vector<std::string>{"forecast_id", "weight"}) {
        throw InputError(path + ": weights header must be forecast_id,weight or period,respondent,weight", h.line);
    }
    for (std::size_t r = 1; r < doc.records.size(); ++r) {
        const CsvRecord& rec = doc.records[r];
        expect_columns(rec, h.fields.size(), path);
        const double v = parse_number(rec.fields.back(), rec.line, "weight");
        if (v < 0.0) throw InputError(path + ": negative weight", rec.line);
        const bool fresh = w.panel ? w.by_respondent.emplace(std::pair{rec.fields[0], rec.fields[1]}, v).second
                                   : w.by_forecast.emplace(rec.fields[0], v).second;
        if (!fresh) throw InputError(path + ": duplicate weight entry", rec.line);
    }
    return w;
}

EmpiricalDist to_distribution(const SampleForecast& f, const OutcomeSpace& space) {
    return EmpiricalDist(space, f.points, f.weights);
}

}  // namespace kpool::cli
