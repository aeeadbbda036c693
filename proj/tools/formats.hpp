#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "csv.hpp"
#include "kpool/distributions.hpp"
#include "kpool/matrix.hpp"
#include "kpool/survey.hpp"

namespace kpool::cli {

/// Panel CSV, tag "kpool-panel v1":
///   period,respondent,p1,...,pk
/// One row per respondent and period. Probabilities may be fractions or
/// percentages.
struct PanelFile {
    std::string path;
    std::size_t categories = 0;
    std::vector<PanelRecord> records;
};

/// Empirical-sample CSV, tag "kpool-sample v1":
///   forecast_id,weight,x1,...,xd
/// Rows sharing a forecast_id form one forecast. Weights are relative and
/// are normalized within each forecast.
struct SampleForecast {
    std::string id;
    std::size_t line = 0;  ///< first row of the forecast
    std::vector<Point> points;
    std::vector<double> weights;
};

struct SampleFile {
    std::string path;
    std::size_t dim = 0;
    std::vector<SampleForecast> forecasts;  ///< in order of first appearance
};

using InputFile = std::variant<PanelFile, SampleFile>;

/// Reads a panel or sample file, telling them apart by tag or header.
InputFile read_input(const std::string& path);
PanelFile read_panel(const std::string& path);

/// Dense square matrix, tag "kpool-matrix v1": one row per line, no header.
Matrix read_matrix(const std::string& path);

/// Bin cut points, tag "kpool-bins v1": the numbers in file order, one per
/// line or comma separated, no header.
std::vector<double> read_cuts(const std::string& path);

/// Realized outcomes, tag "kpool-outcomes v1": header period,value.
std::map<std::string, double> read_outcomes(const std::string& path);

/// Pool weights, tag "kpool-weights v1": header forecast_id,weight for
/// sample inputs, or period,respondent,weight for panels.
struct WeightFile {
    std::map<std::string, double> by_forecast;
    std::map<std::pair<std::string, std::string>, double> by_respondent;
    bool panel = false;
};
WeightFile read_weights(const std::string& path);

EmpiricalDist to_distribution(const SampleForecast& f, const OutcomeSpace& space);

}  // namespace kpool::cli
