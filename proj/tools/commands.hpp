#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "kpool/kernels.hpp"
#include "kpool/scoring.hpp"
#include "kpool/survey.hpp"
#include "report.hpp"

namespace kpool::cli {

enum class OutputFormat { Csv, Json };

struct RunConfig {
    std::string command;
    std::optional<KernelKind> rule;
    std::string input;
    std::optional<std::string> a_matrix;
    std::string weights = "equal";
    std::optional<std::string> bins;
    std::optional<std::string> outcomes;
    std::optional<std::string> out;
    std::pair<double, double> truncate{-25.0, 25.0};
    std::uint64_t seed = kDefaultSeed;
    OutputFormat format = OutputFormat::Csv;

    // score
    std::optional<std::string> y;
    bool divergences = true;
    // panel
    int horizon = 0;
    std::string report = "decomposition";
    ProbabilityScale scale = ProbabilityScale::Auto;
    double sum_tolerance = 1e-6;
    // check
    std::size_t random = 100;
    std::size_t max_components = 6;
    bool inject_broken_kernel = false;
    // evaluation
    Method method = Method::Auto;
    std::size_t draws = 100000;
    unsigned threads = 1;
};

Report cmd_score(const RunConfig& config);
Report cmd_decompose(const RunConfig& config);
Report cmd_panel(const RunConfig& config);

struct CheckResult {
    Report report;
    bool passed = true;
};
CheckResult cmd_check(const RunConfig& config);

}  // namespace kpool::cli
