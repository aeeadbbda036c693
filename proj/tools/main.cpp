// kpool: kernel-score evaluation, pooling decompositions and survey panels.
//
// Exit codes: 0 success, 2 input error, 3 invariant violation. Errors are
// written to stderr as one JSON object per line.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "csv.hpp"
#include "json.hpp"
#include "kpool/error.hpp"

namespace {

using kpool::cli::RunConfig;

constexpr int kExitInput = 2;
constexpr int kExitInvariant = 3;

int emit_error(const std::string& kind, const std::string& message, std::size_t line, int code) {
    nlohmann::ordered_json e;
    e["error"] = kind;
    e["message"] = message;
    if (line > 0) e["line"] = line;
    e["exit_code"] = code;
    std::cerr << e.dump() << '\n';
    return code;
}

std::pair<double, double> parse_truncate(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw kpool::InputError("--truncate expects LO,HI");
    const double lo = kpool::cli::parse_number(text.substr(0, comma), 0, "--truncate bound");
    const double hi = kpool::cli::parse_number(text.substr(comma + 1), 0, "--truncate bound");
    if (!(lo < hi)) throw kpool::InputError("--truncate needs LO < HI");
    return {lo, hi};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel scores for linear pools: entropy, disagreement and realized scores"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "kpool 1.0");

    RunConfig cfg;
    std::string rule, format = "csv", truncate = "-25,25", method = "auto", scale = "auto";

    auto common = [&](CLI::App* sub) {
        sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--out", cfg.out, "Output file (default stdout)");
        sub->add_option("--seed", cfg.seed, "Seed for random fixtures and Monte Carlo")
            ->default_val(kpool::kDefaultSeed);
    };
    auto inputs = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input, "Panel or sample CSV")->required();
        sub->add_option("--bins", cfg.bins, "Bin cut points (default: ten inflation bins)");
        sub->add_option("--truncate", truncate, "Outer bin bounds LO,HI")->default_val("-25,25");
        sub->add_option("--scale", scale, "Probability scale")->check(CLI::IsMember({"auto", "fraction", "percent"}));
        sub->add_option("--sum-tolerance", cfg.sum_tolerance, "Accepted deviation of a row sum from one");
    };
    auto evaluation = [&](CLI::App* sub) {
        sub->add_option("--rule", rule, "Scoring rule")
            ->required()
            ->check(CLI::IsMember({"se", "mse", "crps", "es", "brier", "rps"}));
        sub->add_option("--a-matrix", cfg.a_matrix, "Matrix A for mse (default identity)");
        sub->add_option("--method", method, "Evaluation method")
            ->check(CLI::IsMember({"auto", "exact", "closed", "mc"}));
        sub->add_option("--draws", cfg.draws, "Monte Carlo draws")->check(CLI::Range(2, 1 << 30));
        sub->add_option("--threads", cfg.threads, "Threads for exact double sums")->check(CLI::Range(1, 256));
    };

    CLI::App* score = app.add_subcommand("score", "Score forecasts at an outcome; entropies and divergences");
    common(score);
    inputs(score);
    evaluation(score);
    score->add_option("--y", cfg.y, "Outcome: category number (1-based) or comma-separated coordinates")
        ->required()
        ->allow_extra_args(false);
    score->add_flag("!--no-divergences", cfg.divergences, "Skip pairwise divergences");

    CLI::App* decompose = app.add_subcommand("decompose", "Pool entropy = average entropy + disagreement");
    common(decompose);
    inputs(decompose);
    evaluation(decompose);
    decompose->add_option("--weights", cfg.weights, "Weight file or 'equal'");

    CLI::App* panel = app.add_subcommand("panel", "Per-period RPS and SE decompositions of a survey panel");
    common(panel);
    inputs(panel);
    panel->add_option("--weights", cfg.weights, "Weight file (period,respondent,weight) or 'equal'");
    panel->add_option("--outcomes", cfg.outcomes, "Realized outcomes (period,value)");
    panel->add_option("--horizon", cfg.horizon, "Periods between forecast and outcome");
    panel->add_option("--report", cfg.report, "Table to emit")
        ->check(CLI::IsMember({"decomposition", "realized", "respondents", "correlations"}));

    CLI::App* check = app.add_subcommand("check", "Verify the pooling identities on seeded random instances");
    common(check);
    check->add_option("--rule", rule, "Restrict to one rule (default: all)")
        ->check(CLI::IsMember({"se", "mse", "crps", "es", "brier", "rps"}));
    check->add_option("--random", cfg.random, "Random instances per rule")->check(CLI::Range(1, 10000000));
    check->add_option("--max-components", cfg.max_components, "Largest pool size")->check(CLI::Range(1, 1000));
    check->add_flag("--inject-broken-kernel", cfg.inject_broken_kernel,
                    "Add a kernel that is not negative definite; its checks must fail");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return emit_error("usage", e.what(), 0, kExitInput);
    }

    try {
        cfg.command = app.get_subcommands().front()->get_name();
        if (!rule.empty()) cfg.rule = kpool::parse_rule(rule);
        cfg.format = format == "json" ? kpool::cli::OutputFormat::Json : kpool::cli::OutputFormat::Csv;
        cfg.truncate = parse_truncate(truncate);
        cfg.scale = scale == "fraction"  ? kpool::ProbabilityScale::Fraction
                    : scale == "percent" ? kpool::ProbabilityScale::Percent
                                         : kpool::ProbabilityScale::Auto;
        cfg.method = method == "exact"    ? kpool::Method::ExactPairwise
                     : method == "closed" ? kpool::Method::ClosedForm
                     : method == "mc"     ? kpool::Method::MonteCarlo
                                          : kpool::Method::Auto;

        kpool::cli::Report report;
        bool passed = true;
        if (cfg.command == "score") report = kpool::cli::cmd_score(cfg);
        else if (cfg.command == "decompose") report = kpool::cli::cmd_decompose(cfg);
        else if (cfg.command == "panel") report = kpool::cli::cmd_panel(cfg);
        else {
            auto res = kpool::cli::cmd_check(cfg);
            report = std::move(res.report);
            passed = res.passed;
        }

        for (const auto& w : report.warnings) std::cerr << w.dump() << '\n';
        const std::string text = cfg.format == kpool::cli::OutputFormat::Json ? kpool::cli::render_json(report)
                                                                              : kpool::cli::render_csv(report);
        kpool::cli::write_output(text, cfg.out);
        if (!passed) return emit_error("invariant", "one or more properties failed", 0, kExitInvariant);
        return 0;
    } catch (const kpool::InputError& e) {
        return emit_error("input", e.what(), e.line(), kExitInput);
    } catch (const kpool::InvariantError& e) {
        return emit_error("invariant", e.what(), 0, kExitInvariant);
    } catch (const std::exception& e) {
        return emit_error("internal", e.what(), 0, kExitInvariant);
    }
}
