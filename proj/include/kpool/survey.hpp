#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kpool/matrix.hpp"

namespace kpool {

/// One respondent's bin probabilities in one period.
struct PanelRecord {
    std::string period;
    std::string respondent;
    std::vector<double> probs;
    std::size_t source_line = 0;  ///< 0 when not read from a file
};

/// Ordered bins: (-inf, c_1], (c_1, c_2], ..., (c_{k-1}, inf). The open
/// outer bins are truncated at [lower, upper] for midpoint purposes.
class BinScheme {
public:
    BinScheme(std::vector<double> cuts, double lower, double upper);

    /// Ten inflation bins with cuts -12, -8, -4, -2, 0, 2, 4, 8, 12,
    /// truncated at -25 and 25.
    static BinScheme inflation_default();

    [[nodiscard]] std::size_t categories() const noexcept { return cuts_.size() + 1; }
    [[nodiscard]] const std::vector<double>& cuts() const noexcept { return cuts_; }
    [[nodiscard]] double lower() const noexcept { return lower_; }
    [[nodiscard]] double upper() const noexcept { return upper_; }

    /// 0-based bin of x under left-open, right-closed intervals; a value
    /// equal to a cut lands in the lower bin.
    [[nodiscard]] std::size_t category_of(double x) const;
    [[nodiscard]] std::vector<double> midpoints() const;

private:
    std::vector<double> cuts_;
    double lower_;
    double upper_;
};

enum class ProbabilityScale { Auto, Fraction, Percent };

struct PanelOptions {
    /// Accepted deviation of a row sum from one, after percent conversion.
    double sum_tolerance = 1e-6;
    ProbabilityScale scale = ProbabilityScale::Auto;
    /// Optional (period, respondent) -> weight. Missing entries count as
    /// zero; weights are renormalized over retained respondents per period.
    std::optional<std::map<std::pair<std::string, std::string>, double>> weights;
};

/// Validates one row of bin probabilities: length k, finite, nonnegative,
/// summing to one (or to 100 under the percent scale) within tolerance.
/// Returns the row rescaled to sum to one, or an empty vector with
/// `reason` set.
std::vector<double> clean_probabilities(std::span<const double> raw, std::size_t k,
                                        const PanelOptions& options, std::string& reason);

struct DroppedRecord {
    std::string period;
    std::string respondent;
    std::size_t source_line;
    std::string reason;
};

struct PeriodDecompositionRow {
    std::string period;
    std::size_t respondents = 0;
    double pool_erps = 0.0;
    double avg_erps = 0.0;
    double disagreement_rps = 0.0;
    double pool_variance = 0.0;
    double avg_variance = 0.0;
    double disagreement_se = 0.0;

    [[nodiscard]] double share_rps() const;
    [[nodiscard]] double share_se() const;
    void validate() const;
};

struct PanelResult {
    std::vector<PeriodDecompositionRow> rows;  ///< sorted by period
    std::vector<DroppedRecord> dropped;
};

/// Per period: pool the retained respondents, decompose the pool's ERPS
/// (ordinal kernel on bins) and its variance (squared error on bin
/// midpoints). Invalid records are dropped and reported, not fatal.
PanelResult run_panel(const std::vector<PanelRecord>& records, const BinScheme& scheme,
                      const PanelOptions& options = {});

struct RespondentScore {
    std::string respondent;
    double rps;
};

struct RealizedRow {
    std::string period;
    std::string target_period;
    double outcome = 0.0;
    std::size_t category = 0;  ///< 1-based
    double pool_rps = 0.0;
    double avg_rps = 0.0;
    double disagreement = 0.0;
    double residual = 0.0;  ///< avg_rps - disagreement - pool_rps
    std::vector<RespondentScore> respondents;
};

struct RealizedResult {
    std::vector<RealizedRow> rows;
    std::vector<DroppedRecord> dropped;
    std::vector<std::string> warnings;  ///< periods without a realized outcome
};

/// Scores each period's respondents and their pool against the outcome
/// realized `horizon` periods later. `outcomes` is keyed by target period.
RealizedResult realized_scores(const std::vector<PanelRecord>& records, const BinScheme& scheme,
                               const std::map<std::string, double>& outcomes, int horizon,
                               const PanelOptions& options = {});

/// Moves a period label by `offset` periods. Understands YYYY-MM (months),
/// YYYYQn or YYYY:Qn (quarters) and plain integers.
std::string shift_period(const std::string& period, int offset);

inline constexpr std::size_t kComponentSeries = 6;
/// Series order used by component_correlations.
const std::vector<std::string>& component_series_names();

/// Pearson correlations among pool ERPS, average ERPS, RPS disagreement,
/// pool variance, average variance and SE disagreement over periods.
/// Entries involving a constant series are empty.
std::vector<std::vector<std::optional<double>>> component_correlations(
    const std::vector<PeriodDecompositionRow>& rows);

/// Deterministic synthetic panel: each period has a center drifting as a
/// random walk over the bins; every respondent draws a Dirichlet vector
/// concentrated around a respondent-specific shift of that center. A
/// realized value per period is drawn from the pooled distribution.
struct SyntheticPanel {
    std::vector<PanelRecord> records;
    std::map<std::string, double> outcomes;  ///< keyed by period
};
SyntheticPanel make_synthetic_panel(const BinScheme& scheme, std::size_t periods,
                                    std::size_t respondents, std::uint64_t seed);

}  // namespace kpool
