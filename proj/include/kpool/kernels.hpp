#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kpool/distributions.hpp"
#include "kpool/matrix.hpp"

namespace kpool {

/// The six negative-definite kernels, one per scoring rule.
enum class KernelKind {
    SquaredDiff,     ///< (y - x)^2 on the real line: squared error
    QuadForm,        ///< (y - x)^T A (y - x) on R^d: multivariate squared error
    AbsDiff,         ///< |y - x| on the real line: CRPS
    Euclidean,       ///< ||y - x|| on R^d: energy score
    LabelMismatch,   ///< 1(y != x) on unordered categories: Brier score
    OrdinalAbsDiff,  ///< |rank(y) - rank(x)| on ordered categories: RPS
};

/// Short rule name used on the command line: se, mse, crps, es, brier, rps.
std::string_view rule_name(KernelKind kind);
std::optional<KernelKind> parse_rule(std::string_view name);

class KernelSpec {
public:
    static KernelSpec squared_diff() { return KernelSpec(KernelKind::SquaredDiff); }
    static KernelSpec abs_diff() { return KernelSpec(KernelKind::AbsDiff); }
    static KernelSpec euclidean() { return KernelSpec(KernelKind::Euclidean); }
    static KernelSpec label_mismatch() { return KernelSpec(KernelKind::LabelMismatch); }
    static KernelSpec ordinal_abs_diff() { return KernelSpec(KernelKind::OrdinalAbsDiff); }
    /// Requires a symmetric (to 1e-10) positive-definite matrix; positive
    /// semi-definite but singular matrices are rejected.
    static KernelSpec quad_form(Matrix a);

    /// Any kind but QuadForm; use quad_form() for that one.
    static KernelSpec of_kind(KernelKind kind);

    [[nodiscard]] KernelKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::string_view name() const { return rule_name(kind_); }
    /// Matrix of the quadratic form; empty for other kinds.
    [[nodiscard]] const Matrix& form() const noexcept { return form_; }
    /// Lower Cholesky factor G of the form, G G^T = A.
    [[nodiscard]] const Matrix& form_factor() const noexcept { return factor_; }

    [[nodiscard]] bool compatible(const OutcomeSpace& space) const;
    /// Throws InputError naming both sides when incompatible.
    void require_compatible(const OutcomeSpace& space) const;

    /// L(x, y) on coordinates. Real kinds only.
    [[nodiscard]] double points(std::span<const double> x, std::span<const double> y) const;
    /// L(i, j) on 0-based category indices. Categorical kinds only.
    [[nodiscard]] double categories(std::size_t i, std::size_t j) const;

private:
    explicit KernelSpec(KernelKind kind) : kind_(kind) {}

    KernelKind kind_;
    Matrix form_;
    Matrix factor_;
};

/// L(x, y) after checking both outcomes against the kernel's space kind.
double kernel_eval(const KernelSpec& spec, const Outcome& x, const Outcome& y);

/// M[j][l] = L(outcomes[j], outcomes[l]); symmetric with zero diagonal.
Matrix kernel_matrix(const KernelSpec& spec, std::span<const Outcome> outcomes);

/// Kernel matrix over all categories of a k-category space.
Matrix category_kernel_matrix(const KernelSpec& spec, std::size_t k);

struct NegativeDefinitenessReport {
    double max_quadratic_form = 0.0;  ///< largest c^T L c seen
    std::vector<double> worst_coefficients;
    std::size_t trials = 0;
    bool passed = true;
};

/// Random falsification test of conditional negative definiteness: draws
/// `trials` standard-normal vectors, centers them to sum zero, and records
/// the largest c^T L c. Passes iff that maximum is at most 1e-10.
NegativeDefinitenessReport check_negative_definite(const Matrix& kernel, std::size_t trials,
                                                   std::uint64_t seed);
NegativeDefinitenessReport check_negative_definite(const KernelSpec& spec,
                                                   std::span<const Outcome> outcomes,
                                                   std::size_t trials, std::uint64_t seed);

/// Exact slow path: largest eigenvalue of P L P with P = I - 11^T/n. The
/// kernel is conditionally negative definite iff this is <= 0 (up to noise).
double max_centered_eigenvalue(const Matrix& kernel);

/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
std::vector<double> symmetric_eigenvalues(Matrix a);

/// L(x, y) = (x - y)^4 on real points. Symmetric, nonnegative, zero on the
/// diagonal, but not conditionally negative definite; used to show the
/// checks above reject an invalid kernel.
Matrix quartic_kernel_matrix(std::span<const double> points);

}  // namespace kpool
