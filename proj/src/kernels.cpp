#include "kpool/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kpool/error.hpp"
#include "kpool/numeric.hpp"

namespace kpool {

namespace {
constexpr double kSymmetryTolerance = 1e-10;
constexpr double kPivotTolerance = 1e-12;
constexpr double kNegativeDefiniteSlack = 1e-10;
}  // namespace

std::string_view rule_name(KernelKind kind) {
    switch (kind) {
        case KernelKind::SquaredDiff: return "se";
        case KernelKind::QuadForm: return "mse";
        case KernelKind::AbsDiff: return "crps";
        case KernelKind::Euclidean: return "es";
        case KernelKind::LabelMismatch: return "brier";
        case KernelKind::OrdinalAbsDiff: return "rps";
    }
    return "?";
}

std::optional<KernelKind> parse_rule(std::string_view name) {
    for (KernelKind k : {KernelKind::SquaredDiff, KernelKind::QuadForm, KernelKind::AbsDiff,
                         KernelKind::Euclidean, KernelKind::LabelMismatch,
                         KernelKind::OrdinalAbsDiff}) {
        if (rule_name(k) == name) return k;
    }
    return std::nullopt;
}

KernelSpec KernelSpec::quad_form(Matrix a) {
    if (a.rows() == 0 || a.rows() != a.cols()) {
        throw InputError("quadratic-form matrix must be square and non-empty");
    }
    if (asymmetry(a) > kSymmetryTolerance) {
        throw InputError("quadratic-form matrix is not symmetric");
    }
    Matrix g = cholesky_lower(a, kPivotTolerance);
    if (g.empty()) throw InputError("quadratic-form matrix is not positive definite");
    KernelSpec spec(KernelKind::QuadForm);
    spec.form_ = std::move(a);
    spec.factor_ = std::move(g);
    return spec;
}

KernelSpec KernelSpec::of_kind(KernelKind kind) {
    if (kind == KernelKind::QuadForm) {
        throw InputError("the mse rule needs a matrix; use KernelSpec::quad_form");
    }
    return KernelSpec(kind);
}

bool KernelSpec::compatible(const OutcomeSpace& space) const {
    switch (kind_) {
        case KernelKind::SquaredDiff:
        case KernelKind::AbsDiff: return space.kind() == SpaceKind::RealLine;
        case KernelKind::Euclidean: return space.kind() == SpaceKind::RealVector;
        case KernelKind::QuadForm:
            return space.kind() == SpaceKind::RealVector && space.dim() == form_.rows();
        case KernelKind::LabelMismatch: return space.kind() == SpaceKind::UnorderedCategories;
        case KernelKind::OrdinalAbsDiff: return space.kind() == SpaceKind::OrderedCategories;
    }
    return false;
}

void KernelSpec::require_compatible(const OutcomeSpace& space) const {
    if (!compatible(space)) {
        std::string what = "rule " + std::string(name()) + " does not apply to " + space.describe();
        if (kind_ == KernelKind::QuadForm) {
            what += " (matrix is " + std::to_string(form_.rows()) + "x" +
                    std::to_string(form_.cols()) + ")";
        }
        throw InputError(what);
    }
}

double KernelSpec::points(std::span<const double> x, std::span<const double> y) const {
    switch (kind_) {
        case KernelKind::SquaredDiff: {
            const double d = y[0] - x[0];
            return d * d;
        }
        case KernelKind::AbsDiff: return std::abs(y[0] - x[0]);
        case KernelKind::Euclidean: {
            double s = 0.0;
            for (std::size_t a = 0; a < x.size(); ++a) {
                const double d = y[a] - x[a];
                s += d * d;
            }
            return std::sqrt(s);
        }
        case KernelKind::QuadForm: {
            // d^T A d with d = y - x, summed symmetrically so L(x,y) == L(y,x)
            const std::size_t n = x.size();
            double s = 0.0;
            for (std::size_t a = 0; a < n; ++a) {
                const double da = y[a] - x[a];
                double row = form_(a, a) * da;
                for (std::size_t b = 0; b < a; ++b) row += 2.0 * form_(a, b) * (y[b] - x[b]);
                s += da * row;
            }
            return std::max(s, 0.0);
        }
        default: break;
    }
    throw InputError("rule " + std::string(name()) + " is defined on categories, not points");
}

double KernelSpec::categories(std::size_t i, std::size_t j) const {
    switch (kind_) {
        case KernelKind::LabelMismatch: return i == j ? 0.0 : 1.0;
        case KernelKind::OrdinalAbsDiff:
            return i > j ? static_cast<double>(i - j) : static_cast<double>(j - i);
        default: break;
    }
    throw InputError("rule " + std::string(name()) + " is defined on points, not categories");
}

namespace {

bool is_categorical_kind(KernelKind k) {
    return k == KernelKind::LabelMismatch || k == KernelKind::OrdinalAbsDiff;
}

void require_outcome_kind(const KernelSpec& spec, const Outcome& x) {
    if (is_categorical_kind(spec.kind())) {
        if (!std::holds_alternative<Category>(x)) {
            throw InputError("rule " + std::string(spec.name()) + " expects category outcomes");
        }
        return;
    }
    const auto* p = std::get_if<Point>(&x);
    if (p == nullptr) {
        throw InputError("rule " + std::string(spec.name()) + " expects real-valued outcomes");
    }
    const std::size_t want =
        spec.kind() == KernelKind::QuadForm ? spec.form().rows()
        : (spec.kind() == KernelKind::SquaredDiff || spec.kind() == KernelKind::AbsDiff) ? 1
                                                                                          : p->size();
    if (p->size() != want || p->empty()) {
        throw InputError("outcome has dimension " + std::to_string(p->size()) + ", rule " +
                         std::string(spec.name()) + " expects " + std::to_string(want));
    }
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Outcome& x, const Outcome& y) {
    require_outcome_kind(spec, x);
    require_outcome_kind(spec, y);
    if (is_categorical_kind(spec.kind())) {
        return spec.categories(std::get<Category>(x).index, std::get<Category>(y).index);
    }
    const auto& px = std::get<Point>(x);
    const auto& py = std::get<Point>(y);
    if (px.size() != py.size()) throw InputError("outcomes have different dimensions");
    return spec.points(px, py);
}

Matrix kernel_matrix(const KernelSpec& spec, std::span<const Outcome> outcomes) {
    const std::size_t n = outcomes.size();
    for (const Outcome& o : outcomes) require_outcome_kind(spec, o);
    Matrix m(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t l = j + 1; l < n; ++l) {
            const double v = kernel_eval(spec, outcomes[j], outcomes[l]);
            m(j, l) = v;
            m(l, j) = v;
        }
    }
    return m;
}

Matrix category_kernel_matrix(const KernelSpec& spec, std::size_t k) {
    Matrix m(k, k);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t l = 0; l < k; ++l) m(j, l) = spec.categories(j, l);
    return m;
}

NegativeDefinitenessReport check_negative_definite(const Matrix& kernel, std::size_t trials,
                                                   std::uint64_t seed) {
    const std::size_t n = kernel.rows();
    if (n < 2 || kernel.cols() != n) {
        throw InputError("negative-definiteness check needs a square matrix over >= 2 outcomes");
    }
    if (trials == 0) throw InputError("negative-definiteness check needs at least one trial");
    Rng rng(seed);
    NegativeDefinitenessReport report;
    report.trials = trials;
    report.max_quadratic_form = -std::numeric_limits<double>::infinity();
    std::vector<double> c(n);
    for (std::size_t t = 0; t < trials; ++t) {
        double mean = 0.0;
        for (double& v : c) {
            v = rng.normal();
            mean += v;
        }
        mean /= static_cast<double>(n);
        for (double& v : c) v -= mean;
        const double q = kernel.bilinear(c, c);
        if (q > report.max_quadratic_form) {
            report.max_quadratic_form = q;
            report.worst_coefficients = c;
        }
    }
    report.passed = report.max_quadratic_form <= kNegativeDefiniteSlack;
    return report;
}

NegativeDefinitenessReport check_negative_definite(const KernelSpec& spec,
                                                   std::span<const Outcome> outcomes,
                                                   std::size_t trials, std::uint64_t seed) {
    return check_negative_definite(kernel_matrix(spec, outcomes), trials, seed);
}

std::vector<double> symmetric_eigenvalues(Matrix a) {
    const std::size_t n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

double max_centered_eigenvalue(const Matrix& kernel) {
    const std::size_t n = kernel.rows();
    if (n == 0) return 0.0;
    std::vector<double> row_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) row_mean[i] += kernel(i, j);
        row_mean[i] /= static_cast<double>(n);
        grand += row_mean[i];
    }
    grand /= static_cast<double>(n);
    Matrix centered(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            centered(i, j) = kernel(i, j) - row_mean[i] - row_mean[j] + grand;
    return symmetric_eigenvalues(std::move(centered)).back();
}

Matrix quartic_kernel_matrix(std::span<const double> points) {
    const std::size_t n = points.size();
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = points[i] - points[j];
            m(i, j) = d * d * d * d;
        }
    }
    return m;
}

}  // namespace kpool
