#include "kpool/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "kpool/error.hpp"

namespace kpool {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) {
            throw InputError("matrix row " + std::to_string(r + 1) + " has " +
                             std::to_string(rows[r].size()) + " entries, expected " +
                             std::to_string(m.cols()));
        }
        std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + r * m.cols());
    }
    return m;
}

double Matrix::bilinear(std::span<const double> x, std::span<const double> y) const {
    double total = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
        double inner = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) inner += (*this)(r, c) * y[c];
        total += x[r] * inner;
    }
    return total;
}

Matrix cholesky_lower(const Matrix& a, double rel_pivot_tol) {
    const std::size_t n = a.rows();
    if (n == 0 || a.cols() != n) return {};
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
    if (!(max_diag > 0.0)) return {};
    const double threshold = rel_pivot_tol * max_diag;

    Matrix g(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double pivot = a(j, j);
        for (std::size_t k = 0; k < j; ++k) pivot -= g(j, k) * g(j, k);
        if (!(pivot > threshold)) return {};
        const double root = std::sqrt(pivot);
        g(j, j) = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= g(i, k) * g(j, k);
            g(i, j) = v / root;
        }
    }
    return g;
}

double asymmetry(const Matrix& a) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
    return worst;
}

namespace detail {

double clamp_nonnegative(double value, double tol, const char* what) {
    if (value >= 0.0) return value;
    if (value > -tol) return 0.0;
    throw InvariantError(std::string(what) + " is negative beyond rounding noise: " +
                         std::to_string(value));
}

}  // namespace detail

}  // namespace kpool
