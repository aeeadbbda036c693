#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kpool {

/// Dense row-major matrix of doubles. Only what the kernels and reports need.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);
    /// Builds from nested rows; all rows must have equal length.
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    /// x^T M y
    [[nodiscard]] double bilinear(std::span<const double> x, std::span<const double> y) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Lower-triangular G with G G^T = a. Returns an empty matrix if a pivot
/// falls at or below `rel_pivot_tol` times the largest diagonal entry.
Matrix cholesky_lower(const Matrix& a, double rel_pivot_tol = 1e-12);

/// max |a_ij - a_ji|
double asymmetry(const Matrix& a);

}  // namespace kpool
