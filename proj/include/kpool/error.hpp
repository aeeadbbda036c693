#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kpool {

/// Malformed or inconsistent user input: bad probability vectors, mismatched
/// outcome spaces, unparseable files. Maps to CLI exit code 2.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what, std::size_t line = 0)
        : std::invalid_argument(what), line_(line) {}

    /// 1-based source line when the error came from a file, 0 otherwise.
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A computed quantity broke an identity or sign constraint by more than
/// floating-point noise. Maps to CLI exit code 3.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

namespace detail {

/// Quantities that are nonnegative in exact arithmetic: values in
/// (-tol, 0) are clamped to zero, anything below -tol throws.
double clamp_nonnegative(double value, double tol, const char* what);

}  // namespace detail

}  // namespace kpool
