#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ottolab {

enum class ErrorKind {
    invalid_argument,
    degenerate_measure,
    not_in_pdiv,
    numerical_failure,
    incompatible_rhs,
    resource_limit,
    not_derivable,
    degenerate_curve,
};

std::string_view to_string(ErrorKind kind);

/// Base of every error raised by the library. The kind mirrors the error
/// vocabulary of the public operations so callers (and the CLI) can map
/// failures to exit codes without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);

    ErrorKind kind() const noexcept { return kind_; }
    /// The description without the kind prefix that what() carries.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

/// Iterative solver ran out of budget or diverged.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, std::size_t iterations, double residual);

    std::size_t iterations() const noexcept { return iterations_; }
    /// The description without the solver counters.
    const std::string& reason() const noexcept { return reason_; }
    double residual() const noexcept { return residual_; }

private:
    std::string reason_;
    std::size_t iterations_;
    double residual_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

/// Short "%.6g" rendering of a number for messages.
std::string fmt(double v);

inline void require(bool cond, ErrorKind kind, const std::string& what)
{
    if (!cond) raise(kind, what);
}

} // namespace ottolab
