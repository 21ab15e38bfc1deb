#include "ottolab/error.hpp"

#include <cstdio>

namespace ottolab {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::degenerate_measure: return "degenerate-measure";
    case ErrorKind::not_in_pdiv: return "not-in-P_div";
    case ErrorKind::numerical_failure: return "numerical-failure";
    case ErrorKind::incompatible_rhs: return "incompatible-rhs";
    case ErrorKind::resource_limit: return "resource-limit";
    case ErrorKind::not_derivable: return "not-derivable";
    case ErrorKind::degenerate_curve: return "degenerate-curve";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what)
{
}

NumericalFailure::NumericalFailure(const std::string& what, std::size_t iterations, double residual)
    : Error(ErrorKind::numerical_failure,
            what + " (iterations=" + std::to_string(iterations) + ", residual=" + fmt(residual) + ")"),
      reason_(what), iterations_(iterations), residual_(residual)
{
}

void raise(ErrorKind kind, const std::string& what)
{
    throw Error(kind, what);
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace ottolab
