#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nlfeti {

enum class ErrorCode {
    invalid_dimension,
    indivisible_grid,
    subdomain_too_thin,
    not_positive_definite,
    topology_mismatch,
    io_error,
    config_error,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_dimension: return "invalid-dimension";
    case ErrorCode::indivisible_grid: return "indivisible-grid";
    case ErrorCode::subdomain_too_thin: return "subdomain-too-thin";
    case ErrorCode::not_positive_definite: return "not-positive-definite";
    case ErrorCode::topology_mismatch: return "topology-mismatch";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::config_error: return "config-error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by the sparse Cholesky when a pivot is not positive. `pivot()` is
/// the row index in the caller's (unpermuted) numbering.
class NotPositiveDefinite : public Error {
public:
    NotPositiveDefinite(std::size_t pivot, double value)
        : Error(ErrorCode::not_positive_definite,
                "pivot " + std::to_string(pivot) + " = " + std::to_string(value)),
          pivot_(pivot), value_(value) {}

    std::size_t pivot() const noexcept { return pivot_; }
    double value() const noexcept { return value_; }

private:
    std::size_t pivot_;
    double value_;
};

} // namespace nlfeti
