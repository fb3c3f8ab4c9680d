#pragma once

#include <stdexcept>
#include <string>

namespace segdesic {

/// Base error. Carries the process exit code the CLI maps it to:
/// 2 = usage/config, 3 = I/O, 4 = numerical/contract violation.
class Error : public std::runtime_error {
public:
    Error(const std::string& msg, int exit_code)
        : std::runtime_error(msg), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

/// Invalid configuration or usage (exit code 2).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg, 2) {}
};

/// Filesystem / serialization failure (exit code 3).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg, 3) {}
};

/// Tensor or raster dimensions do not line up (exit code 4).
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg, 4) {}
};

/// Bad numeric input: non-finite coordinates, degenerate vectors,
/// out-of-range labels or indices (exit code 4).
class ValueError : public Error {
public:
    explicit ValueError(const std::string& msg) : Error(msg, 4) {}
};

/// An iterative procedure failed to converge (exit code 4).
class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& msg) : Error(msg, 4) {}
};

} // namespace segdesic
