#pragma once

#include <stdexcept>
#include <string>

namespace mnl {

/// Thrown when an argument violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown when an iterative solver fails to reach its tolerance.
/// `residual` carries the last measured error (gradient norm, gap, ...).
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Malformed input file; the message names the offending line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidInput(message);
}

} // namespace detail
} // namespace mnl
