#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace decotime {

/// Malformed or incomplete configuration input. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One or more physical invariants violated. All failures are collected.
class ValidationError : public ConfigError {
public:
    explicit ValidationError(std::vector<std::string> failures);

    const std::vector<std::string>& failures() const noexcept { return failures_; }

private:
    std::vector<std::string> failures_;
};

/// Caller misuse of an API (bad index, wrong state class, ...).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Quadrature, eigensolver or fit failure. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace decotime
