#pragma once

#include <stdexcept>
#include <string>

namespace ultrakin {

/// Raised when reaction-network text violates the grammar. Carries the
/// 1-based source position of the offending token.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line, int column)
        : std::runtime_error(what + " (line " + std::to_string(line) +
                             ", column " + std::to_string(column) + ")"),
          line_(line), column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Raised when a numerical procedure cannot deliver a trustworthy result
/// (step-size underflow, degenerate spectra, empty ensemble windows, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised for malformed run configurations (unknown keys, missing inputs).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ultrakin
