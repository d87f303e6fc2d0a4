#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sauc {

// Invalid argument or invariant violation (negative count, empty split, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed input file. Carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string &what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Operation invoked on an object that is not in a usable state (e.g. unfitted model).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A metric has no defined value for the given input (e.g. every bin has zero width).
class MetricUndefined : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A pipeline stage failed; the message is prefixed with the stage name.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string &what)
        : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}

    const std::string &stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace sauc
