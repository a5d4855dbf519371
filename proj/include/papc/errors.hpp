#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace papc {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector or field sizes that do not fit together.
class InvalidDimension : public Error {
public:
    using Error::Error;
};

/// A scalar parameter outside its admissible range (step, threshold, kernel width...).
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Step sizes or rate-certificate inputs that violate the convergence conditions.
class ParameterDomainError : public Error {
public:
    using Error::Error;
};

/// The cubic in the step-size tuning had no bracketed root.
class TuningFailure : public Error {
public:
    using Error::Error;
};

/// The weighted primal-dual metric turned out indefinite beyond round-off.
class MetricError : public Error {
public:
    using Error::Error;
};

/// Non-finite iterate; carries the iteration at which it was detected.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t iteration, const std::string& what)
        : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

/// Malformed text input; line is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Unsupported or corrupt binary image file.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures while reading or persisting results.
class PersistenceError : public Error {
public:
    using Error::Error;
};

}  // namespace papc
