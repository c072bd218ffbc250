#pragma once

#include <stdexcept>
#include <string>

namespace metrosim {

/// Input document could not be read at all (bad syntax, wrong arity, ...).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input was well-formed but violates a domain invariant.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A result was requested from a simulation that has not run to completion.
class NotFinishedError : public std::runtime_error {
public:
    explicit NotFinishedError(const std::string& msg)
        : std::runtime_error(msg) {}
};

/// Optimization blew up (non-finite loss or gradient); the message carries
/// the diagnostic context needed to reproduce the failing batch.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace metrosim
