#pragma once

#include <stdexcept>
#include <string>

namespace bit {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data; carries a 1-based line number when known.
struct ParseError : Error {
    ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_number(line) {}
    long line_number;
};

// Invalid configuration (unknown key, bad value, inconsistent schedule).
struct ConfigError : Error {
    using Error::Error;
};

// Numeric failure: non-finite value, shape mismatch, degenerate input.
struct NumericError : Error {
    using Error::Error;
};

// Pocket extraction found no protein atom within the cutoff.
struct EmptyPocketError : Error {
    using Error::Error;
};

// Checkpoint/serialization failure (bad magic, version mismatch, truncation).
struct CheckpointError : Error {
    using Error::Error;
};

}  // namespace bit
