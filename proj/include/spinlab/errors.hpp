#pragma once

#include <stdexcept>
#include <string>

namespace spinlab {

// Error taxonomy used across the library. The CLI maps ConfigError and
// ParseError to exit code 2, everything else to exit code 3.

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid ids: unknown prompt, answer, or token.
struct DomainError : Error {
    using Error::Error;
};

// Invalid configuration or constructor arguments (weights not summing to 1,
// non-finite logits, bad field values). Messages name the offending field.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed call arguments (empty batches, missing y_ref, bad trajectories).
struct ArgumentError : Error {
    using Error::Error;
};

// Enumeration cap exceeded.
struct CapacityError : Error {
    using Error::Error;
};

// Runtime failure of a pipeline stage (optimizer divergence, I/O failure).
struct RunError : Error {
    using Error::Error;
};

// Unreadable checkpoint / config / run-record file. Messages name the file.
struct ParseError : Error {
    using Error::Error;
};

}  // namespace spinlab
