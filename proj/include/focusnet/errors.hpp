#pragma once

#include <stdexcept>
#include <string>

namespace focusnet {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/op shape or geometry violations.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Invalid parameter values (rates, thresholds, fractions, sizes).
struct ParamError : Error {
    explicit ParamError(const std::string& msg) : Error(msg) {}
};

// Invalid architecture / run configuration.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Dataset layout, pairing and file I/O problems.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Numerical failures (degenerate statistics, NaN loss).
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Checkpoint (de)serialization failures, with a machine-checkable kind.
struct CheckpointError : Error {
    enum class Kind { BadMagic, BadVersion, Truncated, Malformed };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

}  // namespace focusnet
