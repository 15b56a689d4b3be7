#pragma once

#include <stdexcept>
#include <string>

namespace pfedlia {

// Invalid configuration value or violated operation precondition.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Input shape does not match the model spec (wrong feature dim, label out of
// range, parameter vector of the wrong length).
struct DimensionError : std::invalid_argument {
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// SGD produced a non-finite parameter vector; `epoch` is the offending epoch.
struct TrainingDivergenceError : std::runtime_error {
    TrainingDivergenceError(const std::string& what, int epoch_)
        : std::runtime_error(what), epoch(epoch_) {}
    int epoch;
};

// IDX file problems, one kind per contract violation.
struct IdxError : std::runtime_error {
    enum class Kind { BadMagic, Truncated, CountMismatch };
    IdxError(Kind kind_, const std::string& what) : std::runtime_error(what), kind(kind_) {}
    Kind kind;
};

}  // namespace pfedlia
