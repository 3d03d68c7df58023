#pragma once

#include <stdexcept>
#include <string>

namespace contiguard {

// Exit codes used by the CLI: 0 success, 1 usage, 2 data error, 3 runtime error.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitRuntime = 3,
};

// Invalid configuration: bad flag values, missing lexicons, unknown keys.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or insufficient input data.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures during training (non-finite loss, diverged state).
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace contiguard
