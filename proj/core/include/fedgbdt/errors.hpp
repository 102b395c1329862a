#pragma once

#include <stdexcept>
#include <string>

namespace fedgbdt {

// Stage-labeled errors; the CLI maps each type to its exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AttackError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a view carries no node statistics (hardened histogram protocol).
struct StatisticsWithheldError : AttackError {
  StatisticsWithheldError() : AttackError("statistics withheld") {}
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fedgbdt
