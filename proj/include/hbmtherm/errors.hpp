#pragma once

#include <stdexcept>

namespace hbmtherm {

// Configuration problems: unresolvable paths, unknown keys, bad values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A validation gate or consistency check failed (maps to exit code 1).
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hbmtherm
