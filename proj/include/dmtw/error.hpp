#pragma once

#include <stdexcept>
#include <string>

namespace dmtw {

/// Invalid parameters or a configuration that violates a type invariant.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Input data that cannot be processed (mismatched grids, malformed files,
/// degenerate measurements).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dmtw
