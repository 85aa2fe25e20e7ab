#pragma once

#include <stdexcept>
#include <string>

namespace crag {

// Error categories map onto CLI exit codes: config=2, contract/data=3, transport=4.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TransportError : std::runtime_error {
    TransportError(const std::string& msg, int attempts)
        : std::runtime_error(msg + " (after " + std::to_string(attempts) + " attempts)"),
          attempts(attempts) {}
    int attempts;
};

} // namespace crag
