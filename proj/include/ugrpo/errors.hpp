#pragma once

#include <stdexcept>
#include <string>

namespace ugrpo {

// Exit-code mapping used by the CLI: 1 config, 2 numerical, 3 I/O.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input-domain violations (out-of-range token ids and the like).
struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace ugrpo
