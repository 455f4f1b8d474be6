#ifndef KMA_ERRORS_HPP
#define KMA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kma {

// Bad user input: unknown system names, malformed config files, inconsistent
// dimensions in a request. CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: diverged simulation/training, non-stabilizable LQR
// design. CLI maps this to exit code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem trouble, always carries the offending path. Exit code 3.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace kma

#endif
