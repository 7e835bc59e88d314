#pragma once

#include <stdexcept>
#include <string>

namespace frd {

// Iteration caps, resolution failures, violated numerical certificates.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace frd
