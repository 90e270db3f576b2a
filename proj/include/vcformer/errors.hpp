#pragma once

#include <stdexcept>
#include <string>

namespace vcformer {

// Shape/dimension mismatches between operands.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: NaN inputs, singular solves, diverged losses.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (bad ratios, S does not divide D, unknown keys...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File I/O and parse failures (CSV cells, checkpoint containers).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace vcformer
