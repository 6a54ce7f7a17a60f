#pragma once

#include <stdexcept>
#include <string>

namespace qfs {

/// Bad configuration value or invalid usage. Maps to CLI exit status 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or invariant-violating input data, or an I/O failure. Exit status 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or layouts that do not fit together (checkpoint vs config,
/// embedding dimension mismatch). Reported with exit status 2.
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A sequence longer than the model's positional budget.
class LengthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during training. Exit status 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qfs
