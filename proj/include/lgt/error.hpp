#pragma once

#include <stdexcept>
#include <string>

namespace lgt {

/// Malformed or inconsistent input data (bundle files, splits, labels).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during training or gradient checking.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or argument contract violated by a caller.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace lgt
