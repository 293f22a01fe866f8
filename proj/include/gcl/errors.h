#pragma once

#include <stdexcept>
#include <string>

namespace gcl {

// Operand shapes do not conform to a primitive.
class ShapeError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

// A loss term, gradient or parameter became NaN/Inf.
class NonFiniteError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Malformed feature file, config file or report.
class FormatError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration value or unsupported request.
class ConfigError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

// A report or series file could not be written.
class IoError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

}  // namespace gcl
