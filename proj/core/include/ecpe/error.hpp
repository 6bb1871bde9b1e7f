#pragma once

#include <stdexcept>
#include <string>

namespace ecpe {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file (JSON schema, embedding file, checkpoint).
class LoadError : public Error {
public:
    using Error::Error;
};

// Input parsed but breaks a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Shapes or widths that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Training produced a NaN or infinity.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace ecpe
