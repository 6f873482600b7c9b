#pragma once

#include <stdexcept>
#include <string>

namespace vsal {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible tensor shapes, bad axes, dimension arithmetic failures.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Bad argument values (non-positive epsilon, unnormalized distribution, ...).
class ValueError : public Error {
public:
    explicit ValueError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf encountered in a forward pass, or misuse of the tape.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Filesystem and format errors (missing files, bad magic, truncated payloads).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace vsal
