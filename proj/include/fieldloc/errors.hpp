#pragma once

#include <stdexcept>
#include <string>

namespace fieldloc {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A DEM query fell outside the grid's bounding rectangle.
class OutOfBounds : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable input file.
class FormatError : public Error {
public:
    using Error::Error;
};

/// The damped normal equations stayed singular up to the damping ceiling.
class LinearSolveFailure : public Error {
public:
    using Error::Error;
};

}  // namespace fieldloc
