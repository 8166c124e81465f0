#pragma once

#include <stdexcept>
#include <string>

namespace nivtk {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or operation precondition violation.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input file; the message carries the position (byte offset,
/// point index, or line number) of the offending record.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Statistic undefined on the given data (constant input, zero ground truths).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

} // namespace nivtk
