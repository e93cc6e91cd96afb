#pragma once

#include <stdexcept>
#include <string>

namespace bittide {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// numerics
class NotSymmetric : public Error { using Error::Error; };
class Singular : public Error { using Error::Error; };
class NonpositiveStep : public Error { using Error::Error; };
class DimensionMismatch : public Error { using Error::Error; };
class ConvergenceFailure : public Error { using Error::Error; };

// graphs
class NotConnected : public Error { using Error::Error; };
class InvalidGraph : public Error { using Error::Error; };

// frame model
class HistoryGap : public Error { using Error::Error; };
class TargetInPast : public Error { using Error::Error; };

/// A controller correction left the oscillator's physical range.
class Inadmissible : public Error {
  public:
    Inadmissible(const std::string& what, int node, double time, double frequency)
        : Error(what), node(node), time(time), frequency(frequency) {}

    int node;
    double time;
    double frequency;
};

// analysis
class PositivityViolation : public Error { using Error::Error; };

// scenario files and traces
class ParseError : public Error { using Error::Error; };
class MissingField : public Error { using Error::Error; };
class GridMismatch : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

/// Scenario validation failure; `field` is the dotted path of the offending entry.
class ValidationError : public Error {
  public:
    ValidationError(std::string field, const std::string& message)
        : Error(field + ": " + message), field(std::move(field)) {}

    std::string field;
};

} // namespace bittide
