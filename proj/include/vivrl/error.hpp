// Exception hierarchy shared by all vivrl modules.
#pragma once

#include <stdexcept>
#include <string>

namespace vivrl {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A physical or numerical parameter is outside its admissible domain.
class ParameterDomainError : public Error {
public:
    using Error::Error;
};

/// The plant state left the finite / bounded region (|q| >= 10 or NaN).
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Free-decay identification could not extract enough peaks.
class IdentificationError : public Error {
public:
    using Error::Error;
};

/// Non-finite actuator command.
class CommandError : public Error {
public:
    using Error::Error;
};

/// Actuator command issued off the command-interval grid.
class SchedulingError : public Error {
public:
    using Error::Error;
};

/// Vector / matrix dimensions disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite quantity encountered while training.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Signal analysis precondition failed (too short, no dominant frequency, ...).
class AnalysisError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration or checkpoint file.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// No candidate in the calibration grid met the targets.
class CalibrationError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string &what) {
    if (!ok) throw ParameterDomainError(what);
}

}  // namespace detail

}  // namespace vivrl
