#pragma once

#include <stdexcept>
#include <string>

namespace jetpref {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown keys, values out of range, unknown task names.
/// The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class InductionError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class PlanningError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

/// Raised by the human-queue evaluator when labels are not yet available.
class EvaluatorTimeout : public Error {
public:
    using Error::Error;
};

}  // namespace jetpref
