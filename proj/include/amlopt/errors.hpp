#pragma once

#include <stdexcept>
#include <string>

namespace amlopt {

/// Dimension or layout mismatch between inputs.
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration or algorithm parameter outside its admissible range.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Caller violated a documented precondition (e.g. control outside bounds).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Factorization or other numerical failure.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The reservoir proxy could not complete a run.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Simulator state left its physical range.
class ConsistencyError : public SimulationError {
public:
    using SimulationError::SimulationError;
};

/// Ensemble cross-covariance vanished; no ascent direction exists.
class StationaryEnsembleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace amlopt
