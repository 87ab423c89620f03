#pragma once

#include <stdexcept>
#include <string>

namespace boin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Design parameters violate 0 < phi1 < phi < phi2 < 1 or a related constraint.
class InvalidDesign : public Error {
public:
    using Error::Error;
};

/// A decision was requested for a dose without any treated patient.
class NoData : public Error {
public:
    using Error::Error;
};

/// An operation was applied to a trial in the wrong status or at the wrong dose.
class StateError : public Error {
public:
    using Error::Error;
};

/// True toxicity scenario is malformed (wrong length, out of range, not monotone).
class ScenarioError : public Error {
public:
    using Error::Error;
};

/// Beta quantile requested for a shape pair outside the one-shape-equals-one family.
class UnsupportedFamily : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class OptimizationFailure : public Error {
public:
    using Error::Error;
};

/// Malformed input (JSON payloads, CLI arguments, data vectors).
class InvalidInput : public Error {
public:
    using Error::Error;
};

} // namespace boin
