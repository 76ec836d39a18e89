#pragma once

#include <stdexcept>
#include <string>

namespace tshap {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid arguments to an operation (dimension mismatch, empty subset, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Model construction failed (non-SPD covariance, bad weights, unsupported
/// transform/truncation structure).
class ModelError : public Error {
public:
    using Error::Error;
};

/// A configuration is inconsistent or infeasible (budget formulas, rejection
/// rate too low, unknown problem name).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Conditional distribution degenerated (all mixture weights vanished).
class DegenerateConditionalError : public Error {
public:
    using Error::Error;
};

/// Cross-entropy fitting failed (stagnation, all components pruned).
class CrossEntropyError : public Error {
public:
    using Error::Error;
};

/// Aggregation cannot proceed (non-positive normalizer).
class AggregationError : public Error {
public:
    using Error::Error;
};

/// Standardization cannot be built (zero-variance coordinate).
class StandardizationError : public Error {
public:
    using Error::Error;
};

} // namespace tshap
