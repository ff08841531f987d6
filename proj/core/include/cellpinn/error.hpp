#pragma once

#include <stdexcept>
#include <string>

namespace cellpinn {

/// Caller broke a documented precondition (bad index, mismatched sizes).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A sample point lies outside the closed unit square.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Non-finite loss, gradient or parameter update during training.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Finite-difference reference solver failed to converge.
class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested operation is not available for this problem or model kind.
class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Metric is undefined for the supplied data (e.g. an all-zero reference).
class MetricError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cellpinn
