#pragma once

#include <stdexcept>
#include <string>

namespace sacesim {

/// Plan or parameter failed validation. `field()` names the offending key
/// using dotted paths, e.g. "dgm.outcome.residual_sd".
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The always-survivor stratum is empty, so the SACE is not defined.
class UndefinedEstimandError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Observed survival rates contradict the assumed monotonicity direction.
class MonotonicityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ExecutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sacesim
