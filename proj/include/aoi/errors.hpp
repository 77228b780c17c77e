#pragma once

#include <stdexcept>
#include <string>

namespace aoi {

// Parameter outside its admissible domain (bad distribution parameter,
// Laplace argument outside the convergence region, stream index, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A rational expression evaluated too close to one of its poles.
class PoleError : public DomainError {
public:
    using DomainError::DomainError;
};

class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The geometric tail bound of a path sum does not contract.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConditioningTooRareError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A simulation replication terminated abnormally.
class ReplicationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Two routes to the same quantity disagreed. Always a defect.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace aoi
