#pragma once

#include <stdexcept>
#include <string>

namespace resokam {

/// Input outside the domain of an operation (bad dimension, point outside B, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Violated parameter constraint; the message names the failed inequality.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A constructed object failed one of its certified bounds.
class CertificationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checked 64-bit lattice arithmetic overflowed.
class OverflowError : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

/// Root finder could not establish a sign change.
class BracketingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A sampled check contradicts a structural hypothesis (convexity, monotonicity).
class ModelAssumptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computed object violates one of its invariants; `what()` carries the witness.
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration or report file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace resokam
