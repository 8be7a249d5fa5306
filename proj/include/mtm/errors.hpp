#pragma once

#include <stdexcept>
#include <string>

namespace mtm {

// Every error the toolkit raises derives from Error so callers (the CLI in
// particular) can map error classes onto exit statuses.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (bad coordinates,
/// token id out of range, unlabeled cell, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed text: hashes, timestamps, CSV rows, config values.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A configuration that cannot be satisfied (too few cells, too few samples).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Caller broke a precondition (unsorted input, mismatched head kind, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradients during optimization.
class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace mtm
