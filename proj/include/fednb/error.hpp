#pragma once

#include <stdexcept>
#include <string>

namespace fednb {

// Root of every error this library throws on its own behalf.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- dataset ---

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : Error(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
          row_(row), column_(column) {}
    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    using Error::Error;
};

class TooManySites : public Error {
public:
    using Error::Error;
};

class DegenerateSplit : public Error {
public:
    using Error::Error;
};

// --- perturb ---

class InvalidVariance : public Error {
public:
    using Error::Error;
};

// --- model ---

class InsufficientClassData : public Error {
public:
    using Error::Error;
};

class InconsistentCounts : public Error {
public:
    using Error::Error;
};

class MissingCell : public Error {
public:
    using Error::Error;
};

class MissingAttribute : public Error {
public:
    using Error::Error;
};

// --- envelope ---

class WeakParameters : public Error {
public:
    using Error::Error;
};

class KeyMismatch : public Error {
public:
    using Error::Error;
};

// Any envelope that cannot be opened intact.
class EnvelopeError : public Error {
public:
    using Error::Error;
};

class IntegrityError : public EnvelopeError {
public:
    using EnvelopeError::EnvelopeError;
};

class SignatureError : public EnvelopeError {
public:
    using EnvelopeError::EnvelopeError;
};

// --- protocol ---

class ProtocolViolation : public Error {
public:
    using Error::Error;
};

class ConsistencyError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public Error {
public:
    using Error::Error;
};

// --- transport ---

class Unreachable : public Error {
public:
    using Error::Error;
};

class FrameTooLarge : public Error {
public:
    using Error::Error;
};

class BindError : public Error {
public:
    using Error::Error;
};

class ConnectError : public Error {
public:
    using Error::Error;
};

class FramingError : public Error {
public:
    using Error::Error;
};

}  // namespace fednb
