#pragma once

#include <stdexcept>
#include <string>

namespace mig {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed path text. Carries the 1-based line/column of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string &message, int line, int column)
        : Error(message + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
          message_(message), line_(line), column_(column) {}
    /// Message without the location suffix.
    const std::string &message() const { return message_; }
    int line() const { return line_; }
    int column() const { return column_; }

private:
    std::string message_;
    int line_;
    int column_;
};

class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// A caller broke a documented precondition (shape mismatch, gamma <= 0, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf during training or optimization.
class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace mig
