#pragma once

#include <stdexcept>
#include <string>

namespace eeio {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data. `code` is a stable identifier
// (e.g. "EmptyBalance", "DuplicateCell") usable in tests and tooling.
class ParseError : public Error {
public:
    ParseError(std::string code, const std::string& message)
        : Error(code + ": " + message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// A structural invariant of a domain type does not hold.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Two objects that must share an axis (flows, products, sectors) do not.
class AxisError : public Error {
public:
    using Error::Error;
};

// Run configuration is invalid (missing path, bad enum value, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace eeio
