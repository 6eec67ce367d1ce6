#pragma once

#include <stdexcept>
#include <string>

namespace pgx {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller violated a documented precondition (shape mismatch, bad range, ...).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

/// An image carried the wrong value domain or colorspace for the operation.
struct DomainError : ContractError {
    explicit DomainError(const std::string& msg) : ContractError(msg) {}
};

/// Prompt text did not conform to the grammar. Message names the offending token.
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

/// Filesystem / serialization failure.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Checkpoint written by an incompatible code version.
struct VersionError : IoError {
    explicit VersionError(const std::string& msg) : IoError(msg) {}
};

inline void contract(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

} // namespace pgx
