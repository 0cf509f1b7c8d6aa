#pragma once

#include <stdexcept>
#include <string>

namespace dnas {

// Exit-code convention used by the CLI: 0 success, 1 usage, 2 invariant
// failure, 3 numeric failure.
enum class ErrorKind { Usage = 1, Invariant = 2, Numeric = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Malformed config, unknown key, bad CLI arguments.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(ErrorKind::Usage, msg) {}
};

// Shape mismatch, precondition violation, structural misuse.
class InvariantError : public Error {
public:
    explicit InvariantError(const std::string& msg) : Error(ErrorKind::Invariant, msg) {}
};

// NaN/Inf encountered, degenerate numeric input.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(ErrorKind::Numeric, msg) {}
};

} // namespace dnas
