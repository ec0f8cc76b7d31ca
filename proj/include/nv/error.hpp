#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <string>
#include <vector>

namespace nv {

/// Base of every error the toolchain raises. Filter failures and verdicts are
/// values, not exceptions; only contract violations and malformed inputs throw.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(std::string message, std::size_t line, std::size_t column)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column), message_(std::move(message)) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string &message() const noexcept { return message_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string message_;
};

/// A construct that only exists in the other source dialect.
class DialectError : public ParseError {
public:
    using ParseError::ParseError;
};

struct Diagnostic {
    std::string message;
    std::string block; // empty when not tied to a block

    bool operator==(const Diagnostic &) const = default;
};

/// Well-formed syntax whose semantics violate the IR invariants.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Diagnostic> diags)
        : Error(render(diags)), diagnostics_(std::move(diags)) {}

    const std::vector<Diagnostic> &diagnostics() const noexcept { return diagnostics_; }

private:
    static std::string render(const std::vector<Diagnostic> &diags) {
        std::string out = "invalid function";
        for (const auto &d : diags) {
            out += "\n  ";
            if (!d.block.empty()) out += d.block + ": ";
            out += d.message;
        }
        return out;
    }

    std::vector<Diagnostic> diagnostics_;
};

class LoweringError : public Error {
public:
    using Error::Error;
};

class ArgMismatch : public Error {
public:
    using Error::Error;
};

class SignatureMismatch : public Error {
public:
    using Error::Error;
};

class MalformedBytecode : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class PipelineError : public Error {
public:
    using Error::Error;
};

} // namespace nv
