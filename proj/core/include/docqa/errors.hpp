#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace docqa {

/// Coarse failure classes. The CLI maps each class to its own exit code.
enum class ErrorCategory {
    config,
    io,
    transport,
    validation,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& what) : Error(ErrorCategory::validation, what) {}
};

/// Malformed input record; `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorCategory::validation,
                line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConflictError : public Error {
public:
    explicit ConflictError(const std::string& what) : Error(ErrorCategory::validation, what) {}
};

class EmptyCorpusError : public Error {
public:
    explicit EmptyCorpusError(const std::string& what) : Error(ErrorCategory::validation, what) {}
};

/// A document whose page indices are not contiguous from zero.
class GapError : public Error {
public:
    explicit GapError(const std::string& what) : Error(ErrorCategory::validation, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

class CorruptionError : public Error {
public:
    explicit CorruptionError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

class VersionError : public Error {
public:
    explicit VersionError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// A remote endpoint returned data violating the wire contract (e.g. wrong dimension).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(ErrorCategory::transport, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

/// Connection-level failure after all retries were spent.
class TransportError : public Error {
public:
    TransportError(int attempts, const std::string& what)
        : Error(ErrorCategory::transport,
                what + " (after " + std::to_string(attempts) + " attempt(s))"),
          attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// Non-2xx HTTP response.
class EndpointError : public Error {
public:
    EndpointError(int status, int attempts, std::string body)
        : Error(ErrorCategory::transport,
                "endpoint returned HTTP " + std::to_string(status) + " (after " +
                    std::to_string(attempts) + " attempt(s)): " + body.substr(0, 200)),
          status_(status), attempts_(attempts), body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    int attempts() const noexcept { return attempts_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    int attempts_;
    std::string body_;
};

}  // namespace docqa
