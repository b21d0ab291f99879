#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drp {

// Statement text could not be split into name/binders/goal. Carries the byte
// offset (relative to the parsed text) where scanning gave up.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (byte " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class InvalidIdentifier : public std::runtime_error {
public:
    explicit InvalidIdentifier(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// A lemma offered to final-context assembly or the final prompt was not PROVED
// (or its proof still contains a placeholder).
class UnverifiedLemma : public std::runtime_error {
public:
    explicit UnverifiedLemma(const std::string& what) : std::runtime_error(what) {}
};

class InvariantViolation : public std::runtime_error {
public:
    explicit InvariantViolation(const std::string& what) : std::runtime_error(what) {}
};

// Raised only when a remote-call stage ends with zero usable responses; partial
// batches degrade gracefully instead of throwing.
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset import failures carry the 1-based line number of the offending row.
class SchemaError : public std::runtime_error {
public:
    SchemaError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ChecksumMismatch : public std::runtime_error {
public:
    explicit ChecksumMismatch(const std::string& what) : std::runtime_error(what) {}
};

} // namespace drp
