#pragma once

#include <stdexcept>
#include <string>

namespace gamed {

// Shape or axis disagreement between tensors / layers.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric-domain violations (division by ~0, non-binary BCE targets, ...).
class NumericDomainError : public std::runtime_error {
public:
    explicit NumericDomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration; the message names the offending key. CLI exit 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset file problems (missing split, malformed line, ...). CLI exit 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite training loss. CLI exit 4.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Model file magic/version mismatch. CLI exit 5.
class VersionError : public std::runtime_error {
public:
    explicit VersionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unknown record id or similar failed lookup. CLI exit 6.
class LookupError : public std::runtime_error {
public:
    explicit LookupError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gamed
