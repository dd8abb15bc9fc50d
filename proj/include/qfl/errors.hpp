#pragma once

#include <stdexcept>
#include <string>

namespace qfl {

/// Invalid configuration value or combination (register size, attack constants, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed circuit: bad wires, missing parameters or input angles.
class CircuitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A template asks for something the differentiator cannot handle.
class UnsupportedTemplateError : public CircuitError {
public:
    using CircuitError::CircuitError;
};

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad labels or sample values.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during training or aggregation.
class NumericFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated server/client protocol (e.g. aggregating an empty round).
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dataset file could not be parsed. Carries the byte offset of the failure.
class LoadError : public std::runtime_error {
public:
    LoadError(const std::string& what, long long offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    long long offset() const noexcept { return offset_; }

private:
    long long offset_;
};

}  // namespace qfl
