#pragma once

#include <stdexcept>
#include <string>

namespace fcce {

/// Input violates a documented precondition (non-finite values, shape mismatch).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Tensor shapes are incompatible for the requested operation.
class ShapeError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// A fuzzy cluster lost all of its membership mass.
class DegenerateCluster : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Run or model configuration is inconsistent.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file content; `offset` is the byte position where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace fcce
