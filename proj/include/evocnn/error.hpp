#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace evocnn {

/// Tensor/layer shape disagreement, or networks that cannot be wired together.
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A genome that does not describe a usable network for the given input.
class ValidityError : public std::runtime_error {
public:
    ValidityError(std::string msg, std::size_t layer)
        : std::runtime_error(std::move(msg)), layer_(layer) {}
    std::size_t layer() const { return layer_; }

private:
    std::size_t layer_;
};

/// Malformed bytes or text while decoding a file.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class UnsupportedVersion : public ParseError {
public:
    UnsupportedVersion(std::uint32_t found, std::size_t offset)
        : ParseError("unsupported version " + std::to_string(found), offset) {}
};

/// Violated operation contract (bad argument from the caller).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace evocnn
