#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace uwa {

// Caller handed us something outside an operation's contract.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Factorization hit a non-positive pivot or a rank-deficient column.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed binary file; carries the byte offset where parsing failed.
class FormatError : public IoError {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : IoError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

// File is well formed but was written for a different format version or configuration.
class VersionError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace uwa
