#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mntp {

// Error taxonomy used across the library. Everything derives from Error so
// callers can catch one type at the CLI boundary.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct GeometryError : Error {
  using Error::Error;
};

struct RangeError : Error {
  using Error::Error;
};

struct ArgumentError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct CapabilityError : Error {
  using Error::Error;
};

// File-format violation. Carries the byte offset where parsing failed.
struct FormatError : Error {
  FormatError(const std::string& msg, uint64_t offset)
      : Error(msg + " (at byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  uint64_t byte_offset;
};

}  // namespace mntp
