// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qgrad {

/// Raised by solve_mid_level when the search interval holds no elements.
/// Callers collapse the level onto an endpoint.
class DegenerateInterval : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Element outside the level range with clamping disabled.
class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed wire message. offset() is the byte position where decoding
/// failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedScheme : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Request outside what a brute-force oracle is built to certify.
class Unsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qgrad
