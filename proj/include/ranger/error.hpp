// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ranger {

/// Base class for every error raised by the library. Messages name the
/// offending entity (node id, file, flag) so callers can surface them as-is.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent graph (dangling reference, shape mismatch, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written, or decoded.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ranger
