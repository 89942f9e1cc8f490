// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace sinn {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input text (graph files, dataset records, observation files).
/// Messages carry the line or record number where one is known.
struct ParseError : Error {
  using Error::Error;
};

/// Operand shapes do not line up.
struct ShapeError : Error {
  using Error::Error;
};

/// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace sinn
