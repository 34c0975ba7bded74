// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace canonlift {

enum class ErrorKind {
  Io,
  Parse,
  InvalidArgument,
  EmptyMesh,
  IndexOutOfRange,
  DegenerateGeometry,
  ShapeMismatch,
  BehindCamera,
  ExtentMismatch,
  NonFinite,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` lets callers (the CLI in
/// particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace canonlift
