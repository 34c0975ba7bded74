// SPDX-License-Identifier: Apache-2.0

#include "canonlift/error.hpp"

namespace canonlift {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::EmptyMesh: return "empty_mesh";
    case ErrorKind::IndexOutOfRange: return "index_out_of_range";
    case ErrorKind::DegenerateGeometry: return "degenerate_geometry";
    case ErrorKind::ShapeMismatch: return "shape_mismatch";
    case ErrorKind::BehindCamera: return "behind_camera";
    case ErrorKind::ExtentMismatch: return "extent_mismatch";
    case ErrorKind::NonFinite: return "non_finite";
  }
  return "unknown";
}

}  // namespace canonlift
