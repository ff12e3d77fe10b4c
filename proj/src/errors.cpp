#include "motionseg/errors.hpp"

namespace motionseg {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidParameter: return "invalid_parameter";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kInsufficientCorrespondences: return "insufficient_correspondences";
    case ErrorCode::kInvalidAnnotation: return "invalid_annotation";
    case ErrorCode::kInvalidInput: return "invalid_input";
    case ErrorCode::kMissingFile: return "missing_file";
    case ErrorCode::kMalformedManifest: return "malformed_manifest";
    case ErrorCode::kNonMonotoneIndices: return "non_monotone_indices";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace motionseg
