#pragma once

#include <stdexcept>
#include <string>

namespace motionseg {

enum class ErrorCode {
  kInvalidParameter,
  kShape,
  kInsufficientCorrespondences,
  kInvalidAnnotation,
  kInvalidInput,
  kMissingFile,
  kMalformedManifest,
  kNonMonotoneIndices,
  kDecode,
  kIo,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a code so front-ends can
/// serialize it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace motionseg
