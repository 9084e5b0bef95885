#ifndef POSEBENCH_ERROR_HPP
#define POSEBENCH_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace posebench {

enum class ErrorCode {
  kBehindCamera,
  kDegenerateRay,
  kDegenerateConfiguration,
  kInvalidParams,
  kParseError,
  kInvalidPose,
  kEmptyMask,
  kInsufficientFrames,
  kInvalidError,
  kInvalidLabel,
  kShapeMismatch,
  kInsufficientPoints,
  kNoConsensus,
  kCheiralityAmbiguous,
  kDegenerateGeometry,
  kPathTooShort,
  kConfigError,
  kIoError,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kDegenerateRay: return "DegenerateRay";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidPose: return "InvalidPose";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kInsufficientFrames: return "InsufficientFrames";
    case ErrorCode::kInvalidError: return "InvalidError";
    case ErrorCode::kInvalidLabel: return "InvalidLabel";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInsufficientPoints: return "InsufficientPoints";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kCheiralityAmbiguous: return "CheiralityAmbiguous";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kPathTooShort: return "PathTooShort";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code. Every failure the library
/// reports goes through this type so callers can branch on `code()`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace posebench

#endif  // POSEBENCH_ERROR_HPP
