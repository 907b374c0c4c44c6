#include "garmentsynth/error.hpp"

namespace garmentsynth {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyPrompt: return "EmptyPrompt";
    case ErrorCode::kUnknownPartNoun: return "UnknownPartNoun";
    case ErrorCode::kNoCategory: return "NoCategory";
    case ErrorCode::kStructureMismatch: return "StructureMismatch";
    case ErrorCode::kInvalidScene: return "InvalidScene";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kEmptyBank: return "EmptyBank";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kUnknownToken: return "UnknownToken";
    case ErrorCode::kInvalidDistribution: return "InvalidDistribution";
    case ErrorCode::kInvalidPercentile: return "InvalidPercentile";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kBadShape: return "BadShape";
    case ErrorCode::kBadTimestep: return "BadTimestep";
    case ErrorCode::kCfgMismatch: return "CfgMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kInvalidLexicon: return "InvalidLexicon";
    case ErrorCode::kInvalidTemplate: return "InvalidTemplate";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

bool is_numeric_error(ErrorCode code) {
  return code == ErrorCode::kNonFinite || code == ErrorCode::kInvalidDistribution;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

}  // namespace garmentsynth
