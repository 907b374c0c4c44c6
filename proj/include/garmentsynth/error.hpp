#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace garmentsynth {

enum class ErrorCode {
  kEmptyPrompt,
  kUnknownPartNoun,
  kNoCategory,
  kStructureMismatch,
  kInvalidScene,
  kUnknownCategory,
  kEmptyBank,
  kEmptyMask,
  kNonFinite,
  kUnknownToken,
  kInvalidDistribution,
  kInvalidPercentile,
  kLengthMismatch,
  kBadShape,
  kBadTimestep,
  kCfgMismatch,
  kShapeMismatch,
  kInvalidConfig,
  kInvalidLexicon,
  kInvalidTemplate,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Numeric failures map to CLI exit code 3, everything else to 2.
bool is_numeric_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace garmentsynth
