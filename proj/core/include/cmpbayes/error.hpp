#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cmpbayes {

enum class ErrorCode {
  kInvalidParams,
  kTruncationNotConverged,
  kInvalidHyper,
  kNonpositiveDeterminant,
  kEmptyData,
  kImproperPosterior,
  kAllDivergent,
  kZeroVariance,
  kInvalidConfig,
  kParseError,
  kUnknownPrior,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Library error. Every failure the library reports carries one of the codes
/// above so callers (the CLI, the study harness) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cmpbayes
