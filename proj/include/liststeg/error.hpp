#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace liststeg {

enum class ErrorCode {
  kOutOfRange,
  kInvalidInput,
  kInvalidDistribution,
  kStreamExhausted,
  kDesync,
  kTruncated,
  kNoMatch,
  kAmbiguousDecode,
  kInternalDesync,
  kTokenBudgetExceeded,
  kUndefinedUtilization,
  kDegenerateSupport,
  kTransport,
  kProtocol,
  kModel,
  kFormat,
  kConfig,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kInvalidDistribution: return "invalid-distribution";
    case ErrorCode::kStreamExhausted: return "stream-exhausted";
    case ErrorCode::kDesync: return "desync";
    case ErrorCode::kTruncated: return "truncated-stegotext";
    case ErrorCode::kNoMatch: return "suffix-no-match";
    case ErrorCode::kAmbiguousDecode: return "ambiguous-decode";
    case ErrorCode::kInternalDesync: return "internal-desync";
    case ErrorCode::kTokenBudgetExceeded: return "token-budget-exceeded";
    case ErrorCode::kUndefinedUtilization: return "undefined-utilization";
    case ErrorCode::kDegenerateSupport: return "degenerate-support";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kModel: return "model";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace liststeg
