#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace multical {

enum class ErrorCode {
  MissingColumn,
  UnparseableCell,
  EmptyDataset,
  UnknownGroup,
  PoolTooSmall,
  InvalidParams,
  PreconditionViolated,
  NonFiniteLoss,
  NonPsdNegative,
  NoNonemptyGroup,
  IoError,
  FormatError,
  Cancelled,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnparseableCell: return "UnparseableCell";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UnknownGroup: return "UnknownGroup";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonPsdNegative: return "NonPsdNegative";
    case ErrorCode::NoNonemptyGroup: return "NoNonemptyGroup";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::Cancelled: return "Cancelled";
  }
  return "Unknown";
}

// Every failure in the library surfaces as this exception; the code is
// what the CLI prints and what sweep failure rows record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message,
                    ErrorCode code = ErrorCode::InvalidParams) {
  if (!condition) fail(code, message);
}

}  // namespace multical
