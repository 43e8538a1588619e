#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vimcan {

enum class ErrorCode {
  ShapeMismatch,
  NonFiniteInput,
  NonFiniteValue,
  InvalidArgument,
  EvenKernel,
  NonScalarLoss,
  DetachedGraph,
  NonDeterministicFunction,
  NestedScope,
  UnsupportedG,
  CyclicTopology,
  MissingLandmark,
  DegenerateFrame,
  NonUnitInput,
  IoError,
  FormatError,
  EmptySequence,
  BadPermutation,
  SequenceTooLong,
  InvalidConfig,
  LengthMismatch,
  VersionMismatch,
  MissingParameter,
  DegenerateGroundTruth,
  TooShort,
  NonFiniteGradient,
  EmptyDataset,
  OutOfMemory,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EvenKernel: return "EvenKernel";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::DetachedGraph: return "DetachedGraph";
    case ErrorCode::NonDeterministicFunction: return "NonDeterministicFunction";
    case ErrorCode::NestedScope: return "NestedScope";
    case ErrorCode::UnsupportedG: return "UnsupportedG";
    case ErrorCode::CyclicTopology: return "CyclicTopology";
    case ErrorCode::MissingLandmark: return "MissingLandmark";
    case ErrorCode::DegenerateFrame: return "DegenerateFrame";
    case ErrorCode::NonUnitInput: return "NonUnitInput";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::BadPermutation: return "BadPermutation";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::MissingParameter: return "MissingParameter";
    case ErrorCode::DegenerateGroundTruth: return "DegenerateGroundTruth";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::OutOfMemory: return "OutOfMemory";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as this exception; `code()` is the
/// machine-readable part, `what()` carries "Code: detail".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

inline void require(bool cond, ErrorCode code, const std::string& detail) {
  if (!cond) fail(code, detail);
}

}  // namespace vimcan
