#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace featgraph {

enum class ErrorCode {
  // tabular
  MissingLabelColumn,
  NonNumericCell,
  RaggedRow,
  EmptyDataset,
  EmptyColumn,
  TooFewRows,
  // operations
  ArityMismatch,
  FitStateMismatch,
  NonFiniteOutput,
  LengthMismatch,
  UnknownOperation,
  // graph
  UnknownParent,
  UnknownNode,
  SchemaMismatch,
  MalformedProgram,
  // clustering / linear algebra
  ZeroVector,
  ShapeMismatch,
  NoConvergence,
  DimensionTooLarge,
  InvalidK,
  // networks
  DimMismatch,
  UnknownRelation,
  ArchitectureMismatch,
  // agents
  NoClusters,
  NoCandidates,
  // evaluation
  EmptyInput,
  SingleClass,
  ConstantTruth,
  // config / io
  MalformedConfig,
  UnknownKey,
  OutOfRange,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace featgraph
