#include "featgraph/error.hpp"

namespace featgraph {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingLabelColumn: return "MissingLabelColumn";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyColumn: return "EmptyColumn";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::FitStateMismatch: return "FitStateMismatch";
    case ErrorCode::NonFiniteOutput: return "NonFiniteOutput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnknownOperation: return "UnknownOperation";
    case ErrorCode::UnknownParent: return "UnknownParent";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::MalformedProgram: return "MalformedProgram";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::UnknownRelation: return "UnknownRelation";
    case ErrorCode::ArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::NoClusters: return "NoClusters";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::ConstantTruth: return "ConstantTruth";
    case ErrorCode::MalformedConfig: return "MalformedConfig";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace featgraph
