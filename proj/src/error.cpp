#include "depkit/error.hpp"

namespace depkit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::InvalidSchema: return "InvalidSchema";
    case ErrorKind::InvalidMapping: return "InvalidMapping";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::EmptyText: return "EmptyText";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::EmptyList: return "EmptyList";
    case ErrorKind::InvalidHyperParams: return "InvalidHyperParams";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
    case ErrorKind::EncoderUnavailable: return "EncoderUnavailable";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::IdOrderMismatch: return "IdOrderMismatch";
    case ErrorKind::DegeneratePrior: return "DegeneratePrior";
    case ErrorKind::MissingGeneralChoice: return "MissingGeneralChoice";
    case ErrorKind::EmptySpace: return "EmptySpace";
    case ErrorKind::MissingMemberRun: return "MissingMemberRun";
    case ErrorKind::DatasetNotFound: return "DatasetNotFound";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidHyperParams:
    case ErrorKind::MissingGeneralChoice:
    case ErrorKind::EmptySpace:
    case ErrorKind::InvalidSchema:
    case ErrorKind::InvalidMapping:
      return ErrorCategory::Config;
    case ErrorKind::DivergedLoss:
    case ErrorKind::EncoderUnavailable:
      return ErrorCategory::Train;
    case ErrorKind::MissingMemberRun:
    case ErrorKind::DatasetNotFound:
    case ErrorKind::CorruptCheckpoint:
      return ErrorCategory::MissingArtifact;
    default:
      return ErrorCategory::Data;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind) {}

}  // namespace depkit
