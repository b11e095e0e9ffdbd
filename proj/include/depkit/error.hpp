#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace depkit {

// Every failure the library reports carries one of these kinds. The CLI maps
// the kind's category onto a process exit status.
enum class ErrorKind {
  // corpus
  MalformedRow,
  UnknownLabel,
  EmptyDataset,
  SchemaMismatch,
  InvalidSchema,
  InvalidMapping,
  DuplicateId,
  EmptyText,
  // metrics
  LengthMismatch,
  LabelOutOfRange,
  EmptyInput,
  EmptyMatrix,
  EmptyList,
  // encoder
  InvalidHyperParams,
  DivergedLoss,
  EncoderUnavailable,
  CorruptCheckpoint,
  // ensemble
  ShapeMismatch,
  IdOrderMismatch,
  DegeneratePrior,
  MissingGeneralChoice,
  // experiment
  EmptySpace,
  MissingMemberRun,
  DatasetNotFound,
  ConfigError,
  Io,
};

enum class ErrorCategory { Config, Data, Train, MissingArtifact };

std::string_view to_string(ErrorKind kind);
ErrorCategory category_of(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace depkit
