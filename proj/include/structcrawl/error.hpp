#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace structcrawl {

enum class ErrorKind {
  MalformedDocument,
  EmptyVocabulary,
  DimensionMismatch,
  DegenerateDistances,
  EmptyTrainingSet,
  EmptySample,
  FetchFailure,
  LabelMismatch,
  ZeroGraph,
  TargetClassificationFailed,
  DegenerateModel,
  UnreachableTemplate,
  UnlabeledPage,
  InvalidArgument,
  Io,
  Parse,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedDocument: return "MalformedDocument";
    case ErrorKind::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateDistances: return "DegenerateDistances";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::FetchFailure: return "FetchFailure";
    case ErrorKind::LabelMismatch: return "LabelMismatch";
    case ErrorKind::ZeroGraph: return "ZeroGraph";
    case ErrorKind::TargetClassificationFailed: return "TargetClassificationFailed";
    case ErrorKind::DegenerateModel: return "DegenerateModel";
    case ErrorKind::UnreachableTemplate: return "UnreachableTemplate";
    case ErrorKind::UnlabeledPage: return "UnlabeledPage";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

// All library failures surface as Error; kind() is the machine-readable tag.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace structcrawl
