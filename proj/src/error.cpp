#include "toolgym/error.hpp"

namespace toolgym {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "InvalidDimension";
    case ErrorKind::OutOfBounds: return "OutOfBounds";
    case ErrorKind::DegeneratePath: return "DegeneratePath";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InfeasibleConfig: return "InfeasibleConfig";
    case ErrorKind::NoPath: return "NoPath";
    case ErrorKind::InvalidAnswer: return "InvalidAnswer";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::TargetNotFound: return "TargetNotFound";
    case ErrorKind::OracleUnavailable: return "OracleUnavailable";
    case ErrorKind::UnknownTool: return "UnknownTool";
    case ErrorKind::UnknownParam: return "UnknownParam";
    case ErrorKind::MissingParam: return "MissingParam";
    case ErrorKind::BadValue: return "BadValue";
    case ErrorKind::BadImageRef: return "BadImageRef";
    case ErrorKind::DegenerateGroup: return "DegenerateGroup";
    case ErrorKind::MissingReference: return "MissingReference";
    case ErrorKind::UnmappedIdentifier: return "UnmappedIdentifier";
    case ErrorKind::ParaphraseUnavailable: return "ParaphraseUnavailable";
    case ErrorKind::BlueprintError: return "BlueprintError";
    case ErrorKind::InstantiationError: return "InstantiationError";
    case ErrorKind::RejectedRecord: return "RejectedRecord";
    case ErrorKind::NoSuchEpisode: return "NoSuchEpisode";
    case ErrorKind::EpisodeFinished: return "EpisodeFinished";
    case ErrorKind::Busy: return "Busy";
    case ErrorKind::Unavailable: return "Unavailable";
    case ErrorKind::BadRequest: return "BadRequest";
    case ErrorKind::ToolFailure: return "ToolFailure";
    case ErrorKind::FormatError: return "FormatError";
  }
  return "Unknown";
}

std::optional<ErrorKind> error_kind_from_string(std::string_view name) {
  for (int k = 0; k <= static_cast<int>(ErrorKind::FormatError); ++k) {
    if (to_string(static_cast<ErrorKind>(k)) == name) return static_cast<ErrorKind>(k);
  }
  return std::nullopt;
}

}  // namespace toolgym
