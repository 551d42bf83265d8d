#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace toolgym {

// Every failure surfaced by the library carries one of these kinds. The
// string form is what goes over the wire as "error_kind".
enum class ErrorKind {
  InvalidDimension,
  OutOfBounds,
  DegeneratePath,
  ShapeMismatch,
  InfeasibleConfig,
  NoPath,
  InvalidAnswer,
  InvalidArgument,
  TargetNotFound,
  OracleUnavailable,
  UnknownTool,
  UnknownParam,
  MissingParam,
  BadValue,
  BadImageRef,
  DegenerateGroup,
  MissingReference,
  UnmappedIdentifier,
  ParaphraseUnavailable,
  BlueprintError,
  InstantiationError,
  RejectedRecord,
  NoSuchEpisode,
  EpisodeFinished,
  Busy,
  Unavailable,
  BadRequest,
  ToolFailure,
  FormatError,
};

std::string_view to_string(ErrorKind kind);
std::optional<ErrorKind> error_kind_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace toolgym
