#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "toolgym/toolkit.hpp"

namespace toolgym::protocol {

// Wire-frozen turn grammar, version 1:
//   ws* <think>TEXT</think> ws* ( <tool_call>JSON</tool_call> | <response>TEXT</response> ) ws*
// JSON is {"name": <string>, "parameters": {<string>: <value>, ...}} and nothing else.
inline constexpr int kGrammarVersion = 1;
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kToolCallOpen = "<tool_call>";
inline constexpr std::string_view kToolCallClose = "</tool_call>";
inline constexpr std::string_view kResponseOpen = "<response>";
inline constexpr std::string_view kResponseClose = "</response>";

struct ToolCallAction {
  bool wrapped = false;  // body enclosed in matching tool_call tags
  std::string body;      // text between the tags, or the bare attempt when unwrapped
  std::optional<ToolCallRequest> request;  // present when body is a well-formed call object

  friend bool operator==(const ToolCallAction& a, const ToolCallAction& b) {
    return a.wrapped == b.wrapped && a.body == b.body && a.request.has_value() == b.request.has_value() &&
           (!a.request || (a.request->name == b.request->name && a.request->parameters == b.request->parameters));
  }
};

struct FinalResponse {
  std::string text;
  std::optional<std::string> boxed_answer;

  friend bool operator==(const FinalResponse&, const FinalResponse&) = default;
};

using ParsedAction = std::variant<std::monostate, ToolCallAction, FinalResponse>;

struct Observation {
  bool ok = false;
  std::optional<ErrorKind> error_kind;
  std::optional<ToolId> tool;
  std::string text;
  std::optional<std::size_t> new_image_index;  // 1-based img_<n> of an appended image

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct Turn {
  std::string raw_text;
  std::string think;
  ParsedAction action;
  std::optional<Observation> observation;
  bool format_ok = false;
  std::string format_error;

  bool is_tool_call() const { return std::holds_alternative<ToolCallAction>(action); }
  bool is_response() const { return std::holds_alternative<FinalResponse>(action); }
};

struct ImageInfo {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

struct Trajectory {
  std::vector<Turn> turns;
  std::vector<ImageInfo> images;  // every dialogue image in order; img_1 first
  std::size_t initial_images = 1;
  bool terminal = false;
};

struct CallDiagnostics {
  std::size_t turn_index = 0;
  bool wrapped = false;
  bool name_known = false;
  int name_hits = 0;
  int param_total = 0;
  int value_hits = 0;
  std::optional<bool> executed_ok;  // from the recorded observation, if any

  friend bool operator==(const CallDiagnostics&, const CallDiagnostics&) = default;
};

struct ValidationReport {
  std::vector<bool> format_flags;
  std::vector<std::string> format_errors;
  std::vector<CallDiagnostics> calls;

  bool all_formatted() const;
};

// Total: malformed input yields format_ok = false with a reason, never throws.
Turn parse_turn(std::string_view raw);

// Last \boxed{...} occurrence with balanced braces.
std::optional<std::string> extract_boxed(std::string_view text);

std::string tool_call_text(std::string_view think, const ToolCallRequest& request);
std::string response_text(std::string_view think, std::string_view response);
// Rebuilds the raw text of a well-formed turn from its parts.
std::string serialize_turn(const Turn& turn);

// Structural diagnostics for one tool-call attempt.
CallDiagnostics diagnose_call(const ToolCallAction& call, const ToolRegistry& registry,
                              std::span<const std::pair<int, int>> image_dims);

// Pure: re-parses every raw turn and recomputes flags and call diagnostics.
ValidationReport validate_trajectory(const Trajectory& traj, const ToolRegistry& registry);

json observation_to_json(const Observation& obs);
Observation observation_from_json(const json& j);

// Raw turn texts, observations and image sizes; parsed fields are rebuilt on load.
json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const json& j);

}  // namespace toolgym::protocol
