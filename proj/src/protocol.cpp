#include "toolgym/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace toolgym::protocol {

namespace {

constexpr std::string_view kAllTags[] = {kThinkOpen,  kThinkClose,  kToolCallOpen,
                                         kToolCallClose, kResponseOpen, kResponseClose};

std::size_t skip_ws(std::string_view s, std::size_t pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return pos;
}

bool starts_with_at(std::string_view s, std::size_t pos, std::string_view lit) {
  return s.size() >= pos + lit.size() && s.substr(pos, lit.size()) == lit;
}

bool contains_tag(std::string_view s) {
  return std::any_of(std::begin(kAllTags), std::end(kAllTags),
                     [&](std::string_view tag) { return s.find(tag) != std::string_view::npos; });
}

bool only_ws(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

// Parses a call body. Returns the request and an empty reason on success.
std::optional<ToolCallRequest> parse_call_body(std::string_view body, std::string& reason) {
  const json parsed = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    reason = "tool_call body is not valid JSON";
    return std::nullopt;
  }
  if (!parsed.is_object()) {
    reason = "tool_call body must be a JSON object";
    return std::nullopt;
  }
  for (const auto& [key, value] : parsed.items()) {
    if (key != "name" && key != "parameters") {
      reason = "unexpected key '" + key + "' in tool_call";
      return std::nullopt;
    }
  }
  auto name = parsed.find("name");
  if (name == parsed.end() || !name->is_string()) {
    reason = "tool_call needs a string \"name\"";
    return std::nullopt;
  }
  auto params = parsed.find("parameters");
  if (params == parsed.end() || !params->is_object()) {
    reason = "tool_call needs an object \"parameters\"";
    return std::nullopt;
  }
  return ToolCallRequest{name->get<std::string>(), *params};
}

// Best-effort action recovery for malformed turns, so diagnostics still see
// attempted calls.
ParsedAction salvage_action(std::string_view rest) {
  const auto open = rest.find(kToolCallOpen);
  if (open != std::string_view::npos) {
    const auto body_start = open + kToolCallOpen.size();
    const auto close = rest.find(kToolCallClose, body_start);
    ToolCallAction call;
    if (close != std::string_view::npos) {
      call.wrapped = true;
      call.body = std::string(rest.substr(body_start, close - body_start));
    } else {
      call.body = std::string(rest.substr(body_start));
    }
    std::string ignored;
    call.request = parse_call_body(call.body, ignored);
    return call;
  }
  const auto resp = rest.find(kResponseOpen);
  if (resp != std::string_view::npos) {
    const auto body_start = resp + kResponseOpen.size();
    const auto close = rest.find(kResponseClose, body_start);
    FinalResponse r;
    r.text = std::string(rest.substr(body_start, close == std::string_view::npos ? std::string_view::npos
                                                                                   : close - body_start));
    r.boxed_answer = extract_boxed(r.text);
    return r;
  }
  if (rest.find("\"name\"") != std::string_view::npos && rest.find('{') != std::string_view::npos) {
    ToolCallAction call;
    call.wrapped = false;
    call.body = std::string(rest.substr(rest.find('{')));
    return call;
  }
  return std::monostate{};
}

Turn fail(Turn turn, std::string reason, std::string_view rest) {
  turn.format_ok = false;
  turn.format_error = std::move(reason);
  if (std::holds_alternative<std::monostate>(turn.action)) turn.action = salvage_action(rest);
  return turn;
}

}  // namespace

bool ValidationReport::all_formatted() const {
  return std::all_of(format_flags.begin(), format_flags.end(), [](bool f) { return f; });
}

std::optional<std::string> extract_boxed(std::string_view text) {
  constexpr std::string_view marker = "\\boxed{";
  const auto at = text.rfind(marker);
  if (at == std::string_view::npos) return std::nullopt;
  int depth = 1;
  const std::size_t start = at + marker.size();
  for (std::size_t i = start; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return std::string(text.substr(start, i - start));
  }
  return std::nullopt;
}

Turn parse_turn(std::string_view raw) {
  Turn turn;
  turn.raw_text = std::string(raw);

  std::size_t pos = skip_ws(raw, 0);
  if (!starts_with_at(raw, pos, kThinkOpen)) return fail(std::move(turn), "turn must begin with <think>", raw);
  const std::size_t think_start = pos + kThinkOpen.size();
  const std::size_t think_end = raw.find(kThinkClose, think_start);
  if (think_end == std::string_view::npos) return fail(std::move(turn), "missing </think>", raw.substr(think_start));
  turn.think = std::string(raw.substr(think_start, think_end - think_start));
  const std::string_view rest = raw.substr(think_end + kThinkClose.size());
  if (contains_tag(turn.think)) return fail(std::move(turn), "tag inside think block", rest);

  pos = skip_ws(raw, think_end + kThinkClose.size());
  if (starts_with_at(raw, pos, kToolCallOpen)) {
    const std::size_t body_start = pos + kToolCallOpen.size();
    const std::size_t body_end = raw.find(kToolCallClose, body_start);
    ToolCallAction call;
    if (body_end == std::string_view::npos) {
      call.body = std::string(raw.substr(body_start));
      turn.action = std::move(call);
      return fail(std::move(turn), "missing </tool_call>", rest);
    }
    call.wrapped = true;
    call.body = std::string(raw.substr(body_start, body_end - body_start));
    std::string reason;
    call.request = parse_call_body(call.body, reason);
    turn.action = call;
    if (!only_ws(raw.substr(body_end + kToolCallClose.size()))) {
      return fail(std::move(turn), "content after </tool_call>", rest);
    }
    if (contains_tag(call.body)) return fail(std::move(turn), "tag inside tool_call", rest);
    if (!call.request) return fail(std::move(turn), reason, rest);
    turn.format_ok = true;
    return turn;
  }
  if (starts_with_at(raw, pos, kResponseOpen)) {
    const std::size_t body_start = pos + kResponseOpen.size();
    const std::size_t body_end = raw.find(kResponseClose, body_start);
    if (body_end == std::string_view::npos) return fail(std::move(turn), "missing </response>", rest);
    FinalResponse response;
    response.text = std::string(raw.substr(body_start, body_end - body_start));
    response.boxed_answer = extract_boxed(response.text);
    turn.action = response;
    if (!only_ws(raw.substr(body_end + kResponseClose.size()))) {
      return fail(std::move(turn), "content after </response>", rest);
    }
    if (contains_tag(response.text)) return fail(std::move(turn), "tag inside response", rest);
    turn.format_ok = true;
    return turn;
  }
  return fail(std::move(turn), "expected <tool_call> or <response> after </think>", rest);
}

std::string tool_call_text(std::string_view think, const ToolCallRequest& request) {
  std::string out;
  out += kThinkOpen;
  out += think;
  out += kThinkClose;
  out += '\n';
  out += kToolCallOpen;
  out += request.to_json().dump();
  out += kToolCallClose;
  return out;
}

std::string response_text(std::string_view think, std::string_view response) {
  std::string out;
  out += kThinkOpen;
  out += think;
  out += kThinkClose;
  out += '\n';
  out += kResponseOpen;
  out += response;
  out += kResponseClose;
  return out;
}

std::string serialize_turn(const Turn& turn) {
  if (const auto* call = std::get_if<ToolCallAction>(&turn.action)) {
    std::string out;
    out += kThinkOpen;
    out += turn.think;
    out += kThinkClose;
    out += '\n';
    out += kToolCallOpen;
    out += call->body;
    out += kToolCallClose;
    return out;
  }
  if (const auto* resp = std::get_if<FinalResponse>(&turn.action)) {
    return response_text(turn.think, resp->text);
  }
  return turn.raw_text;
}

CallDiagnostics diagnose_call(const ToolCallAction& call, const ToolRegistry& registry,
                              std::span<const std::pair<int, int>> image_dims) {
  CallDiagnostics d;
  d.wrapped = call.wrapped && call.request.has_value();
  if (!d.wrapped) return d;
  const ToolCallRequest& req = *call.request;
  const ToolSchema* schema = registry.find(req.name);
  d.name_known = schema != nullptr;
  if (!schema) return d;

  std::set<std::string> names;
  for (const ParamSpec& p : schema->params) names.insert(p.name);
  int hits = 0;
  for (const auto& [key, value] : req.parameters.items()) {
    if (names.count(key) > 0) {
      ++hits;
    } else {
      names.insert(key);
    }
  }
  d.name_hits = hits;
  d.param_total = static_cast<int>(names.size());

  const ValueContext vctx = value_context_for(*schema, req.parameters, image_dims);
  for (const ParamSpec& p : schema->params) {
    auto it = req.parameters.find(p.name);
    if (it != req.parameters.end() && value_valid(p.kind, *it, vctx)) ++d.value_hits;
  }
  return d;
}

ValidationReport validate_trajectory(const Trajectory& traj, const ToolRegistry& registry) {
  ValidationReport report;
  std::vector<std::pair<int, int>> dims;
  const std::size_t initial = std::min(traj.initial_images, traj.images.size());
  for (std::size_t i = 0; i < initial; ++i) dims.emplace_back(traj.images[i].width, traj.images[i].height);
  std::size_t next_image = initial;

  for (std::size_t k = 0; k < traj.turns.size(); ++k) {
    const Turn& recorded = traj.turns[k];
    Turn turn = parse_turn(recorded.raw_text);
    bool flag = turn.format_ok;
    std::string reason = turn.format_error;
    if (flag && turn.is_response() && k + 1 != traj.turns.size()) {
      flag = false;
      reason = "response before the final turn";
    }
    report.format_flags.push_back(flag);
    report.format_errors.push_back(reason);

    if (const auto* call = std::get_if<ToolCallAction>(&turn.action)) {
      CallDiagnostics d = diagnose_call(*call, registry, dims);
      d.turn_index = k;
      if (recorded.observation) d.executed_ok = recorded.observation->ok;
      report.calls.push_back(d);
    }
    if (recorded.observation && recorded.observation->new_image_index && next_image < traj.images.size()) {
      dims.emplace_back(traj.images[next_image].width, traj.images[next_image].height);
      ++next_image;
    }
  }
  return report;
}

json observation_to_json(const Observation& obs) {
  json j{{"ok", obs.ok}, {"text", obs.text}};
  j["error_kind"] = obs.error_kind ? json(std::string(to_string(*obs.error_kind))) : json(nullptr);
  j["tool"] = obs.tool ? json(std::string(canonical_name(*obs.tool))) : json(nullptr);
  j["new_image_index"] = obs.new_image_index ? json(*obs.new_image_index) : json(nullptr);
  return j;
}

Observation observation_from_json(const json& j) {
  Observation obs;
  obs.ok = j.at("ok").get<bool>();
  obs.text = j.at("text").get<std::string>();
  if (j.contains("error_kind") && j["error_kind"].is_string()) {
    obs.error_kind = error_kind_from_string(j["error_kind"].get<std::string>());
  }
  if (j.contains("tool") && j["tool"].is_string()) obs.tool = tool_from_canonical_name(j["tool"].get<std::string>());
  if (j.contains("new_image_index") && j["new_image_index"].is_number_unsigned()) {
    obs.new_image_index = j["new_image_index"].get<std::size_t>();
  }
  return obs;
}

json trajectory_to_json(const Trajectory& traj) {
  json turns = json::array();
  for (const Turn& t : traj.turns) {
    turns.push_back({{"text", t.raw_text},
                     {"observation", t.observation ? observation_to_json(*t.observation) : json(nullptr)}});
  }
  json images = json::array();
  for (const ImageInfo& im : traj.images) images.push_back({im.width, im.height});
  return {{"turns", turns},
          {"images", images},
          {"initial_images", traj.initial_images},
          {"terminal", traj.terminal}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory traj;
  for (const json& t : j.at("turns")) {
    Turn turn = parse_turn(t.at("text").get<std::string>());
    if (t.contains("observation") && t["observation"].is_object()) {
      turn.observation = observation_from_json(t["observation"]);
    }
    traj.turns.push_back(std::move(turn));
  }
  for (const json& im : j.at("images")) traj.images.push_back({im.at(0).get<int>(), im.at(1).get<int>()});
  traj.initial_images = j.value("initial_images", std::size_t{1});
  traj.terminal = j.value("terminal", false);
  return traj;
}

}  // namespace toolgym::protocol
