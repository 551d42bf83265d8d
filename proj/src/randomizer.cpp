#include "toolgym/randomizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "toolgym/error.hpp"
#include "toolgym/rng.hpp"

namespace toolgym::randomize {

namespace {

constexpr std::string_view kLeadChars = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
constexpr std::string_view kTailChars =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_";

bool is_tail_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string draw_identifier(Rng& rng) {
  std::string s;
  s.push_back(kLeadChars[rng.below(kLeadChars.size())]);
  while (s.size() < kIdentifierLength) s.push_back(kTailChars[rng.below(kTailChars.size())]);
  return s;
}

const std::map<std::string, std::string>& table_for(const IdentifierMapping& m, MapDirection d) {
  return d == MapDirection::Forward ? m.forward() : m.inverse();
}

const std::string& lookup(const std::map<std::string, std::string>& table, const std::string& key,
                          std::string_view what) {
  auto it = table.find(key);
  if (it == table.end()) {
    throw Error(ErrorKind::UnmappedIdentifier, std::string(what) + " '" + key + "' has no mapping");
  }
  return it->second;
}

// Minimal JSON scanner that records the byte spans of the call name value
// and of the keys of the top-level "parameters" object.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the closing quote
  bool is_name = false;
};

class SpanScanner {
 public:
  explicit SpanScanner(std::string_view s) : s_(s) {}

  std::optional<std::vector<Span>> scan() {
    try {
      skip_ws();
      top_object();
      skip_ws();
      if (i_ != s_.size()) return std::nullopt;
      return spans_;
    } catch (const std::out_of_range&) {
      return std::nullopt;
    }
  }

 private:
  char peek() const {
    if (i_ >= s_.size()) throw std::out_of_range("eof");
    return s_[i_];
  }
  void expect(char c) {
    if (peek() != c) throw std::out_of_range("unexpected");
    ++i_;
  }
  void skip_ws() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\n' || s_[i_] == '\r')) ++i_;
  }

  // Returns [begin, end) of the string token including quotes.
  std::pair<std::size_t, std::size_t> string_token() {
    const std::size_t begin = i_;
    expect('"');
    while (peek() != '"') {
      if (peek() == '\\') ++i_;
      ++i_;
    }
    ++i_;
    return {begin, i_};
  }

  std::string decode(std::pair<std::size_t, std::size_t> tok) const {
    return json::parse(s_.substr(tok.first, tok.second - tok.first)).get<std::string>();
  }

  void value() {
    skip_ws();
    const char c = peek();
    if (c == '"') {
      string_token();
    } else if (c == '{' || c == '[') {
      const char close = c == '{' ? '}' : ']';
      ++i_;
      skip_ws();
      if (peek() == close) {
        ++i_;
        return;
      }
      for (;;) {
        if (close == '}') {
          skip_ws();
          string_token();
          skip_ws();
          expect(':');
        }
        value();
        skip_ws();
        if (peek() == ',') {
          ++i_;
          continue;
        }
        expect(close);
        return;
      }
    } else {
      while (i_ < s_.size() && std::string_view(",]} \t\n\r").find(s_[i_]) == std::string_view::npos) ++i_;
    }
  }

  void members(bool top) {
    expect('{');
    skip_ws();
    if (peek() == '}') {
      ++i_;
      return;
    }
    for (;;) {
      skip_ws();
      const auto key = string_token();
      const std::string k = decode(key);
      if (!top) spans_.push_back({key.first, key.second, false});
      skip_ws();
      expect(':');
      skip_ws();
      if (top && k == "name" && peek() == '"') {
        const auto v = string_token();
        spans_.push_back({v.first, v.second, true});
      } else if (top && k == "parameters" && peek() == '{') {
        members(false);
      } else {
        value();
      }
      skip_ws();
      if (peek() == ',') {
        ++i_;
        continue;
      }
      expect('}');
      return;
    }
  }

  void top_object() { members(true); }

  std::string_view s_;
  std::size_t i_ = 0;
  std::vector<Span> spans_;
};

std::string rewrite_body(std::string_view body, const IdentifierMapping& mapping, MapDirection direction) {
  auto spans = SpanScanner(body).scan();
  if (!spans) return std::string(body);
  const auto& table = table_for(mapping, direction);
  std::string out(body);
  std::sort(spans->begin(), spans->end(), [](const Span& a, const Span& b) { return a.begin > b.begin; });
  for (const Span& sp : *spans) {
    const std::string key =
        json::parse(body.substr(sp.begin, sp.end - sp.begin)).get<std::string>();
    const std::string& repl = lookup(table, key, sp.is_name ? "tool" : "parameter");
    out.replace(sp.begin, sp.end - sp.begin, json(repl).dump());
  }
  return out;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

bool is_random_identifier(std::string_view s) {
  if (s.size() != kIdentifierLength) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin() + 1, s.end(), is_tail_char);
}

IdentifierMapping::IdentifierMapping(std::map<std::string, std::string> forward, std::uint64_t seed)
    : forward_(std::move(forward)), seed_(seed) {
  for (const auto& [orig, repl] : forward_) {
    if (!is_random_identifier(repl)) {
      throw Error(ErrorKind::InvalidArgument, "replacement '" + repl + "' is not a valid identifier");
    }
    if (forward_.count(repl)) {
      throw Error(ErrorKind::InvalidArgument, "replacement '" + repl + "' collides with an original");
    }
    if (!inverse_.emplace(repl, orig).second) {
      throw Error(ErrorKind::InvalidArgument, "mapping is not injective at '" + repl + "'");
    }
  }
}

json IdentifierMapping::to_json() const {
  return {{"seed", seed_}, {"forward", forward_}};
}

IdentifierMapping IdentifierMapping::from_json(const json& j) {
  try {
    return IdentifierMapping(j.at("forward").get<std::map<std::string, std::string>>(),
                             j.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad mapping json: ") + e.what());
  }
}

std::string fnv1a_hex(std::string_view text) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::uint64_t h = fnv1a(text);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = kHex[h & 0xF];
  return out;
}

RandomizedSchemaSet randomize_identifiers(const ToolRegistry& registry, std::uint64_t seed) {
  std::set<std::string> originals;
  for (const ToolSchema& s : registry.schemas()) {
    originals.insert(s.name);
    for (const ParamSpec& p : s.params) originals.insert(p.name);
  }
  Rng rng(Rng::derive(seed, 0x5C4E3A));
  std::set<std::string> used;
  std::map<std::string, std::string> forward;
  for (const std::string& orig : originals) {
    std::string id;
    do {
      id = draw_identifier(rng);
    } while (originals.count(id) || used.count(id));
    used.insert(id);
    forward.emplace(orig, id);
  }

  std::vector<ToolSchema> renamed;
  std::vector<DescriptionRecord> descriptions;
  for (const ToolSchema& s : registry.schemas()) {
    ToolSchema r = s;
    r.name = forward.at(s.name);
    descriptions.push_back({s.description, fnv1a_hex(s.description), false});
    for (ParamSpec& p : r.params) {
      descriptions.push_back({p.description, fnv1a_hex(p.description), false});
      p.name = forward.at(p.name);
    }
    renamed.push_back(std::move(r));
  }
  return {ToolRegistry(std::move(renamed)), IdentifierMapping(std::move(forward), seed), std::move(descriptions)};
}

ToolCallRequest apply_mapping(const ToolCallRequest& call, const IdentifierMapping& mapping,
                              MapDirection direction) {
  const auto& table = table_for(mapping, direction);
  ToolCallRequest out;
  out.name = lookup(table, call.name, "tool");
  out.parameters = json::object();
  for (const auto& [key, val] : call.parameters.items()) {
    out.parameters[lookup(table, key, "parameter")] = val;
  }
  return out;
}

std::string apply_mapping_to_turn(std::string_view raw, const IdentifierMapping& mapping,
                                  MapDirection direction) {
  const protocol::Turn turn = protocol::parse_turn(raw);
  const auto* call = std::get_if<protocol::ToolCallAction>(&turn.action);
  if (!call || !call->wrapped || !call->request) return std::string(raw);

  const std::size_t think_end = raw.find(protocol::kThinkClose);
  const std::size_t open =
      raw.find(protocol::kToolCallOpen, think_end == std::string_view::npos ? 0 : think_end);
  if (open == std::string_view::npos) return std::string(raw);
  const std::size_t body_begin = open + protocol::kToolCallOpen.size();
  const std::size_t body_end = raw.find(protocol::kToolCallClose, body_begin);
  if (body_end == std::string_view::npos) return std::string(raw);

  std::string out(raw.substr(0, body_begin));
  out += rewrite_body(raw.substr(body_begin, body_end - body_begin), mapping, direction);
  out += raw.substr(body_end);
  return out;
}

protocol::Trajectory apply_mapping(const protocol::Trajectory& traj, const IdentifierMapping& mapping,
                                   MapDirection direction) {
  protocol::Trajectory out = traj;
  for (protocol::Turn& t : out.turns) {
    std::optional<protocol::Observation> obs = std::move(t.observation);
    t = protocol::parse_turn(apply_mapping_to_turn(t.raw_text, mapping, direction));
    t.observation = std::move(obs);
  }
  return out;
}

std::optional<std::string> FallbackParaphraser::paraphrase(std::string_view text) {
  static const std::array<std::pair<std::string_view, std::string_view>, 22> kSynonyms{{
      {"Locate", "Find"},
      {"locate", "find"},
      {"image", "picture"},
      {"Image", "Picture"},
      {"returns", "gives back"},
      {"Returns", "Gives back"},
      {"region", "area"},
      {"shortest", "minimal"},
      {"path", "route"},
      {"coordinates", "positions"},
      {"coordinate", "position"},
      {"Draw", "Render"},
      {"draw", "render"},
      {"Compute", "Work out"},
      {"compute", "work out"},
      {"Detect", "Spot"},
      {"detect", "spot"},
      {"Read", "Extract"},
      {"list", "sequence"},
      {"object", "item"},
      {"target", "goal"},
      {"reference", "handle"},
  }};
  static const std::array<std::string_view, 4> kFrames{
      "This tool will ", "Use it to ", "Purpose: ", "In short, it will "};

  if (text.empty()) return std::nullopt;

  // Word-level substitution; non-letters pass through unchanged.
  std::string body;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
      body.push_back(text[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    const std::string_view word = text.substr(i, j - i);
    auto it = std::find_if(kSynonyms.begin(), kSynonyms.end(),
                           [&](const auto& kv) { return kv.first == word; });
    body += it == kSynonyms.end() ? word : it->second;
    i = j;
  }

  const std::string_view frame = kFrames[fnv1a(text) % kFrames.size()];
  if (frame != "Purpose: " && !body.empty() && std::isupper(static_cast<unsigned char>(body[0])) &&
      !(body.size() > 1 && std::isupper(static_cast<unsigned char>(body[1])))) {
    body[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(body[0])));
  }
  std::string out(frame);
  out += body;
  if (out.back() != '.') out.push_back('.');
  return out;
}

RandomizedSchemaSet paraphrase_descriptions(const RandomizedSchemaSet& schemas, ParaphraseEngine* engine) {
  if (engine == nullptr || !engine->available()) {
    throw Error(ErrorKind::ParaphraseUnavailable, "no paraphrase engine available");
  }
  RandomizedSchemaSet out = schemas;
  std::vector<ToolSchema> tools(out.registry.schemas().begin(), out.registry.schemas().end());
  std::size_t k = 0;
  auto rewrite = [&](std::string& text) {
    DescriptionRecord& rec = out.descriptions.at(k++);
    rec.flagged = false;
    std::optional<std::string> p;
    if (!text.empty()) {
      try {
        p = engine->paraphrase(text);
      } catch (const std::exception&) {
        p.reset();
      }
    }
    if (!p || p->empty()) {
      rec.text = text;
      rec.flagged = true;
      return;
    }
    text = *p;
    rec.text = *p;
  };
  for (ToolSchema& s : tools) {
    rewrite(s.description);
    for (ParamSpec& p : s.params) rewrite(p.description);
  }
  out.registry = ToolRegistry(std::move(tools));
  return out;
}

RandomizedSchemaSet randomize_schemas(const ToolRegistry& registry, std::uint64_t seed) {
  FallbackParaphraser engine;
  return paraphrase_descriptions(randomize_identifiers(registry, seed), &engine);
}

}  // namespace toolgym::randomize
