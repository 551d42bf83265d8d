#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "toolgym/protocol.hpp"
#include "toolgym/toolkit.hpp"

namespace toolgym::randomize {

inline constexpr std::size_t kIdentifierLength = 8;

// True for strings matching [A-Za-z][A-Za-z0-9_]{7}.
bool is_random_identifier(std::string_view s);

// Bijection between original identifiers (tool and parameter names) and
// random replacements. One entry per distinct identifier, so a parameter
// name shared by several tools maps to the same replacement everywhere.
class IdentifierMapping {
 public:
  IdentifierMapping() = default;
  IdentifierMapping(std::map<std::string, std::string> forward, std::uint64_t seed);

  const std::map<std::string, std::string>& forward() const { return forward_; }
  const std::map<std::string, std::string>& inverse() const { return inverse_; }
  std::uint64_t seed() const { return seed_; }

  json to_json() const;
  static IdentifierMapping from_json(const json& j);

  friend bool operator==(const IdentifierMapping&, const IdentifierMapping&) = default;

 private:
  std::map<std::string, std::string> forward_;
  std::map<std::string, std::string> inverse_;
  std::uint64_t seed_ = 0;
};

enum class MapDirection { Forward, Inverse };

struct DescriptionRecord {
  std::string text;
  std::string source_hash;  // FNV-1a 64 of the original text, hex
  bool flagged = false;     // paraphrase failed or input was empty; text is the original

  friend bool operator==(const DescriptionRecord&, const DescriptionRecord&) = default;
};

struct RandomizedSchemaSet {
  ToolRegistry registry;
  IdentifierMapping mapping;
  // Tool description followed by its parameter descriptions, tool by tool.
  std::vector<DescriptionRecord> descriptions;
};

std::string fnv1a_hex(std::string_view text);

// Deterministic in seed. Renames every tool and parameter; descriptions untouched.
RandomizedSchemaSet randomize_identifiers(const ToolRegistry& registry, std::uint64_t seed);

ToolCallRequest apply_mapping(const ToolCallRequest& call, const IdentifierMapping& mapping,
                              MapDirection direction);

// Rewrites identifiers inside the tool_call of a raw turn, leaving every
// other byte untouched. Turns without a parseable call are returned as is.
std::string apply_mapping_to_turn(std::string_view raw, const IdentifierMapping& mapping,
                                  MapDirection direction);

protocol::Trajectory apply_mapping(const protocol::Trajectory& traj, const IdentifierMapping& mapping,
                                   MapDirection direction);

class ParaphraseEngine {
 public:
  virtual ~ParaphraseEngine() = default;
  virtual bool available() const { return true; }
  // nullopt (or throwing) marks a per-description failure.
  virtual std::optional<std::string> paraphrase(std::string_view text) = 0;
};

// Offline rewriter: fixed synonym table plus a sentence frame picked by a
// hash of the input. Same input, same output.
class FallbackParaphraser final : public ParaphraseEngine {
 public:
  std::optional<std::string> paraphrase(std::string_view text) override;
};

RandomizedSchemaSet paraphrase_descriptions(const RandomizedSchemaSet& schemas, ParaphraseEngine* engine);

// Identifier randomization followed by fallback paraphrasing.
RandomizedSchemaSet randomize_schemas(const ToolRegistry& registry, std::uint64_t seed);

}  // namespace toolgym::randomize
