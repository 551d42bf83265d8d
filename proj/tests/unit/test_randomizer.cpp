#include <doctest.h>

#include <set>

#include "toolgym/episode.hpp"
#include "toolgym/error.hpp"
#include "toolgym/randomizer.hpp"
#include "toolgym/rng.hpp"

using namespace toolgym;
using namespace toolgym::randomize;

namespace {

std::set<std::string> identifiers(const ToolRegistry& reg) {
  std::set<std::string> out;
  for (const ToolSchema& s : reg.schemas()) {
    out.insert(s.name);
    for (const ParamSpec& p : s.params) out.insert(p.name);
  }
  return out;
}

// A registry with random names and shapes, for property tests.
ToolRegistry random_registry(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ToolSchema> schemas;
  const int n = rng.range(1, 7);
  for (int i = 0; i < n; ++i) {
    ToolSchema s;
    s.id = kAllTools[i];
    s.name = "tool" + std::to_string(i) + "_" + std::to_string(rng.below(100));
    s.description = rng.coin() ? "Find the thing" : "";
    const int k = rng.range(0, 3);
    for (int j = 0; j < k; ++j) {
      s.params.push_back({"p" + std::to_string(rng.below(5)) + "_" + std::to_string(j), "a param", ParamKind::Text});
    }
    schemas.push_back(s);
  }
  return ToolRegistry(schemas);
}

class Broken final : public ParaphraseEngine {
 public:
  std::optional<std::string> paraphrase(std::string_view text) override {
    if (text.find("black") != std::string_view::npos) throw std::runtime_error("boom");
    if (text.find("text") != std::string_view::npos) return std::nullopt;
    return std::string("P: ") + std::string(text);
  }
};

class Offline final : public ParaphraseEngine {
 public:
  bool available() const override { return false; }
  std::optional<std::string> paraphrase(std::string_view) override { return std::nullopt; }
};

}  // namespace

TEST_CASE("identifier pattern") {
  CHECK(is_random_identifier("Func_X7a"));
  CHECK_FALSE(is_random_identifier("1unc_X7a"));
  CHECK_FALSE(is_random_identifier("Func_X7"));
  CHECK_FALSE(is_random_identifier("Func-X7a"));
}

TEST_CASE("randomize_identifiers") {
  const ToolRegistry reg = ToolRegistry::canonical();
  const RandomizedSchemaSet a = randomize_identifiers(reg, 17);
  CHECK(a.mapping == randomize_identifiers(reg, 17).mapping);
  CHECK_FALSE(a.mapping == randomize_identifiers(reg, 18).mapping);
  std::set<std::string> tool_names;
  for (const ToolSchema& s : a.registry.schemas()) {
    tool_names.insert(s.name);
    CHECK(is_random_identifier(s.name));
    const ToolSchema* orig = reg.find(s.id);
    CHECK(s.description == orig->description);
    REQUIRE(s.params.size() == orig->params.size());
    for (std::size_t i = 0; i < s.params.size(); ++i) {
      CHECK(is_random_identifier(s.params[i].name));
      CHECK(s.params[i].kind == orig->params[i].kind);
      CHECK(a.mapping.forward().at(orig->params[i].name) == s.params[i].name);
    }
  }
  CHECK(tool_names.size() == 7);
  const auto originals = identifiers(reg);
  for (const auto& [o, r] : a.mapping.forward()) {
    CHECK(originals.count(r) == 0);
    CHECK(a.mapping.inverse().at(r) == o);
  }
  CHECK(IdentifierMapping::from_json(a.mapping.to_json()) == a.mapping);
}

TEST_CASE("mapping is a bijection on random registries") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const ToolRegistry reg = random_registry(seed);
    const RandomizedSchemaSet r = randomize_identifiers(reg, seed * 31 + 1);
    const auto ids = identifiers(reg);
    CHECK(r.mapping.forward().size() == ids.size());
    CHECK(r.mapping.inverse().size() == ids.size());
    for (const auto& [o, x] : r.mapping.forward()) CHECK(r.mapping.inverse().at(x) == o);
    CHECK(identifiers(r.registry).size() == ids.size());
  }
}

TEST_CASE("mapping constructor rejects bad maps") {
  CHECK_THROWS(IdentifierMapping({{"a", "Abcdefgh"}, {"b", "Abcdefgh"}}, 0));
  CHECK_THROWS(IdentifierMapping({{"a", "short"}}, 0));
}

TEST_CASE("apply_mapping on calls") {
  const RandomizedSchemaSet r = randomize_identifiers(ToolRegistry::canonical(), 5);
  const ToolCallRequest call{"Crop", {{"image", "img_1"}, {"bbox", {0, 0, 10, 10}}}};
  const ToolCallRequest fwd = apply_mapping(call, r.mapping, MapDirection::Forward);
  CHECK(fwd.name == r.mapping.forward().at("Crop"));
  CHECK(fwd.parameters.at(r.mapping.forward().at("bbox")) == json({0, 0, 10, 10}));
  const ToolCallRequest back = apply_mapping(fwd, r.mapping, MapDirection::Inverse);
  CHECK(back.name == call.name);
  CHECK(back.parameters == call.parameters);
  CHECK_THROWS_WITH_AS(apply_mapping(ToolCallRequest{"Teleport", json::object()}, r.mapping, MapDirection::Forward),
                       doctest::Contains("UnmappedIdentifier"), Error);
}

TEST_CASE("apply_mapping on raw turns preserves every other byte") {
  const RandomizedSchemaSet r = randomize_identifiers(ToolRegistry::canonical(), 9);
  const std::string raw =
      "  <think>use Crop on image</think>\n<tool_call> {\"name\" : \"Crop\",\n \"parameters\":{\"image\":\"img_1\", "
      "\"bbox\":[1, 2,3,4]}}</tool_call>\n";
  const std::string fwd = apply_mapping_to_turn(raw, r.mapping, MapDirection::Forward);
  const std::string crop = r.mapping.forward().at("Crop");
  CHECK(fwd.find("\"" + crop + "\"") != std::string::npos);
  CHECK(fwd.find("use Crop on image") != std::string::npos);  // think text untouched
  CHECK(fwd.find("[1, 2,3,4]") != std::string::npos);
  CHECK(apply_mapping_to_turn(fwd, r.mapping, MapDirection::Inverse) == raw);
  const std::string resp = "<think>a</think><response>\\boxed{Crop}</response>";
  CHECK(apply_mapping_to_turn(resp, r.mapping, MapDirection::Forward) == resp);
}

TEST_CASE("trajectory round trip") {
  episode::EpisodeConfig cfg;
  cfg.task = episode::TaskKind::VspNav;
  episode::Episode ep(cfg);
  ep.step(protocol::tool_call_text("s", {"Point", {{"image", "img_1"}, {"description", "start"}}}));
  ep.step("<think>oops");
  ep.step(protocol::tool_call_text("g", {"Point", {{"image", "img_1"}, {"description", "goal"}}}));
  const RandomizedSchemaSet r = randomize_identifiers(ToolRegistry::canonical(), 2);
  const protocol::Trajectory f = apply_mapping(ep.trajectory(), r.mapping, MapDirection::Forward);
  const protocol::Trajectory b = apply_mapping(f, r.mapping, MapDirection::Inverse);
  REQUIRE(b.turns.size() == ep.trajectory().turns.size());
  for (std::size_t i = 0; i < b.turns.size(); ++i) {
    CHECK(b.turns[i].raw_text == ep.trajectory().turns[i].raw_text);
    CHECK(b.turns[i].observation == ep.trajectory().turns[i].observation);
  }
  CHECK(f.turns[0].raw_text != ep.trajectory().turns[0].raw_text);
}

TEST_CASE("dispatch equivalence under randomized schemas") {
  const RandomizedSchemaSet r = randomize_identifiers(ToolRegistry::canonical(), 12);
  vsp::GridMap map = vsp::generate_map(4, 3, 1);
  std::vector<DialogueImage> images{{vsp::render_map(map), std::nullopt}};
  ToolContext ctx;
  ctx.images = images;
  ctx.truth = PointTruth{map, std::nullopt, 400, 400};
  std::vector<json> obstacles;
  for (auto h : map.holes) obstacles.push_back({map.center_of(h).x, map.center_of(h).y});
  const std::vector<ToolCallRequest> calls{
      {"Point", {{"image", "img_1"}, {"description", "holes"}}},
      {"AStar", {{"start", {map.center_of(map.start).x, map.center_of(map.start).y}},
                 {"goal", {map.center_of(map.goal).x, map.center_of(map.goal).y}},
                 {"obstacles", obstacles}}},
      {"Draw2DPath", {{"image", "img_1"}, {"start", {50, 50}}, {"directions", {"R", "D"}}}},
      {"Crop", {{"image", "img_1"}, {"bbox", {0, 0, 200, 100}}}},
      {"DetectBlackArea", {{"image", "img_1"}}},
      {"Crop", {{"image", "img_2"}, {"bbox", {0, 0, 200, 100}}}},
  };
  for (const auto& c : calls) {
    const ToolResult a = dispatch(c, ToolRegistry::canonical(), ctx);
    const ToolResult b = dispatch(apply_mapping(c, r.mapping, MapDirection::Forward), r.registry, ctx);
    CHECK(a.ok == b.ok);
    CHECK(a.error_kind == b.error_kind);
    CHECK(a.payload == b.payload);
    CHECK(a.new_image.has_value() == b.new_image.has_value());
    if (a.new_image) CHECK(a.new_image->image == b.new_image->image);
  }
}

TEST_CASE("paraphrasing") {
  FallbackParaphraser fb;
  const auto p = fb.paraphrase("Point to a target object");
  REQUIRE(p.has_value());
  CHECK(*p != "Point to a target object");
  CHECK(fb.paraphrase("Point to a target object") == p);

  RandomizedSchemaSet set = randomize_identifiers(ToolRegistry::canonical(), 1);
  const RandomizedSchemaSet para = paraphrase_descriptions(set, &fb);
  REQUIRE(para.descriptions.size() == set.descriptions.size());
  for (std::size_t i = 0; i < para.descriptions.size(); ++i) {
    CHECK(para.descriptions[i].source_hash == fnv1a_hex(set.descriptions[i].text));
    CHECK_FALSE(para.descriptions[i].flagged);
  }
  for (std::size_t i = 0; i < para.registry.size(); ++i) {
    CHECK(para.registry.schemas()[i].name == set.registry.schemas()[i].name);
    for (std::size_t k = 0; k < para.registry.schemas()[i].params.size(); ++k)
      CHECK(para.registry.schemas()[i].params[k].kind == set.registry.schemas()[i].params[k].kind);
  }

  Broken broken;
  const RandomizedSchemaSet mixed = paraphrase_descriptions(set, &broken);
  int flagged = 0;
  for (std::size_t i = 0; i < mixed.descriptions.size(); ++i) {
    if (mixed.descriptions[i].flagged) {
      ++flagged;
      CHECK(mixed.descriptions[i].text == set.descriptions[i].text);
    }
  }
  CHECK(flagged > 0);

  Offline off;
  CHECK_THROWS_WITH_AS(paraphrase_descriptions(set, &off), doctest::Contains("ParaphraseUnavailable"), Error);
  CHECK_THROWS_AS(paraphrase_descriptions(set, nullptr), Error);

  std::vector<ToolSchema> one{ToolRegistry::canonical().schemas()[0]};
  one[0].description = "";
  const RandomizedSchemaSet empty = paraphrase_descriptions(randomize_identifiers(ToolRegistry(one), 1), &fb);
  CHECK(empty.descriptions[0].text.empty());
  CHECK(empty.descriptions[0].flagged);
}
