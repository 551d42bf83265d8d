#include <doctest.h>

#include "toolgym/episode.hpp"
#include "toolgym/error.hpp"

using namespace toolgym;
using namespace toolgym::episode;

namespace {

std::string point(const std::string& what) {
  return protocol::tool_call_text("look", {"Point", {{"image", "img_1"}, {"description", what}}});
}

std::string answer(const std::string& a) { return protocol::response_text("done", "\\boxed{" + a + "}"); }

}  // namespace

TEST_CASE("config validation and json") {
  EpisodeConfig c;
  CHECK_NOTHROW(c.validate());
  c.size = 10;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("InfeasibleConfig"), Error);
  c.size = 3;
  c.holes = 8;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("InfeasibleConfig"), Error);
  c.holes = 2;
  c.max_turns = 0;
  CHECK_THROWS_AS(c.validate(), Error);

  EpisodeConfig d;
  d.task = TaskKind::Jigsaw;
  d.seed = 99;
  d.schema_seed = 4;
  d.weights.lambda_tool = 1.5;
  d.weights.value_check = reward::ValueCheck::Execution;
  const EpisodeConfig e = EpisodeConfig::from_json(d.to_json());
  CHECK(e.to_json() == d.to_json());
  CHECK_THROWS_WITH_AS(EpisodeConfig::from_json({{"task", "chess"}}), doctest::Contains("BadRequest"), Error);
  CHECK_THROWS_WITH_AS(EpisodeConfig::from_json({{"seed", "x"}}), doctest::Contains("BadRequest"), Error);
  for (TaskKind k : {TaskKind::VspNav, TaskKind::VspVerify, TaskKind::Jigsaw, TaskKind::GuiQa})
    CHECK(task_from_string(to_string(k)) == k);
}

TEST_CASE("instances per task") {
  for (TaskKind k : {TaskKind::VspNav, TaskKind::VspVerify, TaskKind::Jigsaw, TaskKind::GuiQa}) {
    EpisodeConfig c;
    c.task = k;
    c.seed = 5;
    const TaskInstance inst = build_instance(c);
    CHECK_FALSE(inst.images.empty());
    CHECK(inst.user_prompt.find("\\boxed") != std::string::npos);
    CHECK(check_answer(inst, inst.answer_text()));
    CHECK_FALSE(check_answer(inst, std::nullopt));
    CHECK_FALSE(check_answer(inst, "zzz"));
    CHECK(inst.ground_truth().contains("answer"));
  }
  EpisodeConfig j;
  j.task = TaskKind::Jigsaw;
  CHECK(build_instance(j).images.size() == 3);
}

TEST_CASE("registry binding") {
  EpisodeConfig c;
  CHECK(registry_for(c).registry.size() == 7);
  CHECK_FALSE(registry_for(c).mapping.has_value());
  c.include_astar = false;
  CHECK(registry_for(c).registry.find("AStar") == nullptr);
  c.include_astar = true;
  c.schema_seed = 3;
  const SchemaBinding b = registry_for(c);
  REQUIRE(b.mapping.has_value());
  CHECK(b.registry.find("AStar") == nullptr);
  CHECK(b.registry.find(b.mapping->forward().at("AStar")) != nullptr);
  CHECK(system_prompt(b.registry).find(b.mapping->forward().at("Point")) != std::string::npos);
}

TEST_CASE("episode lifecycle") {
  EpisodeConfig c;
  c.task = TaskKind::VspNav;
  c.seed = 11;
  Episode ep(c);
  CHECK(ep.images().size() == 1);

  StepOutcome o = ep.step(point("start"));
  CHECK(o.status == StepStatus::ToolObservation);
  CHECK_FALSE(o.breakdown.has_value());

  o = ep.step("no tags at all");
  CHECK(o.status == StepStatus::ProtocolError);
  CHECK(json::parse(o.observation)["error_kind"] == "FormatError");
  CHECK_FALSE(ep.terminal());

  o = ep.step(protocol::tool_call_text("d", {"Draw2DPath", {{"image", "img_1"}, {"start", {50, 50}}, {"directions", {"R"}}}}));
  REQUIRE(o.new_image_index.has_value());
  CHECK(*o.new_image_index == 2);
  CHECK(ep.images().size() == 2);

  o = ep.step(answer(ep.instance().answer_text()));
  CHECK(o.status == StepStatus::Terminal);
  REQUIRE(o.breakdown.has_value());
  CHECK(o.answer_correct);
  CHECK(o.breakdown->format == 0);  // the malformed turn nullifies
  CHECK(o.breakdown->total == 0.0);
  CHECK(ep.terminal());
  CHECK_THROWS_WITH_AS(ep.step(point("goal")), doctest::Contains("EpisodeFinished"), Error);
  CHECK(offline_breakdown(c, ep.trajectory()) == *o.breakdown);
}

TEST_CASE("clean episode earns the full reward") {
  EpisodeConfig c;
  c.task = TaskKind::VspNav;
  c.seed = 2;
  Episode ep(c);
  ep.step(point("start"));
  ep.step(point("goal"));
  const StepOutcome o = ep.step(answer(ep.instance().answer_text()));
  REQUIRE(o.breakdown.has_value());
  CHECK(o.breakdown->total == 9.0);
  CHECK(o.breakdown->turn_count == 2);
}

TEST_CASE("max_turns ends the episode with no accuracy") {
  EpisodeConfig c;
  c.max_turns = 3;
  Episode ep(c);
  ep.step(point("start"));
  ep.step(point("goal"));
  const StepOutcome o = ep.step(point("holes"));
  CHECK(o.status == StepStatus::Terminal);
  REQUIRE(o.breakdown.has_value());
  CHECK(o.breakdown->acc == 0.0);
  CHECK_FALSE(o.answer_correct);
  CHECK(o.breakdown->total == 8.0);
}

TEST_CASE("randomized schemas accept only renamed calls") {
  EpisodeConfig c;
  c.schema_seed = 21;
  Episode ep(c);
  const auto& m = *ep.mapping();
  StepOutcome o = ep.step(point("start"));
  CHECK(json::parse(o.observation)["error_kind"] == "UnknownTool");
  o = ep.step(protocol::tool_call_text(
      "x", {m.forward().at("Point"), {{m.forward().at("image"), "img_1"}, {m.forward().at("description"), "start"}}}));
  CHECK_FALSE(json::parse(o.observation).contains("error_kind"));
  o = ep.step(answer(ep.instance().answer_text()));
  CHECK(o.breakdown->per_call_scores == std::vector<double>{1.0, 4.0});
  CHECK(offline_breakdown(c, ep.trajectory()) == *o.breakdown);
}
