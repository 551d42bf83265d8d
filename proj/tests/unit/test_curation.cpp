#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "toolgym/curation.hpp"
#include "toolgym/error.hpp"

using namespace toolgym;
using namespace toolgym::curation;
using episode::TaskKind;

namespace {

int tool_turns(const DatasetRecord& r) {
  int n = 0;
  for (const auto& t : r.trajectory.turns) n += t.is_tool_call() ? 1 : 0;
  return n;
}

std::vector<std::string> tools_called(const DatasetRecord& r) {
  std::vector<std::string> out;
  for (const auto& t : r.trajectory.turns)
    if (t.is_tool_call()) out.push_back(std::get<protocol::ToolCallAction>(t.action).request->name);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("toolgym_curation_" + name);
  std::filesystem::remove_all(p);
  return p;
}

bool all_formatted(const DatasetRecord& r) {
  episode::EpisodeConfig cfg = r.config;
  const auto report = protocol::validate_trajectory(r.trajectory, episode::registry_for(cfg).registry);
  return report.all_formatted();
}

}  // namespace

TEST_CASE("vsp_nav blueprint") {
  const auto cfg = record_config(TaskKind::VspNav, 0, 1);
  const DatasetRecord r = instantiate(vsp_nav_blueprint(), cfg, "n0");
  CHECK(tools_called(r) == std::vector<std::string>{"Point", "Point", "Point", "Draw2DPath"});
  CHECK(r.trajectory.turns.back().is_response());
  CHECK(r.correct);
  CHECK(std::get<protocol::FinalResponse>(r.trajectory.turns.back().action).boxed_answer ==
        r.ground_truth["answer"].get<std::string>());
  CHECK(all_formatted(r));
  CHECK_FALSE(record_problem(r).has_value());

  const DatasetRecord a = instantiate(vsp_nav_blueprint(true), cfg, "n1");
  CHECK(tools_called(a) == std::vector<std::string>{"Point", "Point", "Point", "AStar", "Draw2DPath"});
  CHECK(a.correct);
}

TEST_CASE("jigsaw blueprint follows the answer") {
  bool saw_a = false, saw_b = false;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto cfg = record_config(TaskKind::Jigsaw, i, 4);
    const DatasetRecord r = instantiate(jigsaw_blueprint(), cfg, "j");
    CHECK(r.correct);
    const auto calls = tools_called(r);
    if (r.ground_truth["answer"] == "B") {
      saw_b = true;
      CHECK(calls == std::vector<std::string>{"DetectBlackArea", "InsertImage", "InsertImage"});
    } else {
      saw_a = true;
      CHECK(calls == std::vector<std::string>{"DetectBlackArea", "InsertImage"});
    }
  }
  CHECK(saw_a);
  CHECK(saw_b);
}

TEST_CASE("other blueprints") {
  for (TaskKind k : {TaskKind::VspVerify, TaskKind::GuiQa}) {
    for (std::size_t i = 0; i < 10; ++i) {
      const DatasetRecord r = instantiate(default_blueprint(k), record_config(k, i, 2), "x");
      CHECK(r.correct);
      CHECK(all_formatted(r));
    }
  }
}

TEST_CASE("blueprint referencing a missing tool") {
  const ToolId no_astar[] = {ToolId::AStar};
  CHECK_THROWS_WITH_AS(vsp_nav_blueprint(true).validate(ToolRegistry::canonical_without(no_astar)),
                       doctest::Contains("BlueprintError"), Error);
  Blueprint bp = vsp_nav_blueprint();
  bp.steps.pop_back();
  CHECK_THROWS_AS(bp.validate(ToolRegistry::canonical()), Error);
}

TEST_CASE("variants") {
  const auto cfg = record_config(TaskKind::VspNav, 3, 9);
  const DatasetRecord base = instantiate(vsp_nav_blueprint(), cfg, "v");

  const DatasetRecord refl = instantiate(vsp_nav_blueprint(), cfg, "v", Tag::Reflection);
  const auto calls = tools_called(refl);
  REQUIRE(calls.size() == 5);
  CHECK(calls[3] == "Draw2DPath");
  CHECK(calls[4] == "Draw2DPath");
  CHECK(refl.correct);
  CHECK(all_formatted(refl));

  const DatasetRecord fail = instantiate(vsp_nav_blueprint(), cfg, "v", Tag::Failure, 2);
  int errors = 0;
  for (const auto& t : fail.trajectory.turns)
    if (t.observation && !t.observation->ok) ++errors;
  CHECK(errors == 2);
  CHECK(fail.trajectory.turns.size() == 3);
  CHECK(fail.trajectory.turns.back().is_response());
  CHECK(fail.correct);

  const DatasetRecord none = instantiate(vsp_nav_blueprint(), cfg, "v", Tag::NoTool);
  CHECK(tool_turns(none) == 0);
  CHECK(none.correct);

  std::vector<DatasetRecord> stream{base, base};
  const auto same = perturb(stream, PerturbationConfig{});
  REQUIRE(same.size() == 2);
  CHECK(same[0].to_json() == base.to_json());
}

TEST_CASE("assign_tags uses exact quotas") {
  PerturbationConfig p;
  p.reflection_fraction = 0.2;
  p.failure_fraction = 0.1;
  p.no_tool_fraction = 0.1;
  p.seed = 3;
  const auto tags = assign_tags(1000, p);
  CHECK(std::count(tags.begin(), tags.end(), Tag::Reflection) == 200);
  CHECK(std::count(tags.begin(), tags.end(), Tag::Failure) == 100);
  CHECK(std::count(tags.begin(), tags.end(), Tag::NoTool) == 100);
  CHECK(assign_tags(1000, p) == tags);
  p.reflection_fraction = 0.95;
  CHECK_THROWS(p.validate());
}

TEST_CASE("emit and read back") {
  CurationConfig cc;
  cc.tasks = {TaskKind::VspNav, TaskKind::Jigsaw};
  cc.count = 10;
  cc.seed = 5;
  std::vector<DatasetRecord> recs = curate(cc);
  REQUIRE(recs.size() == 10);

  SUBCASE("all valid") {
    const auto dir = scratch("valid");
    const Manifest m = emit_dataset(recs, dir);
    CHECK(m.written == 10);
    CHECK(m.per_task.at("vsp_nav") == 5);
    CHECK(m.rejected.empty());
    const auto back = read_dataset(dir, true);
    REQUIRE(back.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(back[i].to_json() == recs[i].to_json());
      CHECK(back[i].images == recs[i].images);
    }
    std::filesystem::remove_all(dir);
  }
  SUBCASE("one invalid") {
    recs[4].trajectory.turns[0] = protocol::parse_turn("<think>broken");
    const auto dir = scratch("invalid");
    const Manifest m = emit_dataset(recs, dir);
    CHECK(m.written == 9);
    REQUIRE(m.rejected.size() == 1);
    CHECK(m.rejected[0].first == recs[4].id);
    CHECK(read_dataset(dir).size() == 9);
    std::filesystem::remove_all(dir);
  }
  SUBCASE("empty input") {
    const auto dir = scratch("empty");
    const Manifest m = emit_dataset({}, dir);
    CHECK(m.written == 0);
    CHECK(slurp(dir / "data.jsonl").empty());
    CHECK(json::parse(slurp(dir / "manifest.json"))["written"] == 0);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("curation is deterministic") {
  CurationConfig cc;
  cc.tasks = {TaskKind::VspNav, TaskKind::VspVerify, TaskKind::Jigsaw, TaskKind::GuiQa};
  cc.count = 24;
  cc.seed = 8;
  cc.perturbation = {0.25, 0.25, 2, 0.25, 8};
  const auto a = scratch("det_a"), b = scratch("det_b");
  emit_dataset(curate(cc), a);
  emit_dataset(curate(cc), b);
  CHECK(slurp(a / "data.jsonl") == slurp(b / "data.jsonl"));
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  for (const auto& e : std::filesystem::directory_iterator(a / "images"))
    CHECK(slurp(e.path()) == slurp(b / "images" / e.path().filename()));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}
