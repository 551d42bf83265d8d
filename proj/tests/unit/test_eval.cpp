#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "toolgym/curation.hpp"
#include "toolgym/eval.hpp"
#include "toolgym/rng.hpp"

using namespace toolgym;
using namespace toolgym::eval;
using episode::TaskKind;

namespace {

protocol::Turn call_turn(bool ok) {
  protocol::Turn t = protocol::parse_turn(
      protocol::tool_call_text("t", {"Point", {{"image", "img_1"}, {"description", "start"}}}));
  protocol::Observation o;
  o.ok = ok;
  o.tool = ToolId::Point;
  if (!ok) o.error_kind = ErrorKind::TargetNotFound;
  t.observation = o;
  return t;
}

// calls, failed calls, extra malformed turns, correct
struct Row {
  int calls, failed, malformed;
  bool correct;
};

EpisodeRecord fixture_record(std::size_t index, const Row& row, TaskKind task = TaskKind::VspNav) {
  EpisodeRecord r;
  r.index = index;
  r.id = "ep" + std::to_string(index);
  r.config.task = task;
  for (int i = 0; i < row.calls; ++i) r.trajectory.turns.push_back(call_turn(i >= row.calls - row.failed ? false : true));
  for (int i = 0; i < row.malformed; ++i) r.trajectory.turns.push_back(protocol::parse_turn("<think>x"));
  r.trajectory.turns.push_back(protocol::parse_turn(protocol::response_text("t", "\\boxed{R}")));
  r.correct = row.correct;
  return r;
}

const Row kRows[10] = {{3, 0, 0, true}, {4, 0, 0, true}, {5, 1, 0, false}, {2, 0, 0, true}, {0, 0, 0, true},
                       {6, 2, 0, false}, {3, 0, 1, true}, {4, 0, 0, true}, {4, 1, 0, true}, {4, 0, 0, false}};

std::vector<EpisodeRecord> fixture() {
  std::vector<EpisodeRecord> out;
  for (std::size_t i = 0; i < 10; ++i) out.push_back(fixture_record(i, kRows[i]));
  return out;
}

}  // namespace

TEST_CASE("metrics on a hand-counted fixture") {
  const SuiteReport rep = compute_metrics(fixture());
  const TaskReport& t = rep.tasks.at("vsp_nav");
  // Hand count: 35 calls, 4 failed, 7 correct, 46 turns including responses and one malformed turn.
  CHECK(t.episodes == 10);
  CHECK(t.calls == 35);
  CHECK(t.cps() == 3.5);
  CHECK(t.successes == 31);
  CHECK(*t.succ() == doctest::Approx(100.0 * 31 / 35));
  CHECK(t.acc() == 70.0);
  CHECK(t.turns == 46);
  CHECK(t.mean_turns() == doctest::Approx(4.6));
  CHECK(t.per_tool.at("Point") == 35);
  CHECK(rep.frequency.at("vsp_nav").at("Point") == std::vector<int>{3, 4, 5, 2, 0, 6, 3, 4, 4, 4});
  CHECK(rep.frequency.at("vsp_nav").at("Crop") == std::vector<int>(10, 0));
  const std::string csv = rep.frequency_csv();
  CHECK(csv.find("Point") != std::string::npos);
}

TEST_CASE("succ edge cases") {
  std::vector<EpisodeRecord> all_ok;
  for (std::size_t i = 0; i < 10; ++i) all_ok.push_back(fixture_record(i, {i < 5 ? 3 : 4, 0, 0, true}));
  CHECK(*compute_metrics(all_ok).tasks.at("vsp_nav").succ() == 100.0);
  const SuiteReport none = compute_metrics({fixture_record(0, {0, 0, 0, true})});
  CHECK_FALSE(none.tasks.at("vsp_nav").succ().has_value());
  CHECK(none.tasks.at("vsp_nav").to_json()["succ"] == "—");
}

TEST_CASE("metrics are invariant under reordering") {
  std::vector<EpisodeRecord> recs = fixture();
  for (std::size_t i = 0; i < 6; ++i) recs.push_back(fixture_record(i, kRows[9 - i], TaskKind::Jigsaw));
  const json ref = compute_metrics(recs).to_json();
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    rng.shuffle(recs);
    CHECK(compute_metrics(recs).to_json() == ref);
  }
}

TEST_CASE("policy spec parsing") {
  CHECK(PolicySpec::parse("oracle").kind == PolicyKind::Oracle);
  CHECK(PolicySpec::parse("noisy:0.3").p_error == 0.3);
  CHECK(PolicySpec::parse("no_tool").kind == PolicyKind::NoTool);
  CHECK(PolicySpec::parse("replay:a.jsonl").replay_file == "a.jsonl");
  CHECK_THROWS(PolicySpec::parse("noisy:2"));
  CHECK_THROWS(PolicySpec::parse("random"));
}

TEST_CASE("oracle and no_tool suites") {
  InProcessBackend backend;
  const SuiteReport rep = run_suite(backend, PolicySpec::parse("oracle"),
                                    {TaskKind::VspNav, TaskKind::VspVerify, TaskKind::Jigsaw, TaskKind::GuiQa}, 50, 7);
  for (const auto& [name, t] : rep.tasks) {
    INFO(name);
    CHECK(t.acc() == 100.0);
    CHECK(*t.succ() == 100.0);
  }
  CHECK(rep.tasks.at("vsp_verify").cps() == 2.0);
  for (const EpisodeRecord& r : rep.episodes) {
    REQUIRE(r.breakdown.has_value());
    CHECK(r.breakdown->total == 9.0);
    const auto report = protocol::validate_trajectory(r.trajectory, episode::registry_for(r.config).registry);
    CHECK(report.all_formatted());
  }
  // deterministic in (policy, seed)
  InProcessBackend other;
  CHECK(run_suite(other, PolicySpec::parse("oracle"), {TaskKind::Jigsaw}, 50, 7).tasks.at("jigsaw").to_json() ==
        rep.tasks.at("jigsaw").to_json());

  const SuiteReport nt = run_suite(backend, PolicySpec::parse("no_tool"), {TaskKind::VspNav}, 10, 1);
  CHECK(nt.tasks.at("vsp_nav").cps() == 0.0);
  CHECK_FALSE(nt.tasks.at("vsp_nav").succ().has_value());
}

TEST_CASE("oracle under randomized schemas") {
  InProcessBackend backend;
  SuiteOptions o;
  o.schema_seed = 31;
  o.workers = 3;
  const SuiteReport rep =
      run_suite(backend, PolicySpec::parse("oracle"), {TaskKind::VspNav, TaskKind::Jigsaw}, 20, 2, o);
  for (const auto& [name, t] : rep.tasks) CHECK(t.acc() == 100.0);
  CHECK(rep.tasks.at("vsp_nav").per_tool.at("AStar") == 20);
}

TEST_CASE("noisy accuracy is non-increasing in p") {
  InProcessBackend backend;
  const double ps[] = {0.0, 0.15, 0.35, 0.6};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    double previous = 101.0;
    std::vector<bool> prev_correct;
    for (double p : ps) {
      const SuiteReport rep =
          run_suite(backend, PolicySpec::parse("noisy:" + std::to_string(p)), {TaskKind::VspNav}, 500, seed);
      const double acc = rep.tasks.at("vsp_nav").acc();
      CHECK(acc <= previous);
      previous = acc;
      std::vector<bool> correct;
      for (const auto& r : rep.episodes) correct.push_back(r.correct);
      for (std::size_t i = 0; i < prev_correct.size(); ++i)
        if (!prev_correct[i]) CHECK_FALSE(correct[i]);
      prev_correct = correct;
    }
    CHECK(previous < 100.0);
  }
}

TEST_CASE("replay of a curated dataset reproduces its metrics") {
  curation::CurationConfig cc;
  cc.tasks = {TaskKind::VspNav, TaskKind::VspVerify, TaskKind::Jigsaw, TaskKind::GuiQa};
  cc.count = 40;
  cc.seed = 12;
  cc.perturbation.reflection_fraction = 0.25;
  cc.perturbation.no_tool_fraction = 0.25;
  const auto dir = std::filesystem::temp_directory_path() / "toolgym_eval_replay";
  std::filesystem::remove_all(dir);
  curation::emit_dataset(curation::curate(cc), dir);

  std::vector<EpisodeRecord> direct;
  std::size_t i = 0;
  for (const auto& rec : curation::read_dataset(dir)) {
    EpisodeRecord e;
    e.index = i++;
    e.id = rec.id;
    e.config = rec.config;
    e.trajectory = rec.trajectory;
    e.correct = rec.correct;
    direct.push_back(e);
  }
  InProcessBackend backend;
  const SuiteReport replayed =
      run_suite(backend, PolicySpec::parse("replay:" + (dir / "data.jsonl").string()), {}, 0, 0);
  const SuiteReport expected = compute_metrics(direct);
  REQUIRE(replayed.tasks.size() == expected.tasks.size());
  for (const auto& [name, t] : expected.tasks) {
    const TaskReport& r = replayed.tasks.at(name);
    CHECK(r.episodes == t.episodes);
    CHECK(r.turns == t.turns);
    CHECK(r.calls == t.calls);
    CHECK(r.successes == t.successes);
    CHECK(r.correct == t.correct);
    CHECK(r.per_tool == t.per_tool);
  }
  CHECK(replayed.frequency == expected.frequency);
  std::filesystem::remove_all(dir);
}

TEST_CASE("episode record json round trip") {
  InProcessBackend backend;
  const SuiteReport rep = run_suite(backend, PolicySpec::parse("noisy:0.5"), {TaskKind::Jigsaw}, 5, 4);
  for (const auto& r : rep.episodes) {
    const EpisodeRecord back = EpisodeRecord::from_json(r.to_json());
    CHECK(back.to_json() == r.to_json());
  }
}
