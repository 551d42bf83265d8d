#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "toolgym/episode.hpp"
#include "toolgym/server.hpp"

namespace toolgym::eval {

// ---------------------------------------------------------------------------
// Transport

// Thin JSON transport over the episode-server surface. Server-side errors are
// rethrown as Error with the reported kind; transport failures as Unavailable.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual json create(const json& body) = 0;
  virtual json step(const std::string& id, const std::string& text) = 0;
  virtual json view(const std::string& id) = 0;
  virtual std::string image_png(const std::string& image_id) = 0;
  virtual json tools(std::optional<std::uint64_t> seed) = 0;
};

class InProcessBackend final : public Backend {
 public:
  explicit InProcessBackend(ToolOptions options = {});
  json create(const json& body) override { return manager_.create(body); }
  json step(const std::string& id, const std::string& text) override { return manager_.step(id, text); }
  json view(const std::string& id) override { return manager_.view(id); }
  std::string image_png(const std::string& image_id) override { return manager_.image_png(image_id); }
  json tools(std::optional<std::uint64_t> seed) override { return manager_.tools(seed); }
  server::EpisodeManager& manager() { return manager_; }

 private:
  server::EpisodeManager manager_;
};

class HttpBackend final : public Backend {
 public:
  HttpBackend(std::string host, int port, int timeout_seconds = 30);
  json create(const json& body) override;
  json step(const std::string& id, const std::string& text) override;
  json view(const std::string& id) override;
  std::string image_png(const std::string& image_id) override;
  json tools(std::optional<std::uint64_t> seed) override;

 private:
  std::string request(const std::string& method, const std::string& path, const std::string& body);

  std::string host_;
  int port_;
  int timeout_seconds_;
};

// ---------------------------------------------------------------------------
// Policies

struct HistoryEntry {
  std::string text;         // emitted turn
  std::string status;       // tool_observation | protocol_error | terminal
  std::string observation;  // raw observation text
  bool ok = false;          // a tool call that executed without error
};

struct EpisodeView {
  episode::TaskKind task = episode::TaskKind::VspNav;
  std::uint64_t seed = 0;  // instance seed
  std::string user_prompt;
  json ground_truth;  // privileged; present when the episode reveals it
  std::vector<HistoryEntry> history;
  std::optional<randomize::IdentifierMapping> mapping;  // tool names are canonical unless set
  std::function<ImageBuffer(std::size_t)> image;         // 1-based dialogue image
  std::function<ImageBuffer()> original;                 // pre-blackout jigsaw image
};

class Policy {
 public:
  virtual ~Policy() = default;
  // Empty string means the policy has nothing more to say.
  virtual std::string act(const EpisodeView& view) = 0;
};

// Follows the fixed per-task plan; the next step is the count of successful
// tool calls so far, so failed or malformed turns are retried.
class OraclePolicy final : public Policy {
 public:
  std::string act(const EpisodeView& view) override;
};

// Oracle whose turn t is replaced by a non-terminal corrupted turn when
// u_t < p_error, with u_t drawn from the instance seed alone. Accuracy is
// therefore monotone in p_error for a fixed seed.
class NoisyPolicy final : public Policy {
 public:
  explicit NoisyPolicy(double p_error);
  std::string act(const EpisodeView& view) override;
  static double draw(std::uint64_t instance_seed, std::size_t turn);

 private:
  double p_error_;
  OraclePolicy oracle_;
};

// Answers in one response turn without calling any tool.
class NoToolPolicy final : public Policy {
 public:
  std::string act(const EpisodeView& view) override;
};

// Plays back assistant turns of recorded transcripts in order.
class ReplayPolicy final : public Policy {
 public:
  explicit ReplayPolicy(std::vector<std::string> turns) : turns_(std::move(turns)) {}
  std::string act(const EpisodeView& view) override;

 private:
  std::vector<std::string> turns_;
};

// One recorded episode to replay: its configuration and assistant turns.
struct ReplayItem {
  episode::EpisodeConfig config;
  std::vector<std::string> turns;
};

// Reads JSONL lines holding either an eval transcript ("config" + "trajectory")
// or a curated record ("metadata.episode" + "messages").
std::vector<ReplayItem> load_replay(const std::string& path);
ReplayItem replay_item_from_json(const json& j);

enum class PolicyKind { Oracle, Noisy, NoTool, Replay };

struct PolicySpec {
  PolicyKind kind = PolicyKind::Oracle;
  double p_error = 0.0;
  std::string replay_file;

  void validate() const;
  std::string name() const;
  // "oracle", "noisy:0.3", "no_tool", "replay:path.jsonl"
  static PolicySpec parse(const std::string& text);
};

// ---------------------------------------------------------------------------
// Metrics

struct EpisodeRecord {
  std::size_t index = 0;
  std::string id;
  episode::EpisodeConfig config;
  protocol::Trajectory trajectory;
  std::optional<reward::RewardBreakdown> breakdown;
  bool correct = false;

  json to_json() const;
  static EpisodeRecord from_json(const json& j);
};

struct EpisodeMetrics {
  int turns = 0;
  int calls = 0;
  int successes = 0;
  int correct = 0;
  std::map<std::string, int> per_tool;  // canonical tool name -> calls
};

// A dispatched call is a well-formed tool-call turn; success means its
// observation carries no error.
EpisodeMetrics episode_metrics(const EpisodeRecord& record);

struct TaskReport {
  std::string task;
  long episodes = 0;
  long turns = 0;
  long calls = 0;
  long successes = 0;
  long correct = 0;
  std::map<std::string, long> per_tool;
  double reward_sum = 0.0;

  double mean_turns() const { return episodes ? static_cast<double>(turns) / episodes : 0.0; }
  double cps() const { return episodes ? static_cast<double>(calls) / episodes : 0.0; }
  // Percent; nullopt when no call was made (reported as "—").
  std::optional<double> succ() const;
  double acc() const { return episodes ? 100.0 * static_cast<double>(correct) / episodes : 0.0; }
  json to_json() const;
};

struct SuiteReport {
  std::map<std::string, TaskReport> tasks;
  // tool -> calls per episode, ordered by episode index; one series per task.
  std::map<std::string, std::map<std::string, std::vector<int>>> frequency;
  std::vector<EpisodeRecord> episodes;

  json to_json(bool include_transcripts = true) const;
  std::string frequency_csv() const;
};

SuiteReport compute_metrics(std::vector<EpisodeRecord> records);

// ---------------------------------------------------------------------------
// Suites

struct SuiteOptions {
  int workers = 1;
  std::optional<std::uint64_t> schema_seed;
  reward::RewardWeights weights;
  int max_turns = episode::kDefaultMaxTurns;
};

// Config of the index-th episode of a task in a suite seeded with seed.
episode::EpisodeConfig suite_config(episode::TaskKind task, std::size_t index, std::uint64_t seed,
                                    const SuiteOptions& options);

// Creates the episode, lets the policy act until terminal and collects the
// transcript from the backend.
EpisodeRecord run_episode(Backend& backend, Policy& policy, const episode::EpisodeConfig& cfg,
                          std::size_t index);

SuiteReport run_suite(Backend& backend, const PolicySpec& policy, const std::vector<episode::TaskKind>& tasks,
                      std::size_t count, std::uint64_t seed, const SuiteOptions& options = {});

}  // namespace toolgym::eval
