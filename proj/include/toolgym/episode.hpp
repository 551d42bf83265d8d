#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "toolgym/gui.hpp"
#include "toolgym/jigsaw.hpp"
#include "toolgym/protocol.hpp"
#include "toolgym/randomizer.hpp"
#include "toolgym/reward.hpp"
#include "toolgym/toolkit.hpp"
#include "toolgym/vsp.hpp"

namespace toolgym::episode {

enum class TaskKind { VspNav, VspVerify, Jigsaw, GuiQa };

std::string_view to_string(TaskKind kind);  // "vsp_nav", "vsp_verify", "jigsaw", "guiqa_fixture"
TaskKind task_from_string(std::string_view name);

inline constexpr int kDefaultMaxTurns = 10;

struct EpisodeConfig {
  TaskKind task = TaskKind::VspNav;
  std::uint64_t seed = 0;
  int size = 4;
  std::optional<int> holes;  // default: vsp::default_hole_count(size)
  reward::RewardWeights weights;
  std::optional<std::uint64_t> schema_seed;
  int max_turns = kDefaultMaxTurns;
  bool include_astar = true;
  bool reveal_ground_truth = false;

  int hole_count() const { return holes ? *holes : vsp::default_hole_count(size); }
  void validate() const;  // InvalidArgument, InfeasibleConfig

  json to_json() const;
  static EpisodeConfig from_json(const json& j);  // BadRequest on malformed input
};

json weights_to_json(const reward::RewardWeights& w);
reward::RewardWeights weights_from_json(const json& j);

struct TaskInstance {
  TaskKind kind = TaskKind::VspNav;
  std::vector<DialogueImage> images;  // initial dialogue images, img_1 first
  std::optional<PointTruth> truth;
  std::string user_prompt;
  std::optional<vsp::VspInstance> vsp;
  std::optional<jigsaw::JigsawInstance> jigsaw;
  std::optional<gui::GuiFixture> gui;

  // Privileged answer data for scripted policies and audits.
  json ground_truth() const;
  std::string answer_text() const;
};

TaskInstance build_instance(const EpisodeConfig& cfg);

// A missing or unparseable boxed answer is wrong.
bool check_answer(const TaskInstance& instance, const std::optional<std::string>& boxed);

// Canonical registry, optionally without AStar, renamed when schema_seed is set.
struct SchemaBinding {
  ToolRegistry registry;
  std::optional<randomize::IdentifierMapping> mapping;
};
SchemaBinding registry_for(const EpisodeConfig& cfg);

std::string system_prompt(const ToolRegistry& registry);

enum class StepStatus { ToolObservation, Terminal, ProtocolError };
std::string_view to_string(StepStatus status);

struct StepOutcome {
  StepStatus status = StepStatus::ToolObservation;
  std::string observation;
  std::optional<std::size_t> new_image_index;  // 1-based
  std::optional<reward::RewardBreakdown> breakdown;
  bool answer_correct = false;
};

// Recomputes a terminal breakdown from the configuration and the stored
// transcript alone.
reward::RewardBreakdown offline_breakdown(const EpisodeConfig& cfg, const protocol::Trajectory& traj);

// One task episode. Not thread-safe; callers serialize steps.
class Episode {
 public:
  explicit Episode(EpisodeConfig cfg, ToolOptions options = {});

  const EpisodeConfig& config() const { return cfg_; }
  const TaskInstance& instance() const { return instance_; }
  const ToolRegistry& registry() const { return binding_.registry; }
  const std::optional<randomize::IdentifierMapping>& mapping() const { return binding_.mapping; }
  const protocol::Trajectory& trajectory() const { return traj_; }
  const std::vector<DialogueImage>& images() const { return images_; }
  const std::string& system_prompt() const { return system_prompt_; }
  const std::string& user_prompt() const { return instance_.user_prompt; }
  bool terminal() const { return traj_.terminal; }
  int turn_count() const { return static_cast<int>(traj_.turns.size()); }
  const std::optional<reward::RewardBreakdown>& breakdown() const { return breakdown_; }
  bool answer_correct() const { return answer_correct_; }

  // EpisodeFinished once terminal.
  StepOutcome step(std::string_view text);

 private:
  StepOutcome finish(bool correct);

  EpisodeConfig cfg_;
  TaskInstance instance_;
  SchemaBinding binding_;
  ToolOptions options_;
  std::string system_prompt_;
  std::vector<DialogueImage> images_;
  protocol::Trajectory traj_;
  std::optional<reward::RewardBreakdown> breakdown_;
  bool answer_correct_ = false;
};

}  // namespace toolgym::episode
