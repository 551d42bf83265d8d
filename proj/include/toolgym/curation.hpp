#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "toolgym/episode.hpp"

namespace toolgym::curation {

enum class StepKind { ToolCall, Response };

enum class Tag { None, Reflection, Failure, NoTool };
std::string_view to_string(Tag tag);  // "none", "reflection", "failure", "no_tool"
Tag tag_from_string(std::string_view name);

// What bindings can see: the instance and the payload of every executed
// step so far (null for skipped steps).
struct BindingContext {
  const episode::TaskInstance& instance;
  std::vector<json> results;

  const json& result(std::size_t step) const;  // BlueprintError if not executed
};

using ParamBinding = std::function<json(const BindingContext&)>;

struct StepTemplate {
  StepKind kind = StepKind::ToolCall;
  std::optional<ToolId> tool;
  std::string cot_slot;
  ParamBinding params;                                       // canonical parameter names
  std::function<std::string(const BindingContext&)> answer;  // boxed content of a response
  ParamBinding cot_vars;                                     // optional slot variables
  std::function<bool(const BindingContext&)> when;           // optional; step skipped when false
};

struct Blueprint {
  std::string name;
  episode::TaskKind task = episode::TaskKind::VspNav;
  bool use_astar = false;
  std::vector<StepTemplate> steps;
  // Reflection branch: a wrong call to the same tool as steps[reflection_step]
  // is emitted right before it.
  std::size_t reflection_step = 0;
  ParamBinding wrong_params;

  // Final step must be a response; every tool must exist in the registry.
  void validate(const ToolRegistry& registry) const;  // BlueprintError
};

Blueprint vsp_nav_blueprint(bool use_astar = false);
Blueprint vsp_verify_blueprint();
Blueprint jigsaw_blueprint();
Blueprint guiqa_blueprint();
Blueprint default_blueprint(episode::TaskKind task, bool use_astar = false);

// Reasoning text for a slot. The default fills fixed templates; a language
// model can be plugged in behind the same interface.
class CotWriter {
 public:
  virtual ~CotWriter() = default;
  virtual std::string write(const std::string& slot, const json& vars) = 0;
};

class TemplateCotWriter final : public CotWriter {
 public:
  std::string write(const std::string& slot, const json& vars) override;
};

struct DatasetRecord {
  std::string id;
  episode::EpisodeConfig config;
  std::string blueprint;
  Tag tag = Tag::None;
  std::string system_prompt;
  std::string user_prompt;
  protocol::Trajectory trajectory;
  std::vector<ImageBuffer> images;  // every dialogue image in order
  json ground_truth;
  bool correct = false;

  std::string image_path(std::size_t index) const;  // relative, 1-based index
  // Role-tagged messages plus image paths and metadata.
  json to_json() const;
  // Images are loaded from base_dir when given, else left empty.
  static DatasetRecord from_json(const json& j, const std::optional<std::filesystem::path>& base_dir = {});
};

struct PerturbationConfig {
  double reflection_fraction = 0.0;
  double failure_fraction = 0.0;
  int failure_retries = 2;  // k
  double no_tool_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;  // InvalidArgument
};

// Executes the blueprint live against a fresh episode. tag selects the
// variant; failure_retries applies to Tag::Failure.
DatasetRecord instantiate(const Blueprint& blueprint, const episode::EpisodeConfig& cfg, const std::string& id,
                          Tag tag = Tag::None, int failure_retries = 2, CotWriter* writer = nullptr);

// Exact per-tag quotas (rounded fractions of n), shuffled by seed.
std::vector<Tag> assign_tags(std::size_t n, const PerturbationConfig& cfg);

// Rebuilds tagged records with their variant. All-zero fractions return the
// input unchanged.
std::vector<DatasetRecord> perturb(const std::vector<DatasetRecord>& records, const PerturbationConfig& cfg,
                                   CotWriter* writer = nullptr);

// Empty when the record is acceptable, else the reason it is not.
std::optional<std::string> record_problem(const DatasetRecord& record);

struct CurationConfig {
  std::vector<episode::TaskKind> tasks{episode::TaskKind::VspNav};
  std::size_t count = 10;  // total records, tasks interleaved
  std::uint64_t seed = 0;
  bool use_astar = false;
  PerturbationConfig perturbation;
};

episode::EpisodeConfig record_config(episode::TaskKind task, std::size_t index, std::uint64_t seed);

std::vector<DatasetRecord> curate(const CurationConfig& cfg, CotWriter* writer = nullptr);

struct Manifest {
  std::size_t written = 0;
  std::map<std::string, std::size_t> per_task;
  std::map<std::string, std::size_t> per_tag;
  std::vector<std::pair<std::string, std::string>> rejected;  // id, reason

  json to_json() const;
};

inline constexpr std::string_view kDataFile = "data.jsonl";
inline constexpr std::string_view kManifestFile = "manifest.json";

// Writes data.jsonl, images/ and manifest.json under dir. Invalid records are
// listed as rejected and not written.
Manifest emit_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& dir);

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& dir, bool load_images = false);

}  // namespace toolgym::curation
