#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolgym/error.hpp"
#include "toolgym/gui.hpp"
#include "toolgym/raster.hpp"
#include "toolgym/vsp.hpp"

namespace toolgym {

using json = nlohmann::json;

enum class ParamKind { ImageRef, Text, Coordinate, CoordinateList, DirectionList, BBox };

std::string_view to_string(ParamKind kind);

enum class ToolId { Point, Draw2DPath, AStar, DetectBlackArea, InsertImage, OCR, Crop };

inline constexpr ToolId kAllTools[] = {ToolId::Point,           ToolId::Draw2DPath,
                                       ToolId::AStar,           ToolId::DetectBlackArea,
                                       ToolId::InsertImage,     ToolId::OCR,
                                       ToolId::Crop};

// Canonical tool name ("Point", "Draw2DPath", ...).
std::string_view canonical_name(ToolId id);
std::optional<ToolId> tool_from_canonical_name(std::string_view name);
bool produces_image(ToolId id);

struct ParamSpec {
  std::string name;
  std::string description;
  ParamKind kind = ParamKind::Text;

  friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct ToolSchema {
  ToolId id = ToolId::Point;
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  std::string returns;

  const ParamSpec* param(std::string_view param_name) const;
  json to_json() const;

  friend bool operator==(const ToolSchema&, const ToolSchema&) = default;
};

// Immutable set of tool schemas with unique names. Positions of parameters
// within a schema are stable across renamings, which is how randomized
// schemas map back to the executable tools.
class ToolRegistry {
 public:
  explicit ToolRegistry(std::vector<ToolSchema> schemas);

  static ToolRegistry canonical();
  static ToolRegistry canonical_without(std::span<const ToolId> excluded);

  const ToolSchema* find(std::string_view name) const;
  const ToolSchema* find(ToolId id) const;
  std::span<const ToolSchema> schemas() const { return schemas_; }
  std::size_t size() const { return schemas_.size(); }

  json to_json() const;

  friend bool operator==(const ToolRegistry&, const ToolRegistry&) = default;

 private:
  std::vector<ToolSchema> schemas_;
};

// --- Pathfinding -----------------------------------------------------------

// Optimal 4-connected path (A*, Manhattan heuristic). Equal-f nodes are
// expanded in insertion order, which follows the U, D, L, R neighbor order.
std::vector<vsp::Direction> astar_search(vsp::Cell start, vsp::Cell goal,
                                         std::span<const vsp::Cell> obstacles, int grid_size);

// --- Execution context ------------------------------------------------------

struct DialogueImage {
  ImageBuffer image;
  std::optional<gui::TextLayer> text_layer;
};

// Ground truth a Point oracle may answer from, expressed in the pixel frame
// of the original image.
struct PointTruth {
  std::optional<vsp::GridMap> grid;
  std::optional<BBox> black_area;
  int frame_width = 0;
  int frame_height = 0;
};

class PointEngine {
 public:
  virtual ~PointEngine() = default;
  virtual std::vector<Pixel> point(const ImageBuffer& image, std::string_view description) = 0;
};

class OcrEngine {
 public:
  virtual ~OcrEngine() = default;
  virtual gui::TextLayer read(const ImageBuffer& image) = 0;
};

struct ToolOptions {
  int crop_upscale = kDefaultCropUpscale;
  long min_black_area = 64;
  int path_thickness = 0;  // 0 picks max(2, cell_px / 20)
};

struct ToolContext {
  std::span<const DialogueImage> images;  // img_1 is images[0]
  std::optional<PointTruth> truth;
  std::shared_ptr<PointEngine> point_engine;
  std::shared_ptr<OcrEngine> ocr_engine;
  ToolOptions options;
};

// --- Individual tools ---------------------------------------------------------

std::vector<Pixel> point_oracle(const ImageBuffer& image, std::string_view description,
                                const ToolContext& ctx);

struct DrawnPath {
  ImageBuffer image;
  bool out_of_bounds = false;
};

DrawnPath draw_2d_path(const ImageBuffer& image, Pixel start,
                       std::span<const vsp::Direction> directions, int cell_px, int thickness);

std::vector<BBox> detect_black_area(const ImageBuffer& image, long min_area = 64);

gui::TextLayer ocr_oracle(const DialogueImage& image, const ToolContext& ctx);

// --- Dispatch -----------------------------------------------------------------

struct ToolCallRequest {
  std::string name;
  json parameters = json::object();

  json to_json() const { return json{{"name", name}, {"parameters", parameters}}; }
};

struct ToolResult {
  bool ok = false;
  std::optional<ErrorKind> error_kind;
  std::string message;
  std::optional<ToolId> tool;
  json payload = json::object();
  std::optional<DialogueImage> new_image;

  // Observation text shown to the policy.
  std::string observation_text() const;
};

// Resolves "img_<n>" (1-based) against the dialogue image list.
const DialogueImage& resolve_image_ref(std::string_view ref, std::span<const DialogueImage> images);
std::optional<std::size_t> parse_image_ref(std::string_view ref);

// Schema-level validity of one parameter value. `frame` is the image the
// coordinates refer to (the call's image argument, or img_1).
struct ValueContext {
  std::size_t image_count = 0;
  int frame_width = 0;
  int frame_height = 0;
};

bool value_valid(ParamKind kind, const json& value, const ValueContext& ctx);

// Frame for coordinate checks: the first valid image-ref argument of the
// call, falling back to img_1.
ValueContext value_context_for(const ToolSchema& schema, const json& parameters,
                               std::span<const std::pair<int, int>> image_dims);

ToolResult dispatch(const ToolCallRequest& call, const ToolRegistry& registry, const ToolContext& ctx);

}  // namespace toolgym
