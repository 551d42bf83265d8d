#include "toolgym/toolkit.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <queue>
#include <set>
#include <tuple>

namespace toolgym {

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::ImageRef: return "image-ref";
    case ParamKind::Text: return "text";
    case ParamKind::Coordinate: return "coordinate";
    case ParamKind::CoordinateList: return "coordinate-list";
    case ParamKind::DirectionList: return "direction-list";
    case ParamKind::BBox: return "bbox";
  }
  return "text";
}

std::string_view canonical_name(ToolId id) {
  switch (id) {
    case ToolId::Point: return "Point";
    case ToolId::Draw2DPath: return "Draw2DPath";
    case ToolId::AStar: return "AStar";
    case ToolId::DetectBlackArea: return "DetectBlackArea";
    case ToolId::InsertImage: return "InsertImage";
    case ToolId::OCR: return "OCR";
    case ToolId::Crop: return "Crop";
  }
  return "";
}

std::optional<ToolId> tool_from_canonical_name(std::string_view name) {
  for (ToolId id : kAllTools) {
    if (canonical_name(id) == name) return id;
  }
  return std::nullopt;
}

bool produces_image(ToolId id) {
  return id == ToolId::Draw2DPath || id == ToolId::InsertImage || id == ToolId::Crop;
}

// ---------------------------------------------------------------------------
// Schemas

const ParamSpec* ToolSchema::param(std::string_view param_name) const {
  for (const ParamSpec& p : params) {
    if (p.name == param_name) return &p;
  }
  return nullptr;
}

json ToolSchema::to_json() const {
  json props = json::array();
  for (const ParamSpec& p : params) {
    props.push_back({{"name", p.name}, {"description", p.description}, {"kind", to_string(p.kind)}});
  }
  return {{"name", name}, {"description", description}, {"parameters", props}, {"returns", returns}};
}

ToolRegistry::ToolRegistry(std::vector<ToolSchema> schemas) : schemas_(std::move(schemas)) {
  std::set<std::string> names;
  for (const ToolSchema& s : schemas_) {
    if (!names.insert(s.name).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate tool name " + s.name);
    }
    std::set<std::string> params;
    for (const ParamSpec& p : s.params) {
      if (!params.insert(p.name).second) {
        throw Error(ErrorKind::InvalidArgument, "duplicate parameter " + p.name + " in " + s.name);
      }
    }
  }
}

ToolRegistry ToolRegistry::canonical() {
  const std::string image_desc = "Reference to a dialogue image, written as img_<n>.";
  std::vector<ToolSchema> s;
  s.push_back({ToolId::Point, "Point",
               "Locate a target object in an image and return the pixel coordinates of its center.",
               {{"image", image_desc, ParamKind::ImageRef},
                {"description", "Natural-language description of the target, e.g. 'the start point'.",
                 ParamKind::Text}},
               "List of [x, y] pixel coordinates."});
  s.push_back({ToolId::Draw2DPath, "Draw2DPath",
               "Overlay a path on an image by following directional moves from a start coordinate.",
               {{"image", image_desc, ParamKind::ImageRef},
                {"start", "Starting [x, y] pixel coordinate.", ParamKind::Coordinate},
                {"directions", "Ordered list of moves, each one of \"U\", \"D\", \"L\", \"R\".",
                 ParamKind::DirectionList}},
               "New image with the path drawn as a red line."});
  s.push_back({ToolId::AStar, "AStar",
               "Compute the shortest obstacle-free grid path between a start and a goal with A* search.",
               {{"start", "Start [x, y] pixel coordinate.", ParamKind::Coordinate},
                {"goal", "Goal [x, y] pixel coordinate.", ParamKind::Coordinate},
                {"obstacles", "List of [x, y] pixel coordinates of obstacle cells.",
                 ParamKind::CoordinateList}},
               "Shortest path as a list of moves."});
  s.push_back({ToolId::DetectBlackArea, "DetectBlackArea",
               "Find regions of pure black pixels in an image.",
               {{"image", image_desc, ParamKind::ImageRef}},
               "List of [x1, y1, x2, y2] bounding boxes."});
  s.push_back({ToolId::InsertImage, "InsertImage",
               "Paste one image into another at a bounding box, scaling it to fit.",
               {{"image", "Base image, written as img_<n>.", ParamKind::ImageRef},
                {"bbox", "Target [x1, y1, x2, y2] box in the base image.", ParamKind::BBox},
                {"insert_image", "Image to insert, written as img_<n>.", ParamKind::ImageRef}},
               "New combined image."});
  s.push_back({ToolId::OCR, "OCR", "Read the text in an image together with its location.",
               {{"image", image_desc, ParamKind::ImageRef}},
               "List of text strings with [x1, y1, x2, y2] boxes."});
  s.push_back({ToolId::Crop, "Crop", "Cut out a region of an image and enlarge it.",
               {{"image", image_desc, ParamKind::ImageRef},
                {"bbox", "Region [x1, y1, x2, y2] to keep.", ParamKind::BBox}},
               "New enlarged image of the region."});
  return ToolRegistry(std::move(s));
}

ToolRegistry ToolRegistry::canonical_without(std::span<const ToolId> excluded) {
  const ToolRegistry all = canonical();
  std::vector<ToolSchema> kept;
  for (const ToolSchema& s : all.schemas()) {
    if (std::find(excluded.begin(), excluded.end(), s.id) == excluded.end()) kept.push_back(s);
  }
  return ToolRegistry(std::move(kept));
}

const ToolSchema* ToolRegistry::find(std::string_view name) const {
  for (const ToolSchema& s : schemas_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const ToolSchema* ToolRegistry::find(ToolId id) const {
  for (const ToolSchema& s : schemas_) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

json ToolRegistry::to_json() const {
  json out = json::array();
  for (const ToolSchema& s : schemas_) out.push_back(s.to_json());
  return out;
}

// ---------------------------------------------------------------------------
// A*

std::vector<vsp::Direction> astar_search(vsp::Cell start, vsp::Cell goal,
                                         std::span<const vsp::Cell> obstacles, int grid_size) {
  if (grid_size < 1) throw Error(ErrorKind::InvalidArgument, "grid size must be positive");
  auto inside = [&](vsp::Cell c) {
    return c.row >= 0 && c.col >= 0 && c.row < grid_size && c.col < grid_size;
  };
  const auto n = static_cast<std::size_t>(grid_size) * static_cast<std::size_t>(grid_size);
  auto index = [&](vsp::Cell c) { return static_cast<std::size_t>(c.row * grid_size + c.col); };
  std::vector<char> blocked(n, 0);
  for (const vsp::Cell& o : obstacles) {
    if (!inside(o)) throw Error(ErrorKind::InvalidArgument, "obstacle outside the grid");
    blocked[index(o)] = 1;
  }
  if (!inside(start) || !inside(goal)) {
    throw Error(ErrorKind::InvalidArgument, "start or goal outside the grid");
  }
  if (blocked[index(start)] || blocked[index(goal)]) {
    throw Error(ErrorKind::InvalidArgument, "start or goal is an obstacle");
  }
  if (start == goal) return {};

  auto heuristic = [&](vsp::Cell c) { return std::abs(c.row - goal.row) + std::abs(c.col - goal.col); };
  constexpr int kUnseen = -1;
  std::vector<int> g(n, kUnseen);
  std::vector<int> parent_dir(n, -1);
  std::vector<char> closed(n, 0);
  // (f, insertion order, cell index); min-heap.
  using Entry = std::tuple<int, std::uint64_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::uint64_t counter = 0;
  g[index(start)] = 0;
  open.emplace(heuristic(start), counter++, index(start));

  while (!open.empty()) {
    const auto [f, order, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = 1;
    const vsp::Cell c{static_cast<int>(idx) / grid_size, static_cast<int>(idx) % grid_size};
    if (c == goal) break;
    for (int d = 0; d < 4; ++d) {
      const vsp::Cell next = vsp::step(c, vsp::kDirectionOrder[d]);
      if (!inside(next)) continue;
      const std::size_t ni = index(next);
      if (blocked[ni] || closed[ni]) continue;
      const int tentative = g[idx] + 1;
      if (g[ni] != kUnseen && g[ni] <= tentative) continue;
      g[ni] = tentative;
      parent_dir[ni] = d;
      open.emplace(tentative + heuristic(next), counter++, ni);
    }
  }
  if (!closed[index(goal)]) throw Error(ErrorKind::NoPath, "goal unreachable");

  std::vector<vsp::Direction> moves;
  vsp::Cell c = goal;
  while (!(c == start)) {
    const vsp::Direction d = vsp::kDirectionOrder[parent_dir[index(c)]];
    moves.push_back(d);
    const vsp::Cell back = vsp::step(c, d == vsp::Direction::U   ? vsp::Direction::D
                                        : d == vsp::Direction::D ? vsp::Direction::U
                                        : d == vsp::Direction::L ? vsp::Direction::R
                                                                 : vsp::Direction::L);
    c = back;
  }
  std::reverse(moves.begin(), moves.end());
  return moves;
}

// ---------------------------------------------------------------------------
// Tools

std::vector<Pixel> point_oracle(const ImageBuffer& image, std::string_view description,
                                const ToolContext& ctx) {
  std::string desc;
  for (char c : description) desc += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  if (!ctx.truth) {
    if (ctx.point_engine) return ctx.point_engine->point(image, description);
    throw Error(ErrorKind::OracleUnavailable, "no ground truth bound to this episode");
  }
  const PointTruth& truth = *ctx.truth;
  if (image.width() != truth.frame_width || image.height() != truth.frame_height) {
    if (ctx.point_engine) return ctx.point_engine->point(image, description);
    throw Error(ErrorKind::OracleUnavailable, "image does not share the ground-truth frame");
  }

  auto has = [&](std::string_view word) { return desc.find(word) != std::string::npos; };
  if (has("black") && truth.black_area) {
    const BBox& b = *truth.black_area;
    return {Pixel{(b.x1 + b.x2) / 2, (b.y1 + b.y2) / 2}};
  }
  if (truth.grid) {
    const vsp::GridMap& map = *truth.grid;
    if (has("hole")) {
      std::vector<Pixel> out;
      for (const vsp::Cell& h : map.holes) out.push_back(map.center_of(h));
      return out;
    }
    if (has("start")) return {map.center_of(map.start)};
    if (has("goal") || has("end")) return {map.center_of(map.goal)};
  }
  throw Error(ErrorKind::TargetNotFound, "no known target matches '" + std::string(description) + "'");
}

DrawnPath draw_2d_path(const ImageBuffer& image, Pixel start,
                       std::span<const vsp::Direction> directions, int cell_px, int thickness) {
  if (directions.empty()) throw Error(ErrorKind::DegeneratePath, "no directions given");
  if (!image.contains(start.x, start.y)) throw Error(ErrorKind::OutOfBounds, "start outside image");
  std::vector<Pixel> vertices{start};
  bool out_of_bounds = false;
  for (vsp::Direction d : directions) {
    const vsp::Cell delta = vsp::step({0, 0}, d);
    Pixel next{vertices.back().x + delta.col * cell_px, vertices.back().y + delta.row * cell_px};
    if (!image.contains(next.x, next.y)) {
      next.x = std::clamp(next.x, 0, image.width() - 1);
      next.y = std::clamp(next.y, 0, image.height() - 1);
      if (!(next == vertices.back())) vertices.push_back(next);
      out_of_bounds = true;
      break;
    }
    vertices.push_back(next);
  }
  if (vertices.size() == 1) vertices.push_back(vertices.front());
  return {draw_polyline(image, vertices, colors::kRed, thickness), out_of_bounds};
}

std::vector<BBox> detect_black_area(const ImageBuffer& image, long min_area) {
  const int w = image.width();
  const int h = image.height();
  std::vector<char> seen(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
  auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x); };
  std::vector<BBox> boxes;
  std::deque<Pixel> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (seen[idx(x, y)] || !(image.at(x, y) == colors::kBlack)) continue;
      BBox box{x, y, x + 1, y + 1};
      long count = 0;
      seen[idx(x, y)] = 1;
      queue.push_back({x, y});
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        ++count;
        box.x1 = std::min(box.x1, p.x);
        box.y1 = std::min(box.y1, p.y);
        box.x2 = std::max(box.x2, p.x + 1);
        box.y2 = std::max(box.y2, p.y + 1);
        const Pixel neighbors[] = {{p.x, p.y - 1}, {p.x, p.y + 1}, {p.x - 1, p.y}, {p.x + 1, p.y}};
        for (const Pixel& q : neighbors) {
          if (!image.contains(q.x, q.y) || seen[idx(q.x, q.y)]) continue;
          if (!(image.at(q.x, q.y) == colors::kBlack)) continue;
          seen[idx(q.x, q.y)] = 1;
          queue.push_back(q);
        }
      }
      if (count >= min_area) boxes.push_back(box);
    }
  }
  std::sort(boxes.begin(), boxes.end(), [](const BBox& a, const BBox& b) {
    return std::tie(a.y1, a.x1) < std::tie(b.y1, b.x1);
  });
  return boxes;
}

gui::TextLayer ocr_oracle(const DialogueImage& image, const ToolContext& ctx) {
  if (image.text_layer) return *image.text_layer;
  if (ctx.ocr_engine) return ctx.ocr_engine->read(image.image);
  throw Error(ErrorKind::OracleUnavailable, "image has no text layer and no OCR engine is attached");
}

// ---------------------------------------------------------------------------
// Dispatch

std::string ToolResult::observation_text() const {
  if (ok) return payload.dump();
  json err{{"error_kind", error_kind ? std::string(to_string(*error_kind)) : "Unknown"},
           {"message", message}};
  return err.dump();
}

std::optional<std::size_t> parse_image_ref(std::string_view ref) {
  constexpr std::string_view prefix = "img_";
  if (ref.size() <= prefix.size() || ref.substr(0, prefix.size()) != prefix) return std::nullopt;
  const std::string_view digits = ref.substr(prefix.size());
  if (digits.size() > 9 || digits.front() == '0') return std::nullopt;
  std::size_t n = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    n = n * 10 + static_cast<std::size_t>(c - '0');
  }
  return n;
}

const DialogueImage& resolve_image_ref(std::string_view ref, std::span<const DialogueImage> images) {
  const auto n = parse_image_ref(ref);
  if (!n) throw Error(ErrorKind::BadImageRef, "malformed image reference '" + std::string(ref) + "'");
  if (*n < 1 || *n > images.size()) {
    throw Error(ErrorKind::BadImageRef, "image reference '" + std::string(ref) + "' out of range (" +
                                            std::to_string(images.size()) + " images)");
  }
  return images[*n - 1];
}

namespace {

bool is_coordinate(const json& v, const ValueContext& ctx) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    return false;
  }
  const auto x = v[0].get<long long>();
  const auto y = v[1].get<long long>();
  if (x < 0 || y < 0) return false;
  if (ctx.frame_width > 0 && (x >= ctx.frame_width || y >= ctx.frame_height)) return false;
  return true;
}

bool is_direction(const json& v) {
  if (!v.is_string()) return false;
  const auto& s = v.get_ref<const std::string&>();
  if (s.size() != 1) return false;
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return c == 'U' || c == 'D' || c == 'L' || c == 'R';
}

Pixel to_pixel(const json& v) { return {v[0].get<int>(), v[1].get<int>()}; }

BBox to_bbox(const json& v) { return {v[0].get<int>(), v[1].get<int>(), v[2].get<int>(), v[3].get<int>()}; }

std::vector<vsp::Direction> to_directions(const json& v) {
  std::string letters;
  for (const json& d : v) letters += d.get<std::string>();
  return vsp::parse_directions(letters);
}

json pixel_json(Pixel p) { return json::array({p.x, p.y}); }
json bbox_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

}  // namespace

bool value_valid(ParamKind kind, const json& value, const ValueContext& ctx) {
  switch (kind) {
    case ParamKind::ImageRef: {
      if (!value.is_string()) return false;
      const auto n = parse_image_ref(value.get_ref<const std::string&>());
      return n && *n >= 1 && *n <= ctx.image_count;
    }
    case ParamKind::Text: {
      if (!value.is_string()) return false;
      const auto& s = value.get_ref<const std::string&>();
      return std::any_of(s.begin(), s.end(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); });
    }
    case ParamKind::Coordinate:
      return is_coordinate(value, ctx);
    case ParamKind::CoordinateList:
      return value.is_array() &&
             std::all_of(value.begin(), value.end(), [&](const json& c) { return is_coordinate(c, ctx); });
    case ParamKind::DirectionList:
      return value.is_array() && !value.empty() && std::all_of(value.begin(), value.end(), is_direction);
    case ParamKind::BBox: {
      if (!value.is_array() || value.size() != 4) return false;
      if (!std::all_of(value.begin(), value.end(), [](const json& c) { return c.is_number_integer(); })) {
        return false;
      }
      const auto x1 = value[0].get<long long>();
      const auto y1 = value[1].get<long long>();
      const auto x2 = value[2].get<long long>();
      const auto y2 = value[3].get<long long>();
      if (x1 < 0 || y1 < 0 || x1 >= x2 || y1 >= y2) return false;
      if (ctx.frame_width > 0 && (x2 > ctx.frame_width || y2 > ctx.frame_height)) return false;
      return true;
    }
  }
  return false;
}

ValueContext value_context_for(const ToolSchema& schema, const json& parameters,
                               std::span<const std::pair<int, int>> image_dims) {
  ValueContext ctx;
  ctx.image_count = image_dims.size();
  std::optional<std::size_t> frame;
  if (parameters.is_object()) {
    for (const ParamSpec& p : schema.params) {
      if (p.kind != ParamKind::ImageRef) continue;
      auto it = parameters.find(p.name);
      if (it == parameters.end() || !it->is_string()) continue;
      const auto n = parse_image_ref(it->get_ref<const std::string&>());
      if (n && *n >= 1 && *n <= image_dims.size()) {
        frame = *n - 1;
        break;
      }
    }
  }
  if (!frame && !image_dims.empty()) frame = 0;
  if (frame) {
    ctx.frame_width = image_dims[*frame].first;
    ctx.frame_height = image_dims[*frame].second;
  }
  return ctx;
}

namespace {

ToolResult failure(ErrorKind kind, std::string message, std::optional<ToolId> tool) {
  ToolResult r;
  r.ok = false;
  r.error_kind = kind;
  r.message = std::move(message);
  r.tool = tool;
  return r;
}

json image_payload(std::size_t next_index, const ImageBuffer& img) {
  return {{"image", "img_" + std::to_string(next_index)}, {"width", img.width()}, {"height", img.height()}};
}

vsp::Cell cell_for(const vsp::GridMap& map, Pixel p) {
  const auto c = map.cell_at(p);
  if (!c) throw Error(ErrorKind::InvalidArgument, "coordinate outside the grid");
  return *c;
}

ToolResult execute(const ToolSchema& schema, const json& params, const ToolContext& ctx) {
  // Parameters are addressed by position so renamed schemas execute identically.
  auto arg = [&](std::size_t i) -> const json& { return params.at(schema.params[i].name); };
  auto image_arg = [&](std::size_t i) -> const DialogueImage& {
    return resolve_image_ref(arg(i).get_ref<const std::string&>(), ctx.images);
  };
  const std::size_t next_index = ctx.images.size() + 1;

  ToolResult r;
  r.ok = true;
  r.tool = schema.id;
  switch (schema.id) {
    case ToolId::Point: {
      const auto points = point_oracle(image_arg(0).image, arg(1).get<std::string>(), ctx);
      json list = json::array();
      for (const Pixel& p : points) list.push_back(pixel_json(p));
      r.payload = {{"points", list}};
      break;
    }
    case ToolId::Draw2DPath: {
      const ImageBuffer& img = image_arg(0).image;
      const int cell_px = ctx.truth && ctx.truth->grid ? ctx.truth->grid->cell_px : vsp::kDefaultCellPx;
      const int thickness = ctx.options.path_thickness > 0 ? ctx.options.path_thickness
                                                           : std::max(2, cell_px / 20);
      const auto dirs = to_directions(arg(2));
      DrawnPath drawn = draw_2d_path(img, to_pixel(arg(1)), dirs, cell_px, thickness);
      r.payload = image_payload(next_index, drawn.image);
      r.payload["out_of_bounds"] = drawn.out_of_bounds;
      r.new_image = DialogueImage{std::move(drawn.image), std::nullopt};
      break;
    }
    case ToolId::AStar: {
      if (!ctx.truth || !ctx.truth->grid) {
        throw Error(ErrorKind::OracleUnavailable, "no grid geometry bound to this episode");
      }
      const vsp::GridMap& map = *ctx.truth->grid;
      std::vector<vsp::Cell> obstacles;
      for (const json& o : arg(2)) obstacles.push_back(cell_for(map, to_pixel(o)));
      const auto path = astar_search(cell_for(map, to_pixel(arg(0))), cell_for(map, to_pixel(arg(1))),
                                     obstacles, map.size);
      json moves = json::array();
      for (vsp::Direction d : path) moves.push_back(std::string(1, vsp::to_char(d)));
      r.payload = {{"path", moves}};
      break;
    }
    case ToolId::DetectBlackArea: {
      json boxes = json::array();
      for (const BBox& b : detect_black_area(image_arg(0).image, ctx.options.min_black_area)) {
        boxes.push_back(bbox_json(b));
      }
      r.payload = {{"boxes", boxes}};
      break;
    }
    case ToolId::InsertImage: {
      ImageBuffer out = composite(image_arg(0).image, image_arg(2).image, to_bbox(arg(1)));
      r.payload = image_payload(next_index, out);
      r.new_image = DialogueImage{std::move(out), std::nullopt};
      break;
    }
    case ToolId::OCR: {
      json texts = json::array();
      for (const gui::TextAnnotation& a : ocr_oracle(image_arg(0), ctx)) {
        texts.push_back({{"text", a.text}, {"bbox", bbox_json(a.box)}});
      }
      r.payload = {{"texts", texts}};
      break;
    }
    case ToolId::Crop: {
      const DialogueImage& src = image_arg(0);
      const BBox box = to_bbox(arg(1));
      DialogueImage out{crop_region(src.image, box, ctx.options.crop_upscale), std::nullopt};
      if (src.text_layer) out.text_layer = gui::crop_layer(*src.text_layer, box, ctx.options.crop_upscale);
      r.payload = image_payload(next_index, out.image);
      r.new_image = std::move(out);
      break;
    }
  }
  return r;
}

}  // namespace

ToolResult dispatch(const ToolCallRequest& call, const ToolRegistry& registry, const ToolContext& ctx) {
  const ToolSchema* schema = registry.find(call.name);
  if (schema == nullptr) return failure(ErrorKind::UnknownTool, "no tool named '" + call.name + "'", std::nullopt);
  if (!call.parameters.is_object()) {
    return failure(ErrorKind::BadValue, "parameters must be a JSON object", schema->id);
  }
  for (const auto& [key, value] : call.parameters.items()) {
    if (schema->param(key) == nullptr) {
      return failure(ErrorKind::UnknownParam, "'" + schema->name + "' has no parameter '" + key + "'", schema->id);
    }
  }
  for (const ParamSpec& p : schema->params) {
    if (!call.parameters.contains(p.name)) {
      return failure(ErrorKind::MissingParam, "missing parameter '" + p.name + "'", schema->id);
    }
  }

  std::vector<std::pair<int, int>> dims;
  dims.reserve(ctx.images.size());
  for (const DialogueImage& img : ctx.images) dims.emplace_back(img.image.width(), img.image.height());
  const ValueContext vctx = value_context_for(*schema, call.parameters, dims);
  for (const ParamSpec& p : schema->params) {
    const json& value = call.parameters.at(p.name);
    if (p.kind == ParamKind::ImageRef) {
      if (!value.is_string()) {
        return failure(ErrorKind::BadImageRef, "'" + p.name + "' must be an img_<n> string", schema->id);
      }
      try {
        resolve_image_ref(value.get_ref<const std::string&>(), ctx.images);
      } catch (const Error& e) {
        return failure(e.kind(), e.what(), schema->id);
      }
      continue;
    }
    if (!value_valid(p.kind, value, vctx)) {
      return failure(ErrorKind::BadValue,
                     "invalid " + std::string(to_string(p.kind)) + " for '" + p.name + "'", schema->id);
    }
  }

  try {
    return execute(*schema, call.parameters, ctx);
  } catch (const Error& e) {
    return failure(e.kind(), e.what(), schema->id);
  } catch (const json::exception& e) {
    return failure(ErrorKind::BadValue, e.what(), schema->id);
  }
}

}  // namespace toolgym
