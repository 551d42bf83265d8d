#include "toolgym/episode.hpp"

#include <algorithm>

#include "toolgym/error.hpp"

namespace toolgym::episode {

namespace {

json cell_json(vsp::Cell c) { return json::array({c.row, c.col}); }

json bbox_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::VspNav: return "vsp_nav";
    case TaskKind::VspVerify: return "vsp_verify";
    case TaskKind::Jigsaw: return "jigsaw";
    case TaskKind::GuiQa: return "guiqa_fixture";
  }
  return "?";
}

TaskKind task_from_string(std::string_view name) {
  for (TaskKind k : {TaskKind::VspNav, TaskKind::VspVerify, TaskKind::Jigsaw, TaskKind::GuiQa}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown task '" + std::string(name) + "'");
}

std::string_view to_string(StepStatus status) {
  switch (status) {
    case StepStatus::ToolObservation: return "tool_observation";
    case StepStatus::Terminal: return "terminal";
    case StepStatus::ProtocolError: return "protocol_error";
  }
  return "?";
}

void EpisodeConfig::validate() const {
  if (max_turns < 1) throw Error(ErrorKind::InvalidArgument, "max_turns must be at least 1");
  weights.validate();
  if (task == TaskKind::VspNav || task == TaskKind::VspVerify) {
    if (size < vsp::kMinSize || size > vsp::kMaxSize) {
      throw Error(ErrorKind::InfeasibleConfig, "grid size must lie in [3, 9]");
    }
    const int h = hole_count();
    if (h < 0 || h > size * size - 2) {
      throw Error(ErrorKind::InfeasibleConfig, "hole count does not fit the grid");
    }
  }
}

json weights_to_json(const reward::RewardWeights& w) {
  return {{"lambda_tool", w.lambda_tool},
          {"lambda_acc", w.lambda_acc},
          {"acc_scale", w.acc_scale},
          {"adaptive", w.adaptive},
          {"value_check", w.value_check == reward::ValueCheck::Schema ? "schema" : "execution"}};
}

reward::RewardWeights weights_from_json(const json& j) {
  reward::RewardWeights w;
  w.lambda_tool = j.value("lambda_tool", w.lambda_tool);
  w.lambda_acc = j.value("lambda_acc", w.lambda_acc);
  w.acc_scale = j.value("acc_scale", w.acc_scale);
  w.adaptive = j.value("adaptive", w.adaptive);
  const std::string vc = j.value("value_check", std::string("schema"));
  if (vc == "schema") {
    w.value_check = reward::ValueCheck::Schema;
  } else if (vc == "execution") {
    w.value_check = reward::ValueCheck::Execution;
  } else {
    throw Error(ErrorKind::InvalidArgument, "value_check must be 'schema' or 'execution'");
  }
  return w;
}

json EpisodeConfig::to_json() const {
  json j{{"task", to_string(task)},
         {"seed", seed},
         {"size", size},
         {"holes", hole_count()},
         {"weights", weights_to_json(weights)},
         {"max_turns", max_turns},
         {"include_astar", include_astar},
         {"reveal_ground_truth", reveal_ground_truth}};
  j["schema_seed"] = schema_seed ? json(*schema_seed) : json(nullptr);
  return j;
}

EpisodeConfig EpisodeConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::BadRequest, "episode config must be a JSON object");
  EpisodeConfig c;
  try {
    c.task = task_from_string(j.value("task", std::string("vsp_nav")));
    c.seed = j.value("seed", std::uint64_t{0});
    c.size = j.value("size", 4);
    if (j.contains("holes") && !j["holes"].is_null()) c.holes = j["holes"].get<int>();
    if (j.contains("weights")) c.weights = weights_from_json(j["weights"]);
    if (j.contains("schema_seed") && !j["schema_seed"].is_null()) {
      c.schema_seed = j["schema_seed"].get<std::uint64_t>();
    }
    c.max_turns = j.value("max_turns", kDefaultMaxTurns);
    c.include_astar = j.value("include_astar", true);
    c.reveal_ground_truth = j.value("reveal_ground_truth", false);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadRequest, std::string("bad episode config: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::BadRequest, std::string("bad episode config: ") + e.what());
  }
  return c;
}

json TaskInstance::ground_truth() const {
  json g{{"task", to_string(kind)}, {"answer", answer_text()}};
  if (vsp) {
    const vsp::GridMap& m = vsp->map;
    json holes = json::array();
    for (const vsp::Cell& h : m.holes) holes.push_back(cell_json(h));
    g["size"] = m.size;
    g["start"] = cell_json(m.start);
    g["goal"] = cell_json(m.goal);
    g["holes"] = holes;
    g["cell_px"] = m.cell_px;
    if (vsp->candidate) g["candidate"] = vsp::format_directions(vsp->candidate->moves);
  }
  if (jigsaw) {
    g["slot"] = bbox_json(jigsaw->slot);
  }
  if (gui) {
    g["target_panel"] = bbox_json(gui->target_panel);
  }
  return g;
}

std::string TaskInstance::answer_text() const {
  switch (kind) {
    case TaskKind::VspNav: return vsp::format_directions(vsp->path_label);
    case TaskKind::VspVerify: return vsp->safe_label ? "Yes" : "No";
    case TaskKind::Jigsaw: return std::string(1, jigsaw::to_char(jigsaw->answer));
    case TaskKind::GuiQa: return gui->answer;
  }
  return {};
}

TaskInstance build_instance(const EpisodeConfig& cfg) {
  cfg.validate();
  TaskInstance inst;
  inst.kind = cfg.task;
  switch (cfg.task) {
    case TaskKind::VspNav:
    case TaskKind::VspVerify: {
      const bool nav = cfg.task == TaskKind::VspNav;
      inst.vsp = nav ? vsp::make_navigation(cfg.size, cfg.hole_count(), cfg.seed)
                     : vsp::make_verification(cfg.size, cfg.hole_count(), cfg.seed);
      const ImageBuffer& img = inst.vsp->rendered;
      inst.images.push_back({img, std::nullopt});
      inst.truth = PointTruth{inst.vsp->map, std::nullopt, img.width(), img.height()};
      const std::string n = std::to_string(cfg.size);
      std::string prompt = "img_1 shows a " + n + "x" + n +
                           " frozen-lake grid. The cell marked S is the start and the cell marked G is the "
                           "goal; blue cells are holes. A move is one of U, D, L, R and shifts the position by "
                           "one cell.";
      if (nav) {
        prompt += " Give a sequence of moves that leads from S to G without entering a hole. Put the moves, "
                  "comma-separated, inside \\boxed{}.";
      } else {
        prompt += " Candidate path from S: " + vsp::format_directions(inst.vsp->candidate->moves) +
                  ". Does this path stay inside the grid, avoid every hole and end on G? Put Yes or No inside "
                  "\\boxed{}.";
      }
      inst.user_prompt = std::move(prompt);
      break;
    }
    case TaskKind::Jigsaw: {
      inst.jigsaw = jigsaw::make_instance(cfg.seed);
      inst.images.push_back({inst.jigsaw->base, std::nullopt});
      inst.images.push_back({inst.jigsaw->candidate_a, std::nullopt});
      inst.images.push_back({inst.jigsaw->candidate_b, std::nullopt});
      inst.truth = PointTruth{std::nullopt, inst.jigsaw->slot, inst.jigsaw->base.width(),
                              inst.jigsaw->base.height()};
      inst.user_prompt =
          "img_1 is a 2x2 arrangement of image patches with one patch blacked out. img_2 is candidate A and "
          "img_3 is candidate B. Which candidate belongs in the black slot? Put A or B inside \\boxed{}.";
      break;
    }
    case TaskKind::GuiQa: {
      inst.gui = gui::make_fixture(cfg.seed);
      inst.images.push_back({inst.gui->image, inst.gui->layer});
      inst.user_prompt = "img_1 is a screenshot. " + inst.gui->question + " Put the label inside \\boxed{}.";
      break;
    }
  }
  return inst;
}

bool check_answer(const TaskInstance& instance, const std::optional<std::string>& boxed) {
  if (!boxed) return false;
  try {
    switch (instance.kind) {
      case TaskKind::VspNav: return vsp::check_navigation(instance.vsp->map, *boxed);
      case TaskKind::VspVerify: return vsp::check_verification(*instance.vsp, *boxed);
      case TaskKind::Jigsaw: return jigsaw::check_jigsaw(*instance.jigsaw, *boxed);
      case TaskKind::GuiQa: return gui::check_answer(*instance.gui, *boxed);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InvalidAnswer) throw;
  }
  return false;
}

SchemaBinding registry_for(const EpisodeConfig& cfg) {
  const ToolId no_astar[] = {ToolId::AStar};
  ToolRegistry base = cfg.include_astar ? ToolRegistry::canonical() : ToolRegistry::canonical_without(no_astar);
  if (!cfg.schema_seed) return {std::move(base), std::nullopt};
  randomize::RandomizedSchemaSet set = randomize::randomize_schemas(base, *cfg.schema_seed);
  return {std::move(set.registry), std::move(set.mapping)};
}

std::string system_prompt(const ToolRegistry& registry) {
  std::string s =
      "You solve visual tasks step by step and may call tools to inspect or edit images.\n"
      "Each of your turns must contain, in this order and nothing else:\n"
      "  1. <think>your reasoning</think>\n"
      "  2. exactly one of\n"
      "     <tool_call>{\"name\": TOOL, \"parameters\": {PARAM: VALUE, ...}}</tool_call>\n"
      "     <response>final answer, with the result inside \\boxed{}</response>\n"
      "After a tool call you receive the tool output as the next message. Tools that produce an image add it "
      "to the dialogue as the next img_<n>; the images you start with are img_1, img_2, and so on.\n"
      "Pixel coordinates are [x, y] with the origin at the top-left corner; boxes are [x1, y1, x2, y2] with "
      "the right and bottom edges excluded.\n"
      "Available tools:\n";
  s += registry.to_json().dump(2);
  s += "\n";
  return s;
}

reward::RewardBreakdown offline_breakdown(const EpisodeConfig& cfg, const protocol::Trajectory& traj) {
  const TaskInstance inst = build_instance(cfg);
  const SchemaBinding binding = registry_for(cfg);
  bool correct = false;
  if (!traj.turns.empty()) {
    const protocol::Turn last = protocol::parse_turn(traj.turns.back().raw_text);
    if (last.format_ok) {
      if (const auto* resp = std::get_if<protocol::FinalResponse>(&last.action)) {
        correct = check_answer(inst, resp->boxed_answer);
      }
    }
  }
  const protocol::ValidationReport report = protocol::validate_trajectory(traj, binding.registry);
  return reward::trajectory_reward(traj, report, correct, cfg.weights);
}

Episode::Episode(EpisodeConfig cfg, ToolOptions options)
    : cfg_(std::move(cfg)),
      instance_(build_instance(cfg_)),
      binding_(registry_for(cfg_)),
      options_(options),
      system_prompt_(episode::system_prompt(binding_.registry)),
      images_(instance_.images) {
  for (const DialogueImage& im : images_) traj_.images.push_back({im.image.width(), im.image.height()});
  traj_.initial_images = images_.size();
}

StepOutcome Episode::finish(bool correct) {
  traj_.terminal = true;
  answer_correct_ = correct;
  const protocol::ValidationReport report = protocol::validate_trajectory(traj_, binding_.registry);
  breakdown_ = reward::trajectory_reward(traj_, report, correct, cfg_.weights);
  StepOutcome out;
  out.status = StepStatus::Terminal;
  out.breakdown = breakdown_;
  out.answer_correct = correct;
  return out;
}

StepOutcome Episode::step(std::string_view text) {
  if (traj_.terminal) throw Error(ErrorKind::EpisodeFinished, "episode already finished");
  protocol::Turn turn = protocol::parse_turn(text);
  StepOutcome out;

  if (!turn.format_ok) {
    protocol::Observation obs;
    obs.ok = false;
    obs.error_kind = ErrorKind::FormatError;
    obs.text = json{{"error_kind", to_string(ErrorKind::FormatError)}, {"message", turn.format_error}}.dump();
    out.status = StepStatus::ProtocolError;
    out.observation = obs.text;
    turn.observation = std::move(obs);
    traj_.turns.push_back(std::move(turn));
  } else if (const auto* resp = std::get_if<protocol::FinalResponse>(&turn.action)) {
    const bool correct = check_answer(instance_, resp->boxed_answer);
    traj_.turns.push_back(std::move(turn));
    return finish(correct);
  } else {
    const auto& call = std::get<protocol::ToolCallAction>(turn.action);
    ToolContext ctx{images_, instance_.truth, nullptr, nullptr, options_};
    ToolResult result = dispatch(*call.request, binding_.registry, ctx);
    protocol::Observation obs;
    obs.ok = result.ok;
    obs.error_kind = result.error_kind;
    obs.tool = result.tool;
    obs.text = result.observation_text();
    if (result.new_image) {
      images_.push_back(std::move(*result.new_image));
      traj_.images.push_back({images_.back().image.width(), images_.back().image.height()});
      obs.new_image_index = images_.size();
      out.new_image_index = images_.size();
    }
    out.status = StepStatus::ToolObservation;
    out.observation = obs.text;
    turn.observation = std::move(obs);
    traj_.turns.push_back(std::move(turn));
  }

  if (turn_count() >= cfg_.max_turns) {
    StepOutcome done = finish(false);
    done.observation = out.observation;
    done.new_image_index = out.new_image_index;
    return done;
  }
  return out;
}

}  // namespace toolgym::episode
