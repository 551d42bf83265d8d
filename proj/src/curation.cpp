#include "toolgym/curation.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "toolgym/error.hpp"
#include "toolgym/rng.hpp"

namespace toolgym::curation {

namespace fs = std::filesystem;
using episode::TaskKind;

std::string_view to_string(Tag tag) {
  switch (tag) {
    case Tag::None: return "none";
    case Tag::Reflection: return "reflection";
    case Tag::Failure: return "failure";
    case Tag::NoTool: return "no_tool";
  }
  return "?";
}

Tag tag_from_string(std::string_view name) {
  for (Tag t : {Tag::None, Tag::Reflection, Tag::Failure, Tag::NoTool}) {
    if (to_string(t) == name) return t;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown perturbation tag '" + std::string(name) + "'");
}

const json& BindingContext::result(std::size_t step) const {
  if (step >= results.size() || results[step].is_null()) {
    throw Error(ErrorKind::BlueprintError, "binding refers to step " + std::to_string(step) + " which has no result");
  }
  return results[step];
}

void Blueprint::validate(const ToolRegistry& registry) const {
  if (steps.empty() || steps.back().kind != StepKind::Response) {
    throw Error(ErrorKind::BlueprintError, "blueprint '" + name + "' must end with a response");
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const StepTemplate& s = steps[i];
    if (s.kind == StepKind::Response) {
      if (i + 1 != steps.size()) throw Error(ErrorKind::BlueprintError, "response before the last step");
      if (!s.answer) throw Error(ErrorKind::BlueprintError, "response step without an answer binding");
      continue;
    }
    if (!s.tool || !s.params) throw Error(ErrorKind::BlueprintError, "tool step without tool or parameters");
    if (registry.find(*s.tool) == nullptr) {
      throw Error(ErrorKind::BlueprintError,
                  "blueprint '" + name + "' uses " + std::string(canonical_name(*s.tool)) + " which is not registered");
    }
  }
  if (reflection_step >= steps.size() || steps[reflection_step].kind != StepKind::ToolCall || !wrong_params) {
    throw Error(ErrorKind::BlueprintError, "blueprint '" + name + "' has no usable reflection branch");
  }
}

// ---------------------------------------------------------------------------
// Blueprints

namespace {

json pixel_json(Pixel p) { return json::array({p.x, p.y}); }

json moves_json(const std::vector<vsp::Direction>& moves) {
  json out = json::array();
  for (vsp::Direction d : moves) out.push_back(std::string(1, vsp::to_char(d)));
  return out;
}

std::string joined(const json& moves) {
  std::string s;
  for (const json& m : moves) s += (s.empty() ? "" : ",") + m.get<std::string>();
  return s;
}

std::vector<vsp::Direction> moves_from(const json& moves) { return vsp::parse_directions(joined(moves)); }

// A path that fails the navigation check: one move changed, else one appended.
std::vector<vsp::Direction> wrong_path(const vsp::GridMap& map, const std::vector<vsp::Direction>& good) {
  for (std::size_t i = 0; i < good.size(); ++i) {
    for (vsp::Direction d : vsp::kDirectionOrder) {
      if (d == good[i]) continue;
      std::vector<vsp::Direction> trial = good;
      trial[i] = d;
      if (!vsp::check_navigation(map, trial)) return trial;
    }
  }
  std::vector<vsp::Direction> longer = good;
  longer.push_back(good.empty() ? vsp::Direction::R : good.back());
  return longer;
}

json mirrored(const json& box, int width, int height, bool vertical) {
  const int x1 = box[0], y1 = box[1], x2 = box[2], y2 = box[3];
  if (vertical) return json::array({width - x2, height - y2, width - x1, height - y1});
  return json::array({width - x2, y1, width - x1, y2});
}

StepTemplate tool_step(ToolId tool, std::string slot, ParamBinding params, ParamBinding vars = {}) {
  StepTemplate s;
  s.kind = StepKind::ToolCall;
  s.tool = tool;
  s.cot_slot = std::move(slot);
  s.params = std::move(params);
  s.cot_vars = std::move(vars);
  return s;
}

StepTemplate response_step(std::string slot, std::function<std::string(const BindingContext&)> answer,
                           ParamBinding vars = {}) {
  StepTemplate s;
  s.kind = StepKind::Response;
  s.cot_slot = std::move(slot);
  s.answer = std::move(answer);
  s.cot_vars = std::move(vars);
  return s;
}

ParamBinding point(std::string description) {
  return [description](const BindingContext&) { return json{{"image", "img_1"}, {"description", description}}; };
}

}  // namespace

Blueprint vsp_nav_blueprint(bool use_astar) {
  Blueprint b;
  b.name = use_astar ? "vsp_nav_astar" : "vsp_nav";
  b.task = TaskKind::VspNav;
  b.use_astar = use_astar;
  b.steps.push_back(tool_step(ToolId::Point, "vsp.locate_start", point("the start cell S")));
  b.steps.push_back(tool_step(ToolId::Point, "vsp.locate_goal", point("the goal cell G")));
  b.steps.push_back(tool_step(ToolId::Point, "vsp.locate_holes", point("all holes")));

  // Route source: the A* observation when planned by tool, else the map's own plan.
  auto route = [use_astar](const BindingContext& c) -> json {
    if (use_astar) return c.result(3).at("path");
    return moves_json(c.instance.vsp->path_label);
  };
  if (use_astar) {
    b.steps.push_back(tool_step(
        ToolId::AStar, "vsp.astar",
        [](const BindingContext& c) {
          return json{{"start", c.result(0).at("points").at(0)},
                      {"goal", c.result(1).at("points").at(0)},
                      {"obstacles", c.result(2).at("points")}};
        },
        [](const BindingContext& c) { return json{{"holes", c.result(2).at("points").size()}}; }));
  }
  b.reflection_step = b.steps.size();
  b.steps.push_back(tool_step(
      ToolId::Draw2DPath, "vsp.draw",
      [route](const BindingContext& c) {
        return json{{"image", "img_1"}, {"start", c.result(0).at("points").at(0)}, {"directions", route(c)}};
      },
      [route](const BindingContext& c) { return json{{"path", joined(route(c))}}; }));
  b.steps.push_back(response_step("vsp.answer", [route](const BindingContext& c) { return joined(route(c)); }));
  b.wrong_params = [route](const BindingContext& c) {
    const auto bad = wrong_path(c.instance.vsp->map, moves_from(route(c)));
    return json{{"image", "img_1"}, {"start", c.result(0).at("points").at(0)}, {"directions", moves_json(bad)}};
  };
  return b;
}

Blueprint vsp_verify_blueprint() {
  Blueprint b;
  b.name = "vsp_verify";
  b.task = TaskKind::VspVerify;
  auto candidate = [](const BindingContext& c) { return moves_json(c.instance.vsp->candidate->moves); };
  b.steps.push_back(tool_step(ToolId::Point, "verify.locate_start", point("the start cell S")));
  b.reflection_step = 1;
  b.steps.push_back(tool_step(
      ToolId::Draw2DPath, "verify.draw",
      [candidate](const BindingContext& c) {
        return json{{"image", "img_1"}, {"start", c.result(0).at("points").at(0)}, {"directions", candidate(c)}};
      },
      [candidate](const BindingContext& c) { return json{{"path", joined(candidate(c))}}; }));
  b.steps.push_back(response_step(
      "verify.answer", [](const BindingContext& c) { return std::string(c.instance.vsp->safe_label ? "Yes" : "No"); },
      [](const BindingContext& c) {
        return json{{"verdict", c.instance.vsp->safe_label ? "ends on G without entering a hole"
                                                           : "does not reach G safely"}};
      }));
  b.wrong_params = [candidate](const BindingContext& c) {
    const vsp::GridMap& m = c.instance.vsp->map;
    return json{{"image", "img_1"}, {"start", pixel_json(m.center_of(m.goal))}, {"directions", candidate(c)}};
  };
  return b;
}

Blueprint jigsaw_blueprint() {
  Blueprint b;
  b.name = "jigsaw";
  b.task = TaskKind::Jigsaw;
  auto insert = [](std::string candidate) {
    return [candidate](const BindingContext& c) {
      return json{{"image", "img_1"}, {"bbox", c.result(0).at("boxes").at(0)}, {"insert_image", candidate}};
    };
  };
  b.steps.push_back(tool_step(ToolId::DetectBlackArea, "jigsaw.detect",
                              [](const BindingContext&) { return json{{"image", "img_1"}}; }));
  b.reflection_step = 1;
  b.steps.push_back(tool_step(ToolId::InsertImage, "jigsaw.try_a", insert("img_2")));
  StepTemplate try_b = tool_step(ToolId::InsertImage, "jigsaw.try_b", insert("img_3"));
  try_b.when = [](const BindingContext& c) { return c.instance.jigsaw->answer == jigsaw::Label::B; };
  b.steps.push_back(std::move(try_b));
  b.steps.push_back(response_step(
      "jigsaw.answer",
      [](const BindingContext& c) { return std::string(1, jigsaw::to_char(c.instance.jigsaw->answer)); },
      [](const BindingContext& c) { return json{{"label", std::string(1, jigsaw::to_char(c.instance.jigsaw->answer))}}; }));
  b.wrong_params = [](const BindingContext& c) {
    const ImageBuffer& base = c.instance.jigsaw->base;
    const char* right = c.instance.jigsaw->answer == jigsaw::Label::A ? "img_2" : "img_3";
    return json{{"image", "img_1"},
                {"bbox", mirrored(c.result(0).at("boxes").at(0), base.width(), base.height(), true)},
                {"insert_image", right}};
  };
  return b;
}

Blueprint guiqa_blueprint() {
  Blueprint b;
  b.name = "guiqa";
  b.task = TaskKind::GuiQa;
  auto panel_vars = [](const BindingContext& c) { return json{{"panel", c.instance.gui->target_panel_name}}; };
  b.reflection_step = 0;
  b.steps.push_back(tool_step(
      ToolId::Crop, "gui.crop",
      [](const BindingContext& c) {
        const BBox& p = c.instance.gui->target_panel;
        return json{{"image", "img_1"}, {"bbox", {p.x1, p.y1, p.x2, p.y2}}};
      },
      panel_vars));
  b.steps.push_back(tool_step(
      ToolId::OCR, "gui.ocr", [](const BindingContext& c) { return json{{"image", c.result(0).at("image")}}; }));
  auto label = [](const BindingContext& c) {
    const std::string& expected = c.instance.gui->answer;
    for (const json& t : c.result(1).at("texts")) {
      if (t.at("text").get<std::string>() == expected) return expected;
    }
    throw Error(ErrorKind::InstantiationError, "OCR did not return the expected label");
  };
  b.steps.push_back(response_step("gui.answer", label, [panel_vars, label](const BindingContext& c) {
    json v = panel_vars(c);
    v["label"] = label(c);
    return v;
  }));
  b.wrong_params = [](const BindingContext& c) {
    const BBox& p = c.instance.gui->target_panel;
    const int w = c.instance.gui->image.width();
    const int h = c.instance.gui->image.height();
    return json{{"image", "img_1"}, {"bbox", mirrored(json::array({p.x1, p.y1, p.x2, p.y2}), w, h, false)}};
  };
  return b;
}

Blueprint default_blueprint(TaskKind task, bool use_astar) {
  switch (task) {
    case TaskKind::VspNav: return vsp_nav_blueprint(use_astar);
    case TaskKind::VspVerify: return vsp_verify_blueprint();
    case TaskKind::Jigsaw: return jigsaw_blueprint();
    case TaskKind::GuiQa: return guiqa_blueprint();
  }
  throw Error(ErrorKind::BlueprintError, "no blueprint for task");
}

namespace {

Blueprint blueprint_by_name(const std::string& name) {
  if (name == "vsp_nav") return vsp_nav_blueprint(false);
  if (name == "vsp_nav_astar") return vsp_nav_blueprint(true);
  if (name == "vsp_verify") return vsp_verify_blueprint();
  if (name == "jigsaw") return jigsaw_blueprint();
  if (name == "guiqa") return guiqa_blueprint();
  throw Error(ErrorKind::BlueprintError, "unknown blueprint '" + name + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Reasoning templates

std::string TemplateCotWriter::write(const std::string& slot, const json& vars) {
  static const std::map<std::string, std::string> kTemplates{
      {"vsp.locate_start", "To plan a route I first need the start cell, so I point at the cell marked S."},
      {"vsp.locate_goal", "Next I need where the route has to end: the goal cell marked G."},
      {"vsp.locate_holes", "The route must stay off the holes, so I ask for the positions of all of them."},
      {"vsp.astar", "Start, goal and {holes} holes are known; A* gives a shortest route around them."},
      {"vsp.draw",
       "Moving cell by cell from S and stepping around the holes gives {path}. I draw this route to check it "
       "before answering."},
      {"vsp.answer", "The drawn route stays on safe ice and ends on G."},
      {"verify.locate_start", "The candidate path begins at S, so I locate the start cell first."},
      {"verify.draw", "I trace the candidate moves {path} from the start to see where they lead."},
      {"verify.answer", "Following the drawn line, the path {verdict}."},
      {"jigsaw.detect", "The missing patch shows up as a black region; I locate it."},
      {"jigsaw.try_a", "I paste candidate A into the black slot and look at the seams."},
      {"jigsaw.try_b", "Candidate A leaves visible breaks along its edges. I try candidate B instead."},
      {"jigsaw.answer", "Candidate {label} continues the surrounding patches without a seam."},
      {"gui.crop", "The question is about the {panel} panel, so I crop and enlarge that region."},
      {"gui.ocr", "Now I read the text inside the enlarged panel."},
      {"gui.answer", "The button in the {panel} panel is labeled {label}."},
      {"reflect.wrong.vsp_nav", "The route {path} looks right to me; I draw it."},
      {"reflect.fix.vsp_nav",
       "The line in the last image does not end safely on G, so that route was a mistake. Going back over the "
       "map, {path} avoids every hole; I draw it again."},
      {"reflect.wrong.vsp_verify", "I trace the candidate moves {path} on the map."},
      {"reflect.fix.vsp_verify",
       "That line does not begin at S, I started from the wrong cell. I redraw the moves {path} from the start."},
      {"reflect.wrong.jigsaw", "I paste the candidate that looks closest into the base image."},
      {"reflect.fix.jigsaw",
       "That insertion covered an intact patch instead of the black slot. I redo it at the detected region."},
      {"reflect.wrong.guiqa_fixture", "The question seems to be about this panel; I crop it."},
      {"reflect.fix.guiqa_fixture", "The crop shows the wrong panel. I crop the {panel} panel instead."},
      {"failure.retry", "The tool returned an error. I retry the same call once more."},
      {"failure.answer", "The tool keeps failing, so I answer from my own reading of the image."},
      {"notool.answer", "This can be answered directly by looking at the image."},
  };
  auto it = kTemplates.find(slot);
  if (it == kTemplates.end()) throw Error(ErrorKind::BlueprintError, "no template for slot '" + slot + "'");
  std::string out;
  const std::string& t = it->second;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != '{') {
      out += t[i];
      continue;
    }
    const std::size_t close = t.find('}', i);
    const std::string key = t.substr(i + 1, close - i - 1);
    if (!vars.is_object() || !vars.contains(key)) {
      throw Error(ErrorKind::BlueprintError, "slot '" + slot + "' needs variable '" + key + "'");
    }
    out += vars[key].is_string() ? vars[key].get<std::string>() : vars[key].dump();
    i = close;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records

std::string DatasetRecord::image_path(std::size_t index) const {
  return "images/" + id + "_" + std::to_string(index) + ".png";
}

json DatasetRecord::to_json() const {
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", system_prompt}});
  json initial = json::array();
  for (std::size_t i = 1; i <= trajectory.initial_images; ++i) initial.push_back(image_path(i));
  messages.push_back({{"role", "user"}, {"content", user_prompt}, {"images", initial}});
  std::size_t next_image = trajectory.initial_images;
  for (const protocol::Turn& t : trajectory.turns) {
    messages.push_back({{"role", "assistant"}, {"content", t.raw_text}});
    if (!t.observation) continue;
    const protocol::Observation& o = *t.observation;
    json m{{"role", "tool"}, {"content", o.text}, {"ok", o.ok}};
    m["tool"] = o.tool ? json(std::string(canonical_name(*o.tool))) : json(nullptr);
    m["error_kind"] = o.error_kind ? json(std::string(toolgym::to_string(*o.error_kind))) : json(nullptr);
    m["image"] = o.new_image_index ? json(image_path(++next_image)) : json(nullptr);
    messages.push_back(std::move(m));
  }
  json paths = json::array();
  json sizes = json::array();
  for (std::size_t i = 1; i <= trajectory.images.size(); ++i) {
    paths.push_back(image_path(i));
    sizes.push_back({trajectory.images[i - 1].width, trajectory.images[i - 1].height});
  }
  return {{"id", id},
          {"messages", messages},
          {"images", paths},
          {"metadata",
           {{"task", episode::to_string(config.task)},
            {"seed", config.seed},
            {"tag", to_string(tag)},
            {"blueprint", blueprint},
            {"ground_truth", ground_truth},
            {"episode", config.to_json()},
            {"image_sizes", sizes},
            {"initial_images", trajectory.initial_images},
            {"correct", correct}}}};
}

DatasetRecord DatasetRecord::from_json(const json& j, const std::optional<fs::path>& base_dir) {
  DatasetRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    const json& meta = j.at("metadata");
    r.config = episode::EpisodeConfig::from_json(meta.at("episode"));
    r.blueprint = meta.at("blueprint").get<std::string>();
    r.tag = tag_from_string(meta.at("tag").get<std::string>());
    r.ground_truth = meta.at("ground_truth");
    r.correct = meta.value("correct", false);
    for (const json& s : meta.at("image_sizes")) r.trajectory.images.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    r.trajectory.initial_images = meta.at("initial_images").get<std::size_t>();

    for (const json& m : j.at("messages")) {
      const std::string role = m.at("role").get<std::string>();
      if (role == "system") {
        r.system_prompt = m.at("content").get<std::string>();
      } else if (role == "user") {
        r.user_prompt = m.at("content").get<std::string>();
      } else if (role == "assistant") {
        r.trajectory.turns.push_back(protocol::parse_turn(m.at("content").get<std::string>()));
      } else if (role == "tool") {
        if (r.trajectory.turns.empty()) throw Error(ErrorKind::RejectedRecord, "tool message before any turn");
        protocol::Observation o;
        o.ok = m.at("ok").get<bool>();
        o.text = m.at("content").get<std::string>();
        if (m["tool"].is_string()) o.tool = tool_from_canonical_name(m["tool"].get<std::string>());
        if (m["error_kind"].is_string()) o.error_kind = error_kind_from_string(m["error_kind"].get<std::string>());
        if (m["image"].is_string()) {
          std::size_t count = r.trajectory.initial_images;
          for (const protocol::Turn& t : r.trajectory.turns) {
            if (t.observation && t.observation->new_image_index) ++count;
          }
          o.new_image_index = count + 1;
        }
        r.trajectory.turns.back().observation = std::move(o);
      }
    }
    r.trajectory.terminal = !r.trajectory.turns.empty() && r.trajectory.turns.back().is_response();
    if (base_dir) {
      for (const json& p : j.at("images")) r.images.push_back(read_png(*base_dir / p.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::RejectedRecord, std::string("malformed record: ") + e.what());
  }
  return r;
}

void PerturbationConfig::validate() const {
  for (double f : {reflection_fraction, failure_fraction, no_tool_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorKind::InvalidArgument, "fractions must lie in [0, 1]");
  }
  if (reflection_fraction + failure_fraction + no_tool_fraction > 1.0 + 1e-12) {
    throw Error(ErrorKind::InvalidArgument, "fractions must sum to at most 1");
  }
  if (failure_retries < 1) throw Error(ErrorKind::InvalidArgument, "failure retry count must be at least 1");
}

// ---------------------------------------------------------------------------
// Instantiation

namespace {

// Renames canonical parameter keys to the registry's names, by position.
ToolCallRequest make_call(const ToolRegistry& registry, ToolId tool, const json& canonical_params) {
  static const ToolRegistry kCanonical = ToolRegistry::canonical();
  const ToolSchema* canon = kCanonical.find(tool);
  const ToolSchema* target = registry.find(tool);
  ToolCallRequest req{target->name, json::object()};
  for (std::size_t i = 0; i < canon->params.size(); ++i) {
    const std::string& key = canon->params[i].name;
    if (!canonical_params.contains(key)) {
      throw Error(ErrorKind::BlueprintError, "binding for " + canon->name + " lacks '" + key + "'");
    }
    req.parameters[target->params[i].name] = canonical_params.at(key);
  }
  return req;
}

json vars_for(const StepTemplate& s, const BindingContext& ctx) {
  return s.cot_vars ? s.cot_vars(ctx) : json::object();
}

json checked_payload(const episode::StepOutcome& out, const std::string& what) {
  const json obs = json::parse(out.observation, nullptr, false);
  if (out.status == episode::StepStatus::ProtocolError || !obs.is_object() || obs.contains("error_kind")) {
    throw Error(ErrorKind::InstantiationError, what + " failed: " + out.observation);
  }
  return obs;
}

}  // namespace

DatasetRecord instantiate(const Blueprint& blueprint, const episode::EpisodeConfig& cfg, const std::string& id,
                          Tag tag, int failure_retries, CotWriter* writer) {
  if (cfg.task != blueprint.task) {
    throw Error(ErrorKind::BlueprintError, "blueprint '" + blueprint.name + "' does not match the task");
  }
  TemplateCotWriter fallback;
  CotWriter& cot = writer ? *writer : fallback;

  episode::EpisodeConfig ecfg = cfg;
  if (cfg.task == TaskKind::VspNav || cfg.task == TaskKind::VspVerify) ecfg.include_astar = blueprint.use_astar;
  ecfg.reveal_ground_truth = false;
  const int needed = static_cast<int>(blueprint.steps.size()) + 1 + std::max(failure_retries, 0);
  ecfg.max_turns = std::max(cfg.max_turns, needed);
  episode::Episode ep(ecfg);
  blueprint.validate(ep.registry());

  BindingContext ctx{ep.instance(), {}};
  const std::string task(episode::to_string(cfg.task));
  DatasetRecord rec;
  rec.id = id;
  rec.config = ecfg;
  rec.blueprint = blueprint.name;
  rec.tag = tag;
  rec.system_prompt = ep.system_prompt();
  rec.user_prompt = ep.user_prompt();
  rec.ground_truth = ep.instance().ground_truth();

  const auto boxed = [](const std::string& a) { return "\\boxed{" + a + "}"; };

  if (tag == Tag::Failure) {
    // Synthetic error observations: the live tool is never reached.
    if (failure_retries < 1) throw Error(ErrorKind::InvalidArgument, "failure retry count must be at least 1");
    const StepTemplate& first = blueprint.steps.front();
    const ToolCallRequest req = make_call(ep.registry(), *first.tool, first.params(ctx));
    protocol::Trajectory traj = ep.trajectory();
    for (int r = 0; r < failure_retries; ++r) {
      const std::string think = r == 0 ? cot.write(first.cot_slot, vars_for(first, ctx)) : cot.write("failure.retry", {});
      protocol::Turn turn = protocol::parse_turn(protocol::tool_call_text(think, req));
      protocol::Observation obs;
      obs.ok = false;
      obs.error_kind = ErrorKind::ToolFailure;
      obs.tool = first.tool;
      obs.text = json{{"error_kind", toolgym::to_string(ErrorKind::ToolFailure)},
                      {"message", "tool backend did not respond"}}
                     .dump();
      turn.observation = std::move(obs);
      traj.turns.push_back(std::move(turn));
    }
    traj.turns.push_back(protocol::parse_turn(
        protocol::response_text(cot.write("failure.answer", {}), boxed(ep.instance().answer_text()))));
    traj.terminal = true;
    rec.trajectory = std::move(traj);
    rec.images = {};
    for (const DialogueImage& im : ep.images()) rec.images.push_back(im.image);
    const protocol::Turn& last = rec.trajectory.turns.back();
    rec.correct = episode::check_answer(ep.instance(), std::get<protocol::FinalResponse>(last.action).boxed_answer);
    return rec;
  }

  if (tag == Tag::NoTool) {
    ep.step(protocol::response_text(cot.write("notool.answer", {}), boxed(ep.instance().answer_text())));
  } else {
    bool correcting = false;
    for (std::size_t i = 0; i < blueprint.steps.size(); ++i) {
      const StepTemplate& s = blueprint.steps[i];
      if (s.when && !s.when(ctx)) {
        ctx.results.push_back(nullptr);
        continue;
      }
      json vars = vars_for(s, ctx);
      if (s.kind == StepKind::Response) {
        const std::string answer = s.answer(ctx);
        ep.step(protocol::response_text(cot.write(s.cot_slot, vars), boxed(answer)));
        ctx.results.push_back(nullptr);
        break;
      }
      if (tag == Tag::Reflection && i == blueprint.reflection_step) {
        const json wrong = blueprint.wrong_params(ctx);
        json wrong_vars = vars;
        if (wrong.contains("directions")) wrong_vars["path"] = joined(wrong["directions"]);
        const ToolCallRequest bad = make_call(ep.registry(), *s.tool, wrong);
        checked_payload(ep.step(protocol::tool_call_text(cot.write("reflect.wrong." + task, wrong_vars), bad)),
                        "reflection attempt");
        correcting = true;
      }
      const std::string slot = correcting ? "reflect.fix." + task : s.cot_slot;
      correcting = false;
      const ToolCallRequest req = make_call(ep.registry(), *s.tool, s.params(ctx));
      ctx.results.push_back(checked_payload(ep.step(protocol::tool_call_text(cot.write(slot, vars), req)),
                                            std::string(canonical_name(*s.tool)) + " step"));
    }
  }

  if (!ep.terminal()) throw Error(ErrorKind::InstantiationError, "blueprint ended without a response");
  if (!ep.answer_correct()) throw Error(ErrorKind::InstantiationError, "blueprint produced a wrong answer");
  rec.trajectory = ep.trajectory();
  rec.correct = true;
  for (const DialogueImage& im : ep.images()) rec.images.push_back(im.image);
  return rec;
}

std::vector<Tag> assign_tags(std::size_t n, const PerturbationConfig& cfg) {
  cfg.validate();
  auto quota = [n](double f) { return static_cast<std::size_t>(std::llround(f * static_cast<double>(n))); };
  std::vector<Tag> tags;
  tags.reserve(n);
  const std::pair<Tag, double> plan[] = {
      {Tag::Reflection, cfg.reflection_fraction}, {Tag::Failure, cfg.failure_fraction}, {Tag::NoTool, cfg.no_tool_fraction}};
  for (const auto& [tag, f] : plan) {
    for (std::size_t k = quota(f); k > 0 && tags.size() < n; --k) tags.push_back(tag);
  }
  while (tags.size() < n) tags.push_back(Tag::None);
  Rng rng(Rng::derive(cfg.seed, 0x7A65));
  rng.shuffle(tags);
  return tags;
}

std::vector<DatasetRecord> perturb(const std::vector<DatasetRecord>& records, const PerturbationConfig& cfg,
                                   CotWriter* writer) {
  cfg.validate();
  if (cfg.reflection_fraction == 0.0 && cfg.failure_fraction == 0.0 && cfg.no_tool_fraction == 0.0) return records;
  const std::vector<Tag> tags = assign_tags(records.size(), cfg);
  std::vector<DatasetRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (tags[i] == Tag::None) {
      out.push_back(records[i]);
      continue;
    }
    episode::EpisodeConfig base = records[i].config;
    base.max_turns = episode::kDefaultMaxTurns;
    out.push_back(instantiate(blueprint_by_name(records[i].blueprint), base, records[i].id, tags[i],
                              cfg.failure_retries, writer));
  }
  return out;
}

std::optional<std::string> record_problem(const DatasetRecord& record) {
  const protocol::Trajectory& traj = record.trajectory;
  if (traj.turns.empty()) return "record has no turns";
  if (!protocol::parse_turn(traj.turns.back().raw_text).is_response()) return "last turn is not a response";
  if (!record.images.empty() && record.images.size() != traj.images.size()) return "image list does not match";
  const episode::SchemaBinding binding = episode::registry_for(record.config);
  const protocol::ValidationReport report = protocol::validate_trajectory(traj, binding.registry);
  for (std::size_t k = 0; k < report.format_flags.size(); ++k) {
    if (!report.format_flags[k]) return "turn " + std::to_string(k) + ": " + report.format_errors[k];
  }
  return std::nullopt;
}

episode::EpisodeConfig record_config(TaskKind task, std::size_t index, std::uint64_t seed) {
  episode::EpisodeConfig cfg;
  cfg.task = task;
  cfg.seed = Rng::derive(Rng::derive(seed, 0xC0DE), index);
  if (task == TaskKind::VspNav || task == TaskKind::VspVerify) {
    cfg.size = vsp::kTrainSizes[Rng::derive(cfg.seed, 3) % vsp::kTrainSizes.size()];
  }
  return cfg;
}

std::vector<DatasetRecord> curate(const CurationConfig& cfg, CotWriter* writer) {
  if (cfg.tasks.empty()) throw Error(ErrorKind::InvalidArgument, "no tasks to curate");
  const std::vector<Tag> tags = assign_tags(cfg.count, cfg.perturbation);
  std::vector<DatasetRecord> records;
  records.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    const TaskKind task = cfg.tasks[i % cfg.tasks.size()];
    char id[64];
    std::snprintf(id, sizeof id, "%s-%06zu", std::string(episode::to_string(task)).c_str(), i);
    records.push_back(instantiate(default_blueprint(task, cfg.use_astar), record_config(task, i, cfg.seed), id,
                                  tags[i], cfg.perturbation.failure_retries, writer));
  }
  return records;
}

json Manifest::to_json() const {
  json rej = json::array();
  for (const auto& [id, reason] : rejected) rej.push_back({{"id", id}, {"reason", reason}});
  return {{"data_file", kDataFile}, {"written", written}, {"per_task", per_task}, {"per_tag", per_tag},
          {"rejected", rej}};
}

Manifest emit_dataset(const std::vector<DatasetRecord>& records, const fs::path& dir) {
  fs::create_directories(dir / "images");
  Manifest m;
  std::ofstream data(dir / std::string(kDataFile), std::ios::binary | std::ios::trunc);
  if (!data) throw Error(ErrorKind::InvalidArgument, "cannot write to " + dir.string());
  for (const DatasetRecord& r : records) {
    if (auto problem = record_problem(r)) {
      m.rejected.emplace_back(r.id, *problem);
      continue;
    }
    for (std::size_t k = 0; k < r.images.size(); ++k) write_png(r.images[k], dir / r.image_path(k + 1));
    data << r.to_json().dump() << '\n';
    ++m.written;
    ++m.per_task[std::string(episode::to_string(r.config.task))];
    ++m.per_tag[std::string(to_string(r.tag))];
  }
  std::ofstream(dir / std::string(kManifestFile), std::ios::binary | std::ios::trunc) << m.to_json().dump(2) << '\n';
  return m;
}

std::vector<DatasetRecord> read_dataset(const fs::path& dir, bool load_images) {
  std::ifstream in(dir / std::string(kDataFile), std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "no dataset in " + dir.string());
  std::vector<DatasetRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(DatasetRecord::from_json(json::parse(line), load_images ? std::optional<fs::path>(dir) : std::nullopt));
  }
  return out;
}

}  // namespace toolgym::curation
