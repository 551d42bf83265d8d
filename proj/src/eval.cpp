#include "toolgym/eval.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "toolgym/error.hpp"
#include "toolgym/rng.hpp"

namespace toolgym::eval {

// ---------------------------------------------------------------------------
// Transport

InProcessBackend::InProcessBackend(ToolOptions options) : manager_(options) {}

HttpBackend::HttpBackend(std::string host, int port, int timeout_seconds)
    : host_(std::move(host)), port_(port), timeout_seconds_(timeout_seconds) {}

std::string HttpBackend::request(const std::string& method, const std::string& path, const std::string& body) {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(timeout_seconds_, 0);
  cli.set_read_timeout(timeout_seconds_, 0);
  cli.set_write_timeout(timeout_seconds_, 0);
  httplib::Result res = method == "POST" ? cli.Post(path, body, "application/json") : cli.Get(path);
  if (!res) {
    throw Error(ErrorKind::Unavailable,
                "request to " + host_ + ":" + std::to_string(port_) + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status >= 400) {
    ErrorKind kind = ErrorKind::BadRequest;
    std::string message = res->body;
    try {
      const json err = json::parse(res->body);
      if (auto k = error_kind_from_string(err.value("error_kind", std::string()))) kind = *k;
      message = err.value("message", message);
    } catch (const json::exception&) {
    }
    throw Error(kind, message);
  }
  return res->body;
}

json HttpBackend::create(const json& body) { return json::parse(request("POST", "/episodes", body.dump())); }

json HttpBackend::step(const std::string& id, const std::string& text) {
  return json::parse(request("POST", "/episodes/" + id + "/step", json{{"text", text}}.dump()));
}

json HttpBackend::view(const std::string& id) { return json::parse(request("GET", "/episodes/" + id, "")); }

std::string HttpBackend::image_png(const std::string& image_id) { return request("GET", "/images/" + image_id, ""); }

json HttpBackend::tools(std::optional<std::uint64_t> seed) {
  return json::parse(request("GET", seed ? "/tools?seed=" + std::to_string(*seed) : "/tools", ""));
}

// ---------------------------------------------------------------------------
// Policies

namespace {

using episode::TaskKind;

struct Planned {
  std::string think;
  std::optional<ToolCallRequest> call;  // canonical names
  std::string response;                 // used when call is empty
};

std::vector<json> ok_payloads(const EpisodeView& view) {
  std::vector<json> out;
  for (const HistoryEntry& h : view.history) {
    if (h.ok) out.push_back(json::parse(h.observation));
  }
  return out;
}

ToolCallRequest call(std::string name, json params) { return ToolCallRequest{std::move(name), std::move(params)}; }

Planned plan_vsp_nav(const std::vector<json>& done) {
  switch (done.size()) {
    case 0:
      return {"First I locate the start cell.", call("Point", {{"image", "img_1"}, {"description", "the start cell S"}}), ""};
    case 1:
      return {"Next I locate the goal cell.", call("Point", {{"image", "img_1"}, {"description", "the goal cell G"}}), ""};
    case 2:
      return {"Now I locate every hole so the route can avoid them.",
              call("Point", {{"image", "img_1"}, {"description", "all holes"}}), ""};
    case 3:
      return {"With start, goal and holes known I ask A* for the shortest safe route.",
              call("AStar", {{"start", done[0]["points"][0]},
                             {"goal", done[1]["points"][0]},
                             {"obstacles", done[2]["points"]}}),
              ""};
    case 4:
      return {"I draw the route on the map to confirm it avoids the holes.",
              call("Draw2DPath", {{"image", "img_1"}, {"start", done[0]["points"][0]}, {"directions", done[3]["path"]}}),
              ""};
    default: {
      std::string path;
      for (const json& m : done[3]["path"]) path += (path.empty() ? "" : ",") + m.get<std::string>();
      return {"The drawn route reaches the goal without touching a hole.", std::nullopt,
              "The path is \\boxed{" + path + "}."};
    }
  }
}

Planned plan_vsp_verify(const EpisodeView& view, const std::vector<json>& done) {
  const std::string candidate = view.ground_truth.value("candidate", std::string());
  switch (done.size()) {
    case 0:
      return {"I need the start cell to trace the candidate path.",
              call("Point", {{"image", "img_1"}, {"description", "the start cell S"}}), ""};
    case 1: {
      json moves = json::array();
      for (vsp::Direction d : vsp::parse_directions(candidate)) moves.push_back(std::string(1, vsp::to_char(d)));
      return {"I overlay the candidate path from the start.",
              call("Draw2DPath", {{"image", "img_1"}, {"start", done[0]["points"][0]}, {"directions", moves}}), ""};
    }
    default: {
      const std::string verdict = view.ground_truth.value("answer", std::string("No"));
      return {verdict == "Yes" ? "The drawn path ends on the goal and never crosses a hole."
                               : "The drawn path does not safely end on the goal.",
              std::nullopt, "\\boxed{" + verdict + "}"};
    }
  }
}

Planned plan_jigsaw(const EpisodeView& view, const std::vector<json>& done) {
  switch (done.size()) {
    case 0:
      return {"I find the blacked-out slot first.", call("DetectBlackArea", {{"image", "img_1"}}), ""};
    case 1:
      return {"I try candidate A in the slot.",
              call("InsertImage", {{"image", "img_1"}, {"bbox", done[0]["boxes"][0]}, {"insert_image", "img_2"}}), ""};
    case 2:
      return {"I also try candidate B in the slot.",
              call("InsertImage", {{"image", "img_1"}, {"bbox", done[0]["boxes"][0]}, {"insert_image", "img_3"}}), ""};
    default: {
      const ImageBuffer original = view.original();
      auto index_of = [](const json& payload) {
        return *parse_image_ref(payload.at("image").get<std::string>());
      };
      const double diff_a = pixel_diff(view.image(index_of(done[1])), original);
      const double diff_b = pixel_diff(view.image(index_of(done[2])), original);
      const char pick = diff_a <= diff_b ? 'A' : 'B';
      return {std::string("Candidate ") + pick + " blends in seamlessly.", std::nullopt,
              std::string("\\boxed{") + pick + "}"};
    }
  }
}

Planned plan_guiqa(const EpisodeView& view, const std::vector<json>& done) {
  switch (done.size()) {
    case 0:
      return {"I zoom into the panel the question asks about.",
              call("Crop", {{"image", "img_1"}, {"bbox", view.ground_truth.at("target_panel")}}), ""};
    case 1:
      return {"I read the text in the zoomed panel.", call("OCR", {{"image", done[0]["image"]}}), ""};
    default: {
      const std::string expected = view.ground_truth.value("answer", std::string());
      std::string label = expected;
      for (const json& t : done[1]["texts"]) {
        if (t["text"].get<std::string>() == expected) label = t["text"].get<std::string>();
      }
      return {"The button in that panel reads " + label + ".", std::nullopt, "\\boxed{" + label + "}"};
    }
  }
}

Planned oracle_plan(const EpisodeView& view) {
  const std::vector<json> done = ok_payloads(view);
  switch (view.task) {
    case TaskKind::VspNav: return plan_vsp_nav(done);
    case TaskKind::VspVerify: return plan_vsp_verify(view, done);
    case TaskKind::Jigsaw: return plan_jigsaw(view, done);
    case TaskKind::GuiQa: return plan_guiqa(view, done);
  }
  return {};
}

std::string render(const EpisodeView& view, const Planned& p) {
  if (!p.call) return protocol::response_text(p.think, p.response);
  const ToolCallRequest req =
      view.mapping ? randomize::apply_mapping(*p.call, *view.mapping, randomize::MapDirection::Forward) : *p.call;
  return protocol::tool_call_text(p.think, req);
}

}  // namespace

std::string OraclePolicy::act(const EpisodeView& view) { return render(view, oracle_plan(view)); }

NoisyPolicy::NoisyPolicy(double p_error) : p_error_(p_error) {
  if (!(p_error >= 0.0 && p_error <= 1.0)) throw Error(ErrorKind::InvalidArgument, "p_error must lie in [0, 1]");
}

double NoisyPolicy::draw(std::uint64_t instance_seed, std::size_t turn) {
  Rng rng(Rng::derive(Rng::derive(instance_seed, 0x401C), turn));
  return rng.uniform();
}

std::string NoisyPolicy::act(const EpisodeView& view) {
  const std::size_t turn = view.history.size();
  if (draw(view.seed, turn) >= p_error_) return oracle_.act(view);

  const Planned p = oracle_plan(view);
  Rng rng(Rng::derive(Rng::derive(view.seed, 0x401D), turn));
  const std::uint64_t style = rng.below(3);
  if (p.call && style > 0) {
    ToolCallRequest req =
        view.mapping ? randomize::apply_mapping(*p.call, *view.mapping, randomize::MapDirection::Forward) : *p.call;
    if (style == 1) {
      req.parameters["extra_arg"] = 1;  // unknown parameter
    } else {
      req.name += "_v2";  // unknown tool
    }
    return protocol::tool_call_text(p.think, req);
  }
  // Malformed grammar: the think block is missing.
  const std::string text = render(view, p);
  return text.substr(text.find(protocol::kThinkClose) + protocol::kThinkClose.size());
}

std::string NoToolPolicy::act(const EpisodeView& view) {
  std::string answer = view.ground_truth.value("answer", std::string());
  if (answer.empty()) {
    switch (view.task) {
      case TaskKind::VspNav: answer = "R"; break;
      case TaskKind::VspVerify: answer = "No"; break;
      case TaskKind::Jigsaw: answer = "A"; break;
      case TaskKind::GuiQa: answer = "OK"; break;
    }
  }
  return protocol::response_text("I can answer this directly from the image.", "\\boxed{" + answer + "}");
}

std::string ReplayPolicy::act(const EpisodeView& view) {
  const std::size_t k = view.history.size();
  return k < turns_.size() ? turns_[k] : std::string();
}

void PolicySpec::validate() const {
  if (kind == PolicyKind::Noisy && !(p_error >= 0.0 && p_error <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "p_error must lie in [0, 1]");
  }
  if (kind == PolicyKind::Replay && replay_file.empty()) {
    throw Error(ErrorKind::InvalidArgument, "replay policy needs a file");
  }
}

std::string PolicySpec::name() const {
  switch (kind) {
    case PolicyKind::Oracle: return "oracle";
    case PolicyKind::Noisy: {
      std::ostringstream os;
      os << "noisy:" << p_error;
      return os.str();
    }
    case PolicyKind::NoTool: return "no_tool";
    case PolicyKind::Replay: return "replay:" + replay_file;
  }
  return "?";
}

PolicySpec PolicySpec::parse(const std::string& text) {
  PolicySpec s;
  const std::size_t colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "oracle") {
    s.kind = PolicyKind::Oracle;
  } else if (head == "no_tool") {
    s.kind = PolicyKind::NoTool;
  } else if (head == "noisy") {
    s.kind = PolicyKind::Noisy;
    try {
      s.p_error = arg.empty() ? 0.1 : std::stod(arg);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "bad noise level '" + arg + "'");
    }
  } else if (head == "replay") {
    s.kind = PolicyKind::Replay;
    s.replay_file = arg;
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown policy '" + text + "'");
  }
  s.validate();
  return s;
}

ReplayItem replay_item_from_json(const json& j) {
  ReplayItem item;
  if (j.contains("trajectory")) {
    item.config = episode::EpisodeConfig::from_json(j.at("config"));
    for (const json& t : j["trajectory"].at("turns")) item.turns.push_back(t.at("text").get<std::string>());
  } else {
    item.config = episode::EpisodeConfig::from_json(j.at("metadata").at("episode"));
    for (const json& m : j.at("messages")) {
      if (m.at("role") == "assistant") item.turns.push_back(m.at("content").get<std::string>());
    }
  }
  return item;
}

std::vector<ReplayItem> load_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open replay file " + path);
  std::vector<ReplayItem> items;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    items.push_back(replay_item_from_json(json::parse(line)));
  }
  return items;
}

// ---------------------------------------------------------------------------
// Metrics

json EpisodeRecord::to_json() const {
  json j{{"index", index},
         {"id", id},
         {"task", episode::to_string(config.task)},
         {"config", config.to_json()},
         {"trajectory", protocol::trajectory_to_json(trajectory)},
         {"correct", correct}};
  j["breakdown"] = breakdown ? breakdown->to_json() : json(nullptr);
  return j;
}

EpisodeRecord EpisodeRecord::from_json(const json& j) {
  EpisodeRecord r;
  r.index = j.value("index", std::size_t{0});
  r.id = j.value("id", std::string());
  r.config = episode::EpisodeConfig::from_json(j.at("config"));
  r.trajectory = protocol::trajectory_from_json(j.at("trajectory"));
  if (j.contains("breakdown") && j["breakdown"].is_object()) {
    r.breakdown = reward::RewardBreakdown::from_json(j["breakdown"]);
  }
  r.correct = j.value("correct", false);
  return r;
}

EpisodeMetrics episode_metrics(const EpisodeRecord& record) {
  EpisodeMetrics m;
  m.turns = static_cast<int>(record.trajectory.turns.size());
  m.correct = record.correct ? 1 : 0;
  for (const protocol::Turn& t : record.trajectory.turns) {
    if (!t.format_ok || !t.is_tool_call()) continue;
    ++m.calls;
    const bool ok = t.observation && t.observation->ok;
    if (ok) ++m.successes;
    std::string name = "unknown";
    if (t.observation && t.observation->tool) name = std::string(canonical_name(*t.observation->tool));
    ++m.per_tool[name];
  }
  return m;
}

std::optional<double> TaskReport::succ() const {
  if (calls == 0) return std::nullopt;
  return 100.0 * static_cast<double>(successes) / static_cast<double>(calls);
}

json TaskReport::to_json() const {
  json j{{"task", task},
         {"episodes", episodes},
         {"turns", turns},
         {"tool_calls", calls},
         {"tool_successes", successes},
         {"correct", correct},
         {"mean_turns", mean_turns()},
         {"cps", cps()},
         {"acc", acc()},
         {"per_tool_calls", per_tool},
         {"mean_reward", episodes ? reward_sum / episodes : 0.0}};
  const auto s = succ();
  j["succ"] = s ? json(*s) : json("—");
  return j;
}

json SuiteReport::to_json(bool include_transcripts) const {
  json tj = json::object();
  for (const auto& [name, t] : tasks) tj[name] = t.to_json();
  json j{{"tasks", tj}, {"frequency", frequency}};
  if (include_transcripts) {
    json eps = json::array();
    for (const EpisodeRecord& r : episodes) eps.push_back(r.to_json());
    j["episodes"] = eps;
  }
  return j;
}

std::string SuiteReport::frequency_csv() const {
  std::ostringstream os;
  os << "task,episode";
  for (ToolId id : kAllTools) os << ',' << canonical_name(id);
  os << '\n';
  for (const auto& [task, series] : frequency) {
    std::size_t n = 0;
    for (const auto& [tool, counts] : series) n = std::max(n, counts.size());
    for (std::size_t i = 0; i < n; ++i) {
      os << task << ',' << i;
      for (ToolId id : kAllTools) {
        auto it = series.find(std::string(canonical_name(id)));
        os << ',' << (it != series.end() && i < it->second.size() ? it->second[i] : 0);
      }
      os << '\n';
    }
  }
  return os.str();
}

SuiteReport compute_metrics(std::vector<EpisodeRecord> records) {
  std::sort(records.begin(), records.end(), [](const EpisodeRecord& a, const EpisodeRecord& b) {
    const auto ta = episode::to_string(a.config.task);
    const auto tb = episode::to_string(b.config.task);
    if (ta != tb) return ta < tb;
    return a.index != b.index ? a.index < b.index : a.id < b.id;
  });
  SuiteReport report;
  for (const EpisodeRecord& r : records) {
    const std::string task(episode::to_string(r.config.task));
    const EpisodeMetrics m = episode_metrics(r);
    TaskReport& t = report.tasks[task];
    t.task = task;
    ++t.episodes;
    t.turns += m.turns;
    t.calls += m.calls;
    t.successes += m.successes;
    t.correct += m.correct;
    if (r.breakdown) t.reward_sum += r.breakdown->total;
    auto& series = report.frequency[task];
    const std::size_t position = static_cast<std::size_t>(t.episodes - 1);
    for (ToolId id : kAllTools) {
      const std::string name(canonical_name(id));
      auto it = m.per_tool.find(name);
      series[name].resize(position + 1, 0);
      series[name][position] = it == m.per_tool.end() ? 0 : it->second;
    }
    for (const auto& [name, n] : m.per_tool) t.per_tool[name] += n;
  }
  report.episodes = std::move(records);
  return report;
}

// ---------------------------------------------------------------------------
// Suites

episode::EpisodeConfig suite_config(episode::TaskKind task, std::size_t index, std::uint64_t seed,
                                    const SuiteOptions& options) {
  episode::EpisodeConfig cfg;
  cfg.task = task;
  cfg.seed = Rng::derive(Rng::derive(seed, static_cast<std::uint64_t>(task) + 1), index);
  if (task == TaskKind::VspNav || task == TaskKind::VspVerify) {
    cfg.size = vsp::kTrainSizes[index % vsp::kTrainSizes.size()];
  }
  cfg.weights = options.weights;
  cfg.schema_seed = options.schema_seed;
  cfg.max_turns = options.max_turns;
  cfg.reveal_ground_truth = true;
  return cfg;
}

EpisodeRecord run_episode(Backend& backend, Policy& policy, const episode::EpisodeConfig& cfg, std::size_t index) {
  const json created = backend.create(cfg.to_json());
  const std::string id = created.at("id").get<std::string>();
  std::vector<std::string> image_ids = created.at("image_ids").get<std::vector<std::string>>();

  EpisodeView view;
  view.task = cfg.task;
  view.seed = cfg.seed;
  view.user_prompt = created.at("user_prompt").get<std::string>();
  view.ground_truth = created.value("ground_truth", json::object());
  if (cfg.schema_seed) view.mapping = episode::registry_for(cfg).mapping;
  view.image = [&](std::size_t k) -> ImageBuffer {
    if (k < 1 || k > image_ids.size()) throw Error(ErrorKind::BadImageRef, "no dialogue image " + std::to_string(k));
    const std::string png = backend.image_png(image_ids[k - 1]);
    return decode_png(std::span(reinterpret_cast<const std::uint8_t*>(png.data()), png.size()));
  };
  view.original = [&]() -> ImageBuffer {
    const std::string png = backend.image_png(view.ground_truth.at("original_image_id").get<std::string>());
    return decode_png(std::span(reinterpret_cast<const std::uint8_t*>(png.data()), png.size()));
  };

  for (int guard = 0; guard <= cfg.max_turns; ++guard) {
    const std::string text = policy.act(view);
    if (text.empty()) break;
    const json reply = backend.step(id, text);
    HistoryEntry h;
    h.text = text;
    h.status = reply.at("status").get<std::string>();
    h.observation = reply.value("observation", std::string());
    if (reply.contains("image_id") && reply["image_id"].is_string()) {
      image_ids.push_back(reply["image_id"].get<std::string>());
    }
    if (h.status != "protocol_error" && !h.observation.empty()) {
      const json obs = json::parse(h.observation, nullptr, false);
      h.ok = obs.is_object() && !obs.contains("error_kind");
    }
    view.history.push_back(std::move(h));
    if (view.history.back().status == "terminal") break;
  }

  const json v = backend.view(id);
  EpisodeRecord r;
  r.index = index;
  r.id = id;
  r.config = cfg;
  r.trajectory = protocol::trajectory_from_json(v.at("trajectory"));
  if (v.contains("breakdown") && v["breakdown"].is_object()) {
    r.breakdown = reward::RewardBreakdown::from_json(v["breakdown"]);
  }
  r.correct = v.value("answer_correct", false);
  return r;
}

namespace {

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const std::vector<ReplayItem>& replay, std::size_t i) {
  switch (spec.kind) {
    case PolicyKind::Oracle: return std::make_unique<OraclePolicy>();
    case PolicyKind::Noisy: return std::make_unique<NoisyPolicy>(spec.p_error);
    case PolicyKind::NoTool: return std::make_unique<NoToolPolicy>();
    case PolicyKind::Replay: return std::make_unique<ReplayPolicy>(replay.at(i).turns);
  }
  return nullptr;
}

}  // namespace

SuiteReport run_suite(Backend& backend, const PolicySpec& policy, const std::vector<episode::TaskKind>& tasks,
                      std::size_t count, std::uint64_t seed, const SuiteOptions& options) {
  policy.validate();
  std::vector<ReplayItem> replay;
  std::vector<episode::EpisodeConfig> configs;
  std::vector<std::size_t> indices;
  if (policy.kind == PolicyKind::Replay) {
    replay = load_replay(policy.replay_file);
    for (std::size_t i = 0; i < replay.size(); ++i) {
      configs.push_back(replay[i].config);
      indices.push_back(i);
    }
  } else {
    if (count < 1) throw Error(ErrorKind::InvalidArgument, "count must be at least 1");
    for (episode::TaskKind t : tasks) {
      for (std::size_t i = 0; i < count; ++i) {
        configs.push_back(suite_config(t, i, seed, options));
        indices.push_back(i);
      }
    }
  }

  std::vector<EpisodeRecord> records(configs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= configs.size()) return;
      try {
        auto p = make_policy(policy, replay, k);
        records[k] = run_episode(backend, *p, configs[k], indices[k]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = configs.size();
        return;
      }
    }
  };
  const int workers = std::max(1, options.workers);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return compute_metrics(std::move(records));
}

}  // namespace toolgym::eval
