#include "toolgym/server.hpp"

#include <httplib.h>

#include "toolgym/error.hpp"

namespace toolgym::server {

struct EpisodeManager::Slot {
  explicit Slot(std::string slot_id, episode::Episode e, bool inline_png)
      : id(std::move(slot_id)), ep(std::move(e)), inline_images(inline_png) {}

  std::string id;
  mutable std::mutex mutex;
  episode::Episode ep;
  bool inline_images = false;
};

namespace {

std::string image_id(const std::string& episode_id, std::size_t index) {
  return episode_id + "-" + std::to_string(index);
}

std::string png_string(const ImageBuffer& img) {
  const std::vector<std::uint8_t> bytes = encode_png(img);
  return std::string(bytes.begin(), bytes.end());
}

std::string png_base64(const ImageBuffer& img) { return httplib::detail::base64_encode(png_string(img)); }

json image_ids(const std::string& episode_id, std::size_t count) {
  json ids = json::array();
  for (std::size_t i = 1; i <= count; ++i) ids.push_back(image_id(episode_id, i));
  return ids;
}

json ground_truth_for(const std::string& episode_id, const episode::Episode& ep) {
  json g = ep.instance().ground_truth();
  if (ep.instance().jigsaw) g["original_image_id"] = episode_id + "-original";
  return g;
}

}  // namespace

EpisodeManager::EpisodeManager(ToolOptions options, std::size_t retain_finished)
    : options_(options), retain_finished_(retain_finished) {}

void EpisodeManager::retire(const std::string& id) {
  std::unique_lock lock(mutex_);
  finished_order_.push_back(id);
  while (finished_order_.size() > retain_finished_) {
    episodes_.erase(finished_order_.front());
    finished_order_.pop_front();
  }
}
EpisodeManager::~EpisodeManager() = default;

std::shared_ptr<EpisodeManager::Slot> EpisodeManager::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = episodes_.find(id);
  if (it == episodes_.end()) throw Error(ErrorKind::NoSuchEpisode, "no episode '" + id + "'");
  return it->second;
}

json EpisodeManager::create_one(const episode::EpisodeConfig& cfg, bool inline_images) {
  episode::Episode ep(cfg, options_);
  std::shared_ptr<Slot> slot;
  {
    std::unique_lock lock(mutex_);
    const std::string id = "ep" + std::to_string(next_id_++);
    slot = std::make_shared<Slot>(id, std::move(ep), inline_images);
    episodes_.emplace(id, slot);
  }
  ++created_;
  const episode::Episode& e = slot->ep;
  json out{{"id", slot->id},
           {"system_prompt", e.system_prompt()},
           {"user_prompt", e.user_prompt()},
           {"image_ids", image_ids(slot->id, e.images().size())},
           {"tools", e.registry().to_json()},
           {"max_turns", cfg.max_turns},
           {"config", cfg.to_json()}};
  if (inline_images) {
    json b64 = json::array();
    for (const DialogueImage& im : e.images()) b64.push_back(png_base64(im.image));
    out["images_base64"] = b64;
  }
  if (cfg.reveal_ground_truth) out["ground_truth"] = ground_truth_for(slot->id, e);
  return out;
}

json EpisodeManager::create(const json& body) {
  const episode::EpisodeConfig cfg = episode::EpisodeConfig::from_json(body);
  cfg.validate();
  bool inline_images = false;
  std::optional<int> group;
  try {
    inline_images = body.value("inline_images", false);
    if (body.contains("n") && !body["n"].is_null()) group = body["n"].get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadRequest, e.what());
  }
  if (!group) return create_one(cfg, inline_images);
  if (*group < 1) throw Error(ErrorKind::BadRequest, "group size must be at least 1");
  json list = json::array();
  for (int i = 0; i < *group; ++i) list.push_back(create_one(cfg, inline_images));
  return {{"episodes", list}};
}

json EpisodeManager::step(const std::string& id, const std::string& text) {
  std::shared_ptr<Slot> slot = find(id);
  std::unique_lock lock(slot->mutex, std::try_to_lock);
  if (!lock.owns_lock()) throw Error(ErrorKind::Busy, "a step is already in flight for '" + id + "'");

  const episode::StepOutcome out = slot->ep.step(text);
  ++steps_;
  const protocol::Turn& turn = slot->ep.trajectory().turns.back();
  if (!turn.format_ok) ++protocol_errors_;
  if (turn.format_ok && turn.is_tool_call()) {
    ++tool_calls_;
    if (turn.observation && turn.observation->ok) ++tool_successes_;
  }

  json j{{"id", id},
         {"status", episode::to_string(out.status)},
         {"observation", out.observation},
         {"turn", slot->ep.turn_count()}};
  j["image_id"] = out.new_image_index ? json(image_id(id, *out.new_image_index)) : json(nullptr);
  if (out.new_image_index && slot->inline_images) {
    j["image_base64"] = png_base64(slot->ep.images()[*out.new_image_index - 1].image);
  }
  if (out.breakdown) {
    ++finished_;
    if (out.answer_correct) ++correct_;
    j["breakdown"] = out.breakdown->to_json();
    j["answer_correct"] = out.answer_correct;
  } else {
    j["breakdown"] = nullptr;
  }
  lock.unlock();
  if (out.breakdown) retire(id);
  return j;
}

json EpisodeManager::view(const std::string& id) const {
  std::shared_ptr<Slot> slot = find(id);
  std::lock_guard lock(slot->mutex);
  const episode::Episode& e = slot->ep;
  json j{{"id", id},
         {"status", e.terminal() ? "terminal" : "active"},
         {"config", e.config().to_json()},
         {"turn_count", e.turn_count()},
         {"max_turns", e.config().max_turns},
         {"image_ids", image_ids(id, e.images().size())},
         {"trajectory", protocol::trajectory_to_json(e.trajectory())}};
  j["breakdown"] = e.breakdown() ? e.breakdown()->to_json() : json(nullptr);
  if (e.terminal()) j["answer_correct"] = e.answer_correct();
  if (e.config().reveal_ground_truth) j["ground_truth"] = ground_truth_for(id, e);
  return j;
}

std::string EpisodeManager::image_png(const std::string& image_id) const {
  const std::size_t dash = image_id.rfind('-');
  if (dash == std::string::npos) throw Error(ErrorKind::BadImageRef, "malformed image id '" + image_id + "'");
  std::shared_ptr<Slot> slot = find(image_id.substr(0, dash));
  const std::string suffix = image_id.substr(dash + 1);
  std::lock_guard lock(slot->mutex);
  const episode::Episode& e = slot->ep;
  if (suffix == "original") {
    if (!e.config().reveal_ground_truth || !e.instance().jigsaw) {
      throw Error(ErrorKind::BadImageRef, "no original image for '" + image_id + "'");
    }
    return png_string(e.instance().jigsaw->original);
  }
  std::size_t index = 0;
  try {
    std::size_t used = 0;
    index = std::stoul(suffix, &used);
    if (used != suffix.size()) index = 0;
  } catch (const std::exception&) {
    index = 0;
  }
  if (index < 1 || index > e.images().size()) {
    throw Error(ErrorKind::BadImageRef, "no image '" + image_id + "'");
  }
  return png_string(e.images()[index - 1].image);
}

json EpisodeManager::tools(std::optional<std::uint64_t> schema_seed) const {
  episode::EpisodeConfig cfg;
  cfg.schema_seed = schema_seed;
  return episode::registry_for(cfg).registry.to_json();
}

json EpisodeManager::metrics() const {
  std::size_t active = 0;
  {
    std::shared_lock lock(mutex_);
    active = episodes_.size() - finished_order_.size();
  }
  return {{"episodes_created", created_.load()},
          {"episodes_finished", finished_.load()},
          {"episodes_active", active},
          {"steps", steps_.load()},
          {"protocol_errors", protocol_errors_.load()},
          {"tool_calls", tool_calls_.load()},
          {"tool_successes", tool_successes_.load()},
          {"correct_answers", correct_.load()}};
}

std::size_t EpisodeManager::size() const {
  std::shared_lock lock(mutex_);
  return episodes_.size();
}

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NoSuchEpisode: return 404;
    case ErrorKind::BadImageRef: return 404;
    case ErrorKind::EpisodeFinished: return 409;
    case ErrorKind::Busy: return 409;
    case ErrorKind::InfeasibleConfig: return 422;
    case ErrorKind::Unavailable: return 503;
    default: return 400;
  }
}

json error_body(ErrorKind kind, std::string_view message) {
  return {{"error_kind", to_string(kind)}, {"message", message}};
}

namespace {

template <typename Fn>
void guarded(httplib::Response& res, Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    res.status = http_status(e.kind());
    res.set_content(error_body(e.kind(), e.what()).dump(), "application/json");
  } catch (const json::exception& e) {
    res.status = 400;
    res.set_content(error_body(ErrorKind::BadRequest, e.what()).dump(), "application/json");
  } catch (const std::exception& e) {
    res.status = 500;
    res.set_content(error_body(ErrorKind::ToolFailure, e.what()).dump(), "application/json");
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadRequest, std::string("body is not JSON: ") + e.what());
  }
}

void reply(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

}  // namespace

HttpServer::HttpServer(EpisodeManager& manager) : manager_(manager), http_(std::make_unique<httplib::Server>()) {
  httplib::Server& s = *http_;
  s.Post("/episodes", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, manager_.create(parse_body(req)), 201); });
  });
  s.Post(R"(/episodes/([^/]+)/step)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      if (!body.contains("text") || !body["text"].is_string()) {
        throw Error(ErrorKind::BadRequest, "step body needs a string field 'text'");
      }
      reply(res, manager_.step(req.matches[1], body["text"].get<std::string>()));
    });
  });
  s.Get(R"(/episodes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, manager_.view(req.matches[1])); });
  });
  s.Get(R"(/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(manager_.image_png(req.matches[1]), "image/png"); });
  });
  s.Get("/tools", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<std::uint64_t> seed;
      if (req.has_param("seed")) {
        const std::string v = req.get_param_value("seed");
        try {
          std::size_t used = 0;
          seed = std::stoull(v, &used);
          if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
          throw Error(ErrorKind::BadRequest, "seed must be an unsigned integer");
        }
      }
      reply(res, manager_.tools(seed));
    });
  });
  s.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, manager_.metrics()); });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = http_->bind_to_any_port(host);
  } else {
    port_ = http_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw Error(ErrorKind::Unavailable, "cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void HttpServer::listen() { http_->listen_after_bind(); }

void HttpServer::start() {
  worker_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void HttpServer::stop() {
  if (http_) http_->stop();
  if (worker_.joinable()) worker_.join();
}

}  // namespace toolgym::server
