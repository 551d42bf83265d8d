#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "toolgym/episode.hpp"
#include "toolgym/error.hpp"
#include "toolgym/grpo.hpp"
#include "toolgym/protocol.hpp"
#include "toolgym/reward.hpp"
#include "toolgym/server.hpp"
#include "toolgym/toolkit.hpp"
#include "toolgym/vsp.hpp"

namespace py = pybind11;
using namespace toolgym;

namespace {

// Dicts cross the boundary as JSON text.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::string astar(std::pair<int, int> start, std::pair<int, int> goal,
                  const std::vector<std::pair<int, int>>& obstacles, int size) {
  std::vector<vsp::Cell> obs;
  for (auto [r, c] : obstacles) obs.push_back({r, c});
  return vsp::format_directions(astar_search({start.first, start.second}, {goal.first, goal.second}, obs, size));
}

double score(bool wrapped, bool name_known, int param_total, int name_hits, int value_hits,
             std::optional<bool> executed_ok, bool execution) {
  protocol::CallDiagnostics d;
  d.wrapped = wrapped;
  d.name_known = name_known;
  d.param_total = param_total;
  d.name_hits = name_hits;
  d.value_hits = value_hits;
  d.executed_ok = executed_ok;
  return reward::score_tool_call(d, execution ? reward::ValueCheck::Execution : reward::ValueCheck::Schema);
}

grpo::TokenBatch batch_of(const std::vector<std::vector<double>>& logp_new,
                          const std::vector<std::vector<double>>& logp_old) {
  if (logp_new.size() != logp_old.size()) throw Error(ErrorKind::ShapeMismatch, "logp_new/logp_old group sizes differ");
  grpo::TokenBatch batch;
  for (std::size_t i = 0; i < logp_new.size(); ++i) batch.push_back({logp_new[i], logp_old[i], std::nullopt});
  return batch;
}

py::dict parse(const std::string& text) {
  const protocol::Turn t = protocol::parse_turn(text);
  py::dict d;
  d["format_ok"] = t.format_ok;
  d["format_error"] = t.format_error;
  d["think"] = t.think;
  if (const auto* call = std::get_if<protocol::ToolCallAction>(&t.action)) {
    d["kind"] = "tool_call";
    d["wrapped"] = call->wrapped;
    if (call->request) {
      d["name"] = call->request->name;
      d["parameters"] = to_py(call->request->parameters);
    }
  } else if (const auto* resp = std::get_if<protocol::FinalResponse>(&t.action)) {
    d["kind"] = "response";
    d["text"] = resp->text;
    d["boxed"] = resp->boxed_answer ? py::cast(*resp->boxed_answer) : py::none();
  } else {
    d["kind"] = "none";
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tool-planning environments, reward and policy-gradient math";

  static py::exception<Error> error_type(m, "ToolgymError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("error_kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("astar", &astar, py::arg("start"), py::arg("goal"), py::arg("obstacles"), py::arg("size"),
        "Shortest 4-connected path on a size x size grid as comma-separated moves.");
  m.def("score_tool_call", &score, py::arg("wrapped"), py::arg("name_known"), py::arg("param_total"),
        py::arg("name_hits"), py::arg("value_hits"), py::arg("executed_ok") = std::nullopt,
        py::arg("execution") = false);
  m.def(
      "group_advantages",
      [](const std::vector<double>& rewards, double std_epsilon) {
        grpo::GrpoConfig cfg;
        cfg.std_epsilon = std_epsilon;
        return grpo::group_advantages(rewards, cfg);
      },
      py::arg("rewards"), py::arg("std_epsilon") = 1e-8);
  m.def(
      "clipped_surrogate",
      [](const std::vector<std::vector<double>>& logp_new, const std::vector<std::vector<double>>& logp_old,
         const std::vector<double>& advantages, double clip_epsilon) {
        grpo::GrpoConfig cfg;
        cfg.clip_epsilon = clip_epsilon;
        return grpo::clipped_surrogate(batch_of(logp_new, logp_old), advantages, cfg);
      },
      py::arg("logp_new"), py::arg("logp_old"), py::arg("advantages"), py::arg("clip_epsilon") = 0.2);
  m.def("parse_turn", &parse, py::arg("text"));
  m.def("extract_boxed", &protocol::extract_boxed, py::arg("text"));
  m.def(
      "offline_breakdown",
      [](const py::object& config, const py::object& trajectory) {
        const auto cfg = episode::EpisodeConfig::from_json(from_py(config));
        return to_py(episode::offline_breakdown(cfg, protocol::trajectory_from_json(from_py(trajectory))).to_json());
      },
      py::arg("config"), py::arg("trajectory"));

  py::class_<server::EpisodeManager>(m, "EpisodeManager")
      .def(py::init([](std::size_t retain) { return new server::EpisodeManager({}, retain); }),
           py::arg("retain_finished") = server::EpisodeManager::kDefaultRetainFinished)
      .def("create", [](server::EpisodeManager& em, const py::object& body) { return to_py(em.create(from_py(body))); },
           py::arg("config"))
      .def(
          "step",
          [](server::EpisodeManager& em, const std::string& id, const std::string& text) {
            json out;
            {
              py::gil_scoped_release release;
              out = em.step(id, text);
            }
            return to_py(out);
          },
          py::arg("episode_id"), py::arg("text"))
      .def("view", [](const server::EpisodeManager& em, const std::string& id) { return to_py(em.view(id)); })
      .def("image_png",
           [](const server::EpisodeManager& em, const std::string& id) { return py::bytes(em.image_png(id)); })
      .def(
          "tools",
          [](const server::EpisodeManager& em, std::optional<std::uint64_t> seed) { return to_py(em.tools(seed)); },
          py::arg("seed") = std::nullopt)
      .def("metrics", [](const server::EpisodeManager& em) { return to_py(em.metrics()); })
      .def("__len__", &server::EpisodeManager::size);
}
