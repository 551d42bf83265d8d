#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "toolgym/error.hpp"
#include "toolgym/rng.hpp"
#include "toolgym/toolkit.hpp"
#include "toolgym/vsp.hpp"

namespace fs = std::filesystem;
using namespace toolgym;

namespace {

json cell_json(vsp::Cell c) { return json::array({c.row, c.col}); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frozen-lake grid instance generator"};
  app.require_subcommand(1);
  CLI::App* gen = app.add_subcommand("gen", "Generate rendered instances with ground truth");
  int size = 4;
  int holes = -1;
  int count = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string kind = "nav";
  gen->add_option("--size", size, "Grid side length (3-9)");
  gen->add_option("--holes", holes, "Number of holes (default size^2/5)");
  gen->add_option("--count", count, "Number of instances")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "Base seed");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--kind", kind, "nav or verify")->check(CLI::IsMember({"nav", "verify"}));
  CLI11_PARSE(app, argc, argv);

  try {
    if (holes < 0) holes = vsp::default_hole_count(size);
    fs::create_directories(out);
    std::ofstream index(fs::path(out) / "instances.jsonl", std::ios::binary);
    for (int i = 0; i < count; ++i) {
      const std::uint64_t s = Rng::derive(seed, static_cast<std::uint64_t>(i));
      const vsp::VspInstance inst = kind == "nav" ? vsp::make_navigation(size, holes, s)
                                                  : vsp::make_verification(size, holes, s);
      const std::string stem = "vsp_" + std::to_string(i);
      write_png(inst.rendered, fs::path(out) / (stem + ".png"));
      json holes_json = json::array();
      for (const vsp::Cell& h : inst.map.holes) holes_json.push_back(cell_json(h));
      json j{{"image", stem + ".png"},       {"kind", kind},
             {"seed", s},                    {"size", inst.map.size},
             {"cell_px", inst.map.cell_px},  {"start", cell_json(inst.map.start)},
             {"goal", cell_json(inst.map.goal)}, {"holes", holes_json},
             {"shortest_path", vsp::format_directions(vsp::shortest_path(inst.map))}};
      if (inst.candidate) {
        j["candidate"] = vsp::format_directions(inst.candidate->moves);
        j["safe"] = inst.safe_label;
      }
      std::ofstream(fs::path(out) / (stem + ".json"), std::ios::binary) << j.dump(2) << '\n';
      index << j.dump() << '\n';
    }
    std::cout << "wrote " << count << " instances to " << out << '\n';
  } catch (const Error& e) {
    std::cerr << to_string(e.kind()) << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
