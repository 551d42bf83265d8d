#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "toolgym/error.hpp"
#include "toolgym/jigsaw.hpp"
#include "toolgym/rng.hpp"
#include "toolgym/toolkit.hpp"

namespace fs = std::filesystem;
using namespace toolgym;

int main(int argc, char** argv) {
  CLI::App app{"Jigsaw puzzle generator"};
  app.require_subcommand(1);
  CLI::App* gen = app.add_subcommand("gen", "Generate puzzles with two candidate patches");
  int count = 1;
  std::uint64_t seed = 0;
  int source = jigsaw::kDefaultSourceSize;
  std::string out;
  gen->add_option("--count", count, "Number of puzzles")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "Base seed");
  gen->add_option("--source-size", source, "Side of the synthetic source image (multiple of 3)");
  gen->add_option("--out", out, "Output directory")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out);
    std::ofstream index(fs::path(out) / "instances.jsonl", std::ios::binary);
    for (int i = 0; i < count; ++i) {
      const std::uint64_t s = Rng::derive(seed, static_cast<std::uint64_t>(i));
      const jigsaw::JigsawInstance inst = jigsaw::make_instance(s, source);
      const std::string stem = "jigsaw_" + std::to_string(i);
      write_png(inst.base, fs::path(out) / (stem + "_base.png"));
      write_png(inst.candidate_a, fs::path(out) / (stem + "_a.png"));
      write_png(inst.candidate_b, fs::path(out) / (stem + "_b.png"));
      write_png(inst.original, fs::path(out) / (stem + "_original.png"));
      const json j{{"seed", s},
                   {"base", stem + "_base.png"},
                   {"candidate_a", stem + "_a.png"},
                   {"candidate_b", stem + "_b.png"},
                   {"original", stem + "_original.png"},
                   {"slot", {inst.slot.x1, inst.slot.y1, inst.slot.x2, inst.slot.y2}},
                   {"answer", std::string(1, jigsaw::to_char(inst.answer))}};
      std::ofstream(fs::path(out) / (stem + ".json"), std::ios::binary) << j.dump(2) << '\n';
      index << j.dump() << '\n';
    }
    std::cout << "wrote " << count << " puzzles to " << out << '\n';
  } catch (const Error& e) {
    std::cerr << to_string(e.kind()) << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
