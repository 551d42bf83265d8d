#include <CLI11.hpp>

#include <iostream>

#include "toolgym/curation.hpp"
#include "toolgym/error.hpp"

using namespace toolgym;

int main(int argc, char** argv) {
  CLI::App app{"Blueprint-driven trajectory curation"};
  std::vector<std::string> tasks{"vsp_nav"};
  curation::CurationConfig cfg;
  std::string out;
  app.add_option("--task", tasks, "Task(s): vsp_nav vsp_verify jigsaw guiqa_fixture, or all")->delimiter(',');
  app.add_option("--count", cfg.count, "Total records, tasks interleaved")->check(CLI::PositiveNumber);
  app.add_option("--reflection", cfg.perturbation.reflection_fraction, "Fraction of reflection variants");
  app.add_option("--failure", cfg.perturbation.failure_fraction, "Fraction of tool-failure variants");
  app.add_option("--failure-retries", cfg.perturbation.failure_retries, "Error observations per failure variant");
  app.add_option("--no-tool", cfg.perturbation.no_tool_fraction, "Fraction of direct-answer variants");
  app.add_option("--seed", cfg.seed, "Seed");
  app.add_flag("--astar", cfg.use_astar, "Let VSP navigation blueprints call AStar");
  app.add_option("--out", out, "Output directory")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    cfg.tasks.clear();
    for (const std::string& t : tasks) {
      if (t == "all") {
        cfg.tasks = {episode::TaskKind::VspNav, episode::TaskKind::VspVerify, episode::TaskKind::Jigsaw,
                     episode::TaskKind::GuiQa};
        break;
      }
      cfg.tasks.push_back(episode::task_from_string(t));
    }
    cfg.perturbation.seed = cfg.seed;
    const auto records = curation::curate(cfg);
    const curation::Manifest m = curation::emit_dataset(records, out);
    std::cout << m.to_json().dump(2) << '\n';
  } catch (const Error& e) {
    std::cerr << to_string(e.kind()) << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
