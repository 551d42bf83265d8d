#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "toolgym/error.hpp"
#include "toolgym/eval.hpp"

using namespace toolgym;

int main(int argc, char** argv) {
  CLI::App app{"Scripted-policy evaluation"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "Roll out a policy and write a metrics report");
  std::string policy = "oracle";
  std::vector<std::string> tasks{"vsp_nav"};
  std::size_t count = 10;
  std::uint64_t seed = 0;
  std::string report_path;
  std::string csv_path;
  std::string server;
  int workers = 1;
  std::optional<std::uint64_t> schema_seed;
  run->add_option("--policy", policy, "oracle | noisy:<p> | no_tool | replay:<file.jsonl>");
  run->add_option("--task", tasks, "Task(s): vsp_nav vsp_verify jigsaw guiqa_fixture")->delimiter(',');
  run->add_option("--count", count, "Episodes per task")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Suite seed");
  run->add_option("--report", report_path, "Report JSON path")->required();
  run->add_option("--csv", csv_path, "Per-tool frequency CSV path");
  run->add_option("--server", server, "host:port of a running episode server (default: in-process)");
  run->add_option("--workers", workers, "Concurrent episodes")->check(CLI::PositiveNumber);
  run->add_option("--schema-seed", schema_seed, "Randomize tool identifiers with this seed");
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<episode::TaskKind> kinds;
    for (const std::string& t : tasks) kinds.push_back(episode::task_from_string(t));
    eval::SuiteOptions options;
    options.workers = workers;
    options.schema_seed = schema_seed;

    std::unique_ptr<eval::Backend> backend;
    if (server.empty()) {
      backend = std::make_unique<eval::InProcessBackend>();
    } else {
      const std::size_t colon = server.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--server expects host:port");
      backend = std::make_unique<eval::HttpBackend>(server.substr(0, colon), std::stoi(server.substr(colon + 1)));
    }
    const eval::PolicySpec spec = eval::PolicySpec::parse(policy);
    const eval::SuiteReport report = eval::run_suite(*backend, spec, kinds, count, seed, options);

    json j = report.to_json();
    j["policy"] = spec.name();
    j["seed"] = seed;
    j["count"] = count;
    std::ofstream(report_path, std::ios::binary) << j.dump(2) << '\n';
    if (!csv_path.empty()) std::ofstream(csv_path, std::ios::binary) << report.frequency_csv();

    std::cout << "task            episodes  #turns   CPS    Succ%    Acc%\n";
    for (const auto& [name, t] : report.tasks) {
      std::ostringstream succ;
      if (auto s = t.succ()) {
        succ.setf(std::ios::fixed);
        succ.precision(2);
        succ << *s;
      } else {
        succ << "—";
      }
      std::printf("%-15s %8ld %7.2f %6.2f %8s %7.2f\n", name.c_str(), t.episodes, t.mean_turns(), t.cps(),
                  succ.str().c_str(), t.acc());
    }
  } catch (const Error& e) {
    std::cerr << to_string(e.kind()) << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
