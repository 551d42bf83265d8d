#include <CLI11.hpp>

#include <iostream>

#include "toolgym/error.hpp"
#include "toolgym/server.hpp"

using namespace toolgym;

int main(int argc, char** argv) {
  CLI::App app{"Episode server"};
  std::string host = "127.0.0.1";
  int port = 8080;
  app.add_option("--host", host, "Bind address");
  std::size_t retain = server::EpisodeManager::kDefaultRetainFinished;
  app.add_option("--port", port, "Port (0 picks a free one)");
  app.add_option("--retain", retain, "Finished episodes kept for inspection")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    server::EpisodeManager manager({}, retain);
    server::HttpServer http(manager);
    const int bound = http.bind(host, port);
    std::cout << "listening on http://" << host << ':' << bound << std::endl;
    http.listen();
  } catch (const Error& e) {
    std::cerr << to_string(e.kind()) << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
