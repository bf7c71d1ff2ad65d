#pragma once

// Serves any Generator over the external generator protocol, so the builtin
// generator (or a test double) can stand behind a RemoteGenerator.

#include <memory>
#include <string>
#include <thread>

#include "latcompass/generator.hpp"

namespace httplib {
class Server;
}

namespace latcompass {

class GeneratorWireServer {
 public:
  explicit GeneratorWireServer(std::shared_ptr<const Generator> generator);
  ~GeneratorWireServer();

  GeneratorWireServer(const GeneratorWireServer&) = delete;
  GeneratorWireServer& operator=(const GeneratorWireServer&) = delete;

  // Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  // bind() + listen() on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  std::shared_ptr<const Generator> generator_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace latcompass
