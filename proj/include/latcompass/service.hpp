#pragma once

// HTTP+JSON service binding the engine, a generator backend and the direction
// store into the interactive tool.
//
//   GET  /api/info
//   POST /api/sessions                       {category, space}
//   GET  /api/sessions/{id}
//   POST /api/sessions/{id}/pool             {count, seed?}
//   POST /api/sessions/{id}/assignments      {image_id, side}
//   POST /api/sessions/{id}/calibrate
//   GET  /api/images/{id}                    image/png
//   GET  /api/compasses/{id}
//   POST /api/compasses/{id}/trajectories    {start_image_id | seed, category?}
//   GET  /api/compasses/{id}/trajectories
//   GET  /api/trajectories/{id}
//   POST /api/trajectories/{id}/extend       {end: "forward" | "backward"}
//   POST /api/compasses/{id}/save            {label}
//   GET  /api/directions?status=approved&space=...
//   POST /api/directions/{id}/load
//   POST /api/directions/{id}/moderation     {status}
//
// Failures reply {error_code, message} with the status from http_status().
// Sessions, compasses and their images live in memory and expire after an
// idle period; saved directions are the only durable state.

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "latcompass/compass_engine.hpp"
#include "latcompass/direction_store.hpp"
#include "latcompass/error.hpp"
#include "latcompass/generator.hpp"

namespace httplib {
class Server;
}

namespace latcompass {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string backend = "builtin";  // "builtin" or the base URL of an external generator
  std::filesystem::path data_dir = "latcompass-data";
  double truncation_theta = 2.0;
  double svm_c = 1.0;
  int min_total = 14;
  int min_per_class = 5;
  double max_imbalance_ratio = 2.0;
  double step_multiplier = 1.0;
  int max_inflight_backend_calls = 4;
  std::chrono::seconds backend_timeout{30};
  std::chrono::seconds session_ttl{24 * 3600};
  int max_pool_request = 256;

  // Throws InvalidArgument naming the first bad field.
  void validate() const;
  EngineConfig engine_config() const;
};

int http_status(ErrorCode code);

// Builtin generator, or a RemoteGenerator for an http:// URL.
std::shared_ptr<const Generator> make_backend(const ServiceConfig& config);

class CompassService {
 public:
  // Reads the backend descriptor (BackendUnavailable if unreachable) and opens
  // the store (StorageFailure if data_dir is not writable).
  CompassService(ServiceConfig config, std::shared_ptr<const Generator> backend);
  ~CompassService();

  CompassService(const CompassService&) = delete;
  CompassService& operator=(const CompassService&) = delete;

  const ServiceConfig& config() const noexcept { return config_; }
  const CompassEngine& engine() const noexcept { return engine_; }
  DirectionStore& store() noexcept { return store_; }

  // Port 0 picks a free port; returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop(); in-flight requests complete first.
  void listen();
  int start(const std::string& host, int port);
  void stop();

  // Drops sessions, compasses and images idle since before now - ttl.
  void expire_idle(std::chrono::steady_clock::time_point now);
  std::size_t session_count() const;

  struct State;  // registries; defined in service.cpp

 private:
  void install_routes();

  ServiceConfig config_;
  std::shared_ptr<const Generator> backend_;
  CompassEngine engine_;
  DirectionStore store_;
  std::string fingerprint_;
  std::unique_ptr<State> state_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace latcompass
