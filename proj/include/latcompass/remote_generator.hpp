#pragma once

// Client for an external generator speaking the JSON-over-HTTP protocol:
//
//   GET  /info                      -> {latent_dim, categories, layers, image_size}
//   POST /sample        {seed, category}                 -> {z, image_png_b64}
//   POST /render        {z, category}                    -> {image_png_b64}
//   POST /activations   {z, category, layer}             -> {shape, data}
//   POST /render_from_activations {category, layer, shape, data} -> {image_png_b64}
//
// Errors come back as 4xx {error_code, message}. Recognized codes map to the
// matching ErrorCode; transport failures, 5xx and malformed replies map to
// BackendUnavailable.

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "latcompass/generator.hpp"

namespace httplib {
class Client;
}

namespace latcompass {

struct RemoteGeneratorOptions {
  std::chrono::milliseconds timeout{30000};
  int max_inflight = 4;
};

class RemoteGenerator final : public Generator {
 public:
  // base_url: "http://host:port" optionally followed by a path prefix.
  explicit RemoteGenerator(const std::string& base_url, RemoteGeneratorOptions options = {});
  ~RemoteGenerator() override;

  RemoteGenerator(const RemoteGenerator&) = delete;
  RemoteGenerator& operator=(const RemoteGenerator&) = delete;

  GeneratorInfo info() const override;
  ImageSample sample(std::int64_t seed, int category) const override;
  Raster render(const LatentVector& z, int category) const override;
  ActivationTensor activations(const LatentVector& z, int category, int layer) const override;
  Raster render_from_activations(const ActivationTensor& act, int category) const override;

 private:
  class Lease;

  std::string get(const std::string& path) const;
  std::string post(const std::string& path, const std::string& body) const;

  std::string origin_;
  std::string prefix_;
  RemoteGeneratorOptions options_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  mutable std::vector<std::unique_ptr<httplib::Client>> idle_;
  mutable int inflight_ = 0;
  mutable std::optional<GeneratorInfo> info_;
};

}  // namespace latcompass
