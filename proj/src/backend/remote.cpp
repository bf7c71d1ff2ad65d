#include "latcompass/remote_generator.hpp"

#include <httplib.h>

#include <cmath>

#include "latcompass/encoding.hpp"
#include "latcompass/error.hpp"
#include "latcompass/json_io.hpp"
#include "latcompass/png_codec.hpp"

namespace latcompass {
namespace {

[[noreturn]] void unavailable(const std::string& what) {
  throw Error(ErrorCode::BackendUnavailable, "generator backend: " + what);
}

// Codes an adapter may legitimately report for a bad request.
bool forwardable(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownCategory:
    case ErrorCode::UnknownLayer:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonFinite:
    case ErrorCode::InvalidArgument:
      return true;
    default:
      return false;
  }
}

std::string checked_body(const httplib::Result& res, const std::string& path) {
  if (!res) unavailable(path + " unreachable (" + httplib::to_string(res.error()) + ")");
  if (res->status == 200) return res->body;
  if (res->status >= 400 && res->status < 500) {
    try {
      const json err = json::parse(res->body);
      const auto code = error_from_name(err.value("error_code", std::string()));
      if (code && forwardable(*code)) throw Error(*code, err.value("message", std::string(path)));
    } catch (const json::exception&) {
    }
  }
  unavailable(path + " returned HTTP " + std::to_string(res->status));
}

json parse_reply(const std::string& body, const std::string& path) {
  try {
    return json::parse(body);
  } catch (const json::exception&) {
    unavailable(path + " returned malformed JSON");
  }
}

Raster decode_image(const json& reply, const std::string& path) {
  try {
    const auto bytes = base64_decode(require_string(reply, "image_png_b64"));
    return decode_png(bytes);
  } catch (const Error& e) {
    unavailable(path + ": " + e.what());
  }
}

json latent_json(const LatentVector& z) { return json(std::vector<double>(z.values().begin(), z.values().end())); }

}  // namespace

class RemoteGenerator::Lease {
 public:
  explicit Lease(const RemoteGenerator& owner) : owner_(owner) {
    std::unique_lock lock(owner_.mu_);
    owner_.cv_.wait(lock, [&] { return owner_.inflight_ < owner_.options_.max_inflight; });
    ++owner_.inflight_;
    if (!owner_.idle_.empty()) {
      client_ = std::move(owner_.idle_.back());
      owner_.idle_.pop_back();
    }
    lock.unlock();
    if (!client_) {
      client_ = std::make_unique<httplib::Client>(owner_.origin_);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(owner_.options_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(owner_.options_.timeout - secs);
      client_->set_connection_timeout(secs.count(), usecs.count());
      client_->set_read_timeout(secs.count(), usecs.count());
      client_->set_write_timeout(secs.count(), usecs.count());
      client_->set_keep_alive(true);
    }
  }
  ~Lease() {
    std::lock_guard lock(owner_.mu_);
    owner_.idle_.push_back(std::move(client_));
    --owner_.inflight_;
    owner_.cv_.notify_one();
  }
  httplib::Client& client() { return *client_; }

 private:
  const RemoteGenerator& owner_;
  std::unique_ptr<httplib::Client> client_;
};

RemoteGenerator::RemoteGenerator(const std::string& base_url, RemoteGeneratorOptions options)
    : options_(options) {
  if (options_.max_inflight < 1) throw Error(ErrorCode::InvalidArgument, "max_inflight must be >= 1");
  const auto scheme = base_url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::InvalidArgument, "backend URL needs a scheme: " + base_url);
  const auto path = base_url.find('/', scheme + 3);
  origin_ = base_url.substr(0, path);
  if (path != std::string::npos) prefix_ = base_url.substr(path);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

RemoteGenerator::~RemoteGenerator() = default;

std::string RemoteGenerator::get(const std::string& path) const {
  Lease lease(*this);
  return checked_body(lease.client().Get(prefix_ + path), path);
}

std::string RemoteGenerator::post(const std::string& path, const std::string& body) const {
  Lease lease(*this);
  return checked_body(lease.client().Post(prefix_ + path, body, "application/json"), path);
}

GeneratorInfo RemoteGenerator::info() const {
  {
    std::lock_guard lock(mu_);
    if (info_) return *info_;
  }
  const json reply = parse_reply(get("/info"), "/info");
  GeneratorInfo parsed;
  try {
    parsed = info_from_json(reply);
  } catch (const Error& e) {
    unavailable(std::string("/info: ") + e.what());
  } catch (const json::exception& e) {
    unavailable(std::string("/info: ") + e.what());
  }
  std::lock_guard lock(mu_);
  if (!info_) info_ = std::move(parsed);
  return *info_;
}

ImageSample RemoteGenerator::sample(std::int64_t seed, int category) const {
  const GeneratorInfo gi = info();
  if (!gi.has_category(category)) throw Error(ErrorCode::UnknownCategory, "unknown category " + std::to_string(category));
  const json reply = parse_reply(post("/sample", json{{"seed", seed}, {"category", category}}.dump()), "/sample");
  std::vector<double> z;
  try {
    z = doubles_from_json(require_field(reply, "z"));
  } catch (const Error& e) {
    unavailable(std::string("/sample: ") + e.what());
  }
  if (z.size() != static_cast<std::size_t>(gi.latent_dim)) unavailable("/sample returned a latent of the wrong dimension");
  for (double v : z) {
    if (!std::isfinite(v)) unavailable("/sample returned a non-finite latent");
  }
  Raster pixels = decode_image(reply, "/sample");
  return ImageSample{make_token("img"), LatentVector(std::move(z), SpaceTag::z()), category, seed, std::move(pixels)};
}

Raster RemoteGenerator::render(const LatentVector& z, int category) const {
  const GeneratorInfo gi = info();
  if (!z.tag().is_z()) throw Error(ErrorCode::SpaceMismatch, "render expects a Z-space vector");
  if (z.size() != static_cast<std::size_t>(gi.latent_dim)) {
    throw Error(ErrorCode::DimensionMismatch, "latent dimension does not match the backend");
  }
  if (!gi.has_category(category)) throw Error(ErrorCode::UnknownCategory, "unknown category " + std::to_string(category));
  const json reply =
      parse_reply(post("/render", json{{"z", latent_json(z)}, {"category", category}}.dump()), "/render");
  return decode_image(reply, "/render");
}

ActivationTensor RemoteGenerator::activations(const LatentVector& z, int category, int layer) const {
  const GeneratorInfo gi = info();
  const LayerInfo* li = gi.find_layer(layer);
  if (!li) throw Error(ErrorCode::UnknownLayer, "unknown layer " + std::to_string(layer));
  if (z.size() != static_cast<std::size_t>(gi.latent_dim)) {
    throw Error(ErrorCode::DimensionMismatch, "latent dimension does not match the backend");
  }
  const json reply = parse_reply(
      post("/activations", json{{"z", latent_json(z)}, {"category", category}, {"layer", layer}}.dump()),
      "/activations");
  ActivationTensor act;
  act.layer = layer;
  try {
    const auto& shape = require_field(reply, "shape");
    if (!shape.is_array() || shape.size() != 3) unavailable("/activations returned a bad shape");
    act.channels = shape[0].get<int>();
    act.height = shape[1].get<int>();
    act.width = shape[2].get<int>();
    act.data = doubles_from_json(require_field(reply, "data"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BackendUnavailable) throw;
    unavailable(std::string("/activations: ") + e.what());
  } catch (const json::exception& e) {
    unavailable(std::string("/activations: ") + e.what());
  }
  if (!act.same_shape(*li) || act.data.size() != li->size()) {
    unavailable("/activations returned a tensor that does not match the declared layer shape");
  }
  return act;
}

Raster RemoteGenerator::render_from_activations(const ActivationTensor& act, int category) const {
  const GeneratorInfo gi = info();
  const LayerInfo* li = gi.find_layer(act.layer);
  if (!li) throw Error(ErrorCode::UnknownLayer, "unknown layer " + std::to_string(act.layer));
  if (!act.same_shape(*li) || act.data.size() != li->size()) {
    throw Error(ErrorCode::ShapeMismatch, "activation shape does not match the declared layer shape");
  }
  const json body{{"category", category},
                  {"layer", act.layer},
                  {"shape", {act.channels, act.height, act.width}},
                  {"data", act.data}};
  const json reply = parse_reply(post("/render_from_activations", body.dump()), "/render_from_activations");
  return decode_image(reply, "/render_from_activations");
}

}  // namespace latcompass
