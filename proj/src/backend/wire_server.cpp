#include "latcompass/wire_server.hpp"

#include <httplib.h>

#include "latcompass/encoding.hpp"
#include "latcompass/error.hpp"
#include "latcompass/json_io.hpp"
#include "latcompass/png_codec.hpp"

namespace latcompass {
namespace {

void reply_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    const int status = e.code() == ErrorCode::BackendUnavailable ? 502 : 400;
    reply_json(res, {{"error_code", error_name(e.code())}, {"message", e.what()}}, status);
  } catch (const json::exception& e) {
    reply_json(res, {{"error_code", "InvalidArgument"}, {"message", e.what()}}, 400);
  }
}

std::string png_b64(const Raster& r) { return base64_encode(encode_png(r)); }

LatentVector latent_from(const json& body) {
  return LatentVector(doubles_from_json(require_field(body, "z")), SpaceTag::z());
}

}  // namespace

GeneratorWireServer::GeneratorWireServer(std::shared_ptr<const Generator> generator)
    : generator_(std::move(generator)), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;
  const Generator& gen = *generator_;

  srv.Get("/info", [&gen](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply_json(res, info_to_json(gen.info())); });
  });
  srv.Post("/sample", [&gen](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      const ImageSample s = gen.sample(require_int(body, "seed"), static_cast<int>(require_int(body, "category")));
      reply_json(res, {{"z", std::vector<double>(s.z.values().begin(), s.z.values().end())},
                       {"image_png_b64", png_b64(s.pixels)}});
    });
  });
  srv.Post("/render", [&gen](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      const Raster r = gen.render(latent_from(body), static_cast<int>(require_int(body, "category")));
      reply_json(res, {{"image_png_b64", png_b64(r)}});
    });
  });
  srv.Post("/activations", [&gen](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      const ActivationTensor a = gen.activations(latent_from(body), static_cast<int>(require_int(body, "category")),
                                                 static_cast<int>(require_int(body, "layer")));
      reply_json(res, {{"shape", {a.channels, a.height, a.width}}, {"data", a.data}});
    });
  });
  srv.Post("/render_from_activations", [&gen](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      const auto& shape = require_field(body, "shape");
      if (!shape.is_array() || shape.size() != 3) throw Error(ErrorCode::ShapeMismatch, "shape must be [c,h,w]");
      ActivationTensor a;
      a.layer = static_cast<int>(require_int(body, "layer"));
      a.channels = shape[0].get<int>();
      a.height = shape[1].get<int>();
      a.width = shape[2].get<int>();
      a.data = doubles_from_json(require_field(body, "data"));
      const Raster r = gen.render_from_activations(a, static_cast<int>(require_int(body, "category")));
      reply_json(res, {{"image_png_b64", png_b64(r)}});
    });
  });
}

GeneratorWireServer::~GeneratorWireServer() { stop(); }

int GeneratorWireServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::InvalidArgument, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::InvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void GeneratorWireServer::listen() { server_->listen_after_bind(); }

int GeneratorWireServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return bound;
}

void GeneratorWireServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace latcompass
