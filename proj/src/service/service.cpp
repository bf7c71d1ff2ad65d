#include "latcompass/service.hpp"

#include <httplib.h>

#include <cmath>
#include <limits>

#include "latcompass/builtin_generator.hpp"
#include "latcompass/encoding.hpp"
#include "latcompass/json_io.hpp"
#include "latcompass/kernels.hpp"
#include "latcompass/png_codec.hpp"
#include "latcompass/remote_generator.hpp"

namespace latcompass {

using Clock = std::chrono::steady_clock;

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be positive");
}

int require_int32(const json& body, const char* key) {
  const std::int64_t v = require_int(body, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw Error(ErrorCode::InvalidArgument, std::string(key) + " is out of range");
  }
  return static_cast<int>(v);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body);
  if (!body.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
  return body;
}

void reply_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, std::string_view code, const std::string& message, int status) {
  reply_json(res, {{"error_code", code}, {"message", message}}, status);
}

std::string image_url(const std::string& id) { return "/api/images/" + id; }

json latent_json(std::span<const double> v) { return json(std::vector<double>(v.begin(), v.end())); }

}  // namespace

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "port must be in 0..65535");
  if (backend.empty()) throw Error(ErrorCode::InvalidArgument, "backend must be 'builtin' or a URL");
  require_positive(truncation_theta, "truncation_theta");
  require_positive(svm_c, "svm_c");
  require_positive(step_multiplier, "step_multiplier");
  require_positive(max_imbalance_ratio, "max_imbalance_ratio");
  if (min_total < 1) throw Error(ErrorCode::InvalidArgument, "min_total must be positive");
  if (min_per_class < 1) throw Error(ErrorCode::InvalidArgument, "min_per_class must be positive");
  if (max_inflight_backend_calls < 1) throw Error(ErrorCode::InvalidArgument, "max_inflight_backend_calls must be positive");
  if (backend_timeout.count() < 1) throw Error(ErrorCode::InvalidArgument, "backend_timeout must be positive");
  if (session_ttl.count() < 1) throw Error(ErrorCode::InvalidArgument, "session_ttl must be positive");
  if (max_pool_request < 1) throw Error(ErrorCode::InvalidArgument, "max_pool_request must be positive");
  engine_config().validate();
}

EngineConfig ServiceConfig::engine_config() const {
  EngineConfig e;
  e.truncation_theta = truncation_theta;
  e.step_multiplier = step_multiplier;
  e.policy = CalibrationPolicy{min_total, min_per_class, max_imbalance_ratio};
  e.solver.c = svm_c;
  return e;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownImage:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownCompass:
    case ErrorCode::UnknownTrajectory:
    case ErrorCode::UnknownRecord:
      return 404;
    case ErrorCode::SingleClass:
    case ErrorCode::IterationLimit:
    case ErrorCode::DegenerateHyperplane:
    case ErrorCode::DegenerateStep:
      return 422;
    case ErrorCode::BackendUnavailable:
      return 502;
    case ErrorCode::StorageFailure:
      return 500;
    default:
      return 400;
  }
}

std::shared_ptr<const Generator> make_backend(const ServiceConfig& config) {
  if (config.backend == "builtin") return std::make_shared<BuiltinGenerator>();
  if (config.backend.rfind("http://", 0) == 0 || config.backend.rfind("https://", 0) == 0) {
    RemoteGeneratorOptions opts;
    opts.timeout = std::chrono::duration_cast<std::chrono::milliseconds>(config.backend_timeout);
    opts.max_inflight = config.max_inflight_backend_calls;
    return std::make_shared<RemoteGenerator>(config.backend, opts);
  }
  throw Error(ErrorCode::InvalidArgument, "backend must be 'builtin' or an http:// URL, got " + config.backend);
}

struct CompassService::State {
  struct SessionEntry {
    std::mutex mu;
    Session session;
    std::int64_t next_seed = 0;
  };
  struct CompassEntry {
    explicit CompassEntry(std::shared_ptr<const CalibratedCompass> c) : map(std::move(c)) {}
    std::mutex mu;
    CompassMap map;
    bool fingerprint_mismatch = false;
    std::string record_id;
    std::map<std::string, std::map<int, std::string>> step_images;  // trajectory -> index -> image
  };
  struct ImageEntry {
    std::shared_ptr<const Raster> raster;
    std::optional<LatentVector> z;
    std::string owner;
  };
  template <typename T>
  struct Slot {
    std::shared_ptr<T> value;
    Clock::time_point last_used;
  };

  mutable std::mutex mu;
  std::map<std::string, Slot<SessionEntry>> sessions;
  std::map<std::string, Slot<CompassEntry>> compasses;
  std::map<std::string, std::string> trajectory_owner;
  std::map<std::string, ImageEntry> images;
  Clock::time_point last_sweep = Clock::now();

  std::shared_ptr<SessionEntry> session(const std::string& id) {
    std::lock_guard lock(mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(ErrorCode::UnknownSession, "no session " + id);
    it->second.last_used = Clock::now();
    return it->second.value;
  }

  std::shared_ptr<CompassEntry> compass(const std::string& id) {
    std::lock_guard lock(mu);
    auto it = compasses.find(id);
    if (it == compasses.end()) throw Error(ErrorCode::UnknownCompass, "no compass " + id);
    it->second.last_used = Clock::now();
    return it->second.value;
  }

  std::shared_ptr<CompassEntry> compass_of_trajectory(const std::string& trajectory_id) {
    std::lock_guard lock(mu);
    auto t = trajectory_owner.find(trajectory_id);
    if (t == trajectory_owner.end()) throw Error(ErrorCode::UnknownTrajectory, "no trajectory " + trajectory_id);
    auto it = compasses.find(t->second);
    if (it == compasses.end()) throw Error(ErrorCode::UnknownTrajectory, "no trajectory " + trajectory_id);
    it->second.last_used = Clock::now();
    return it->second.value;
  }

  ImageEntry image(const std::string& id) const {
    std::lock_guard lock(mu);
    auto it = images.find(id);
    if (it == images.end()) throw Error(ErrorCode::UnknownImage, "no image " + id);
    return it->second;
  }

  void add_image(const std::string& id, const Raster& raster, std::optional<LatentVector> z, const std::string& owner) {
    std::lock_guard lock(mu);
    images.insert_or_assign(id, ImageEntry{std::make_shared<const Raster>(raster), std::move(z), owner});
  }

  std::string add_compass(std::shared_ptr<CompassEntry> entry) {
    const std::string id = entry->map.compass()->id;
    std::lock_guard lock(mu);
    compasses[id] = Slot<CompassEntry>{std::move(entry), Clock::now()};
    return id;
  }
};

namespace {

using State = CompassService::State;

json sample_json(const ImageSample& s, std::optional<Side> side) {
  return json{{"image_id", s.id},
              {"url", image_url(s.id)},
              {"seed", s.seed},
              {"category", s.category},
              {"z", latent_json(s.z.values())},
              {"side", std::string(side_name(side.value_or(Side::Unassigned)))}};
}

json session_json(const Session& s, const CalibrationPolicy& policy) {
  json pool = json::array();
  for (const auto& img : s.pool) {
    auto it = s.assignments.find(img.id);
    pool.push_back(sample_json(img, it == s.assignments.end() ? std::nullopt : std::optional<Side>(it->second)));
  }
  const int left = s.count(Side::Left);
  const int right = s.count(Side::Right);
  return json{{"session_id", s.id},
              {"category", s.category},
              {"space", s.space.to_string()},
              {"created_at", iso8601(s.created_at)},
              {"pool", std::move(pool)},
              {"counts", {{"left", left}, {"right", right}, {"total", left + right}}},
              {"policy",
               {{"min_total", policy.min_total},
                {"min_per_class", policy.min_per_class},
                {"max_imbalance_ratio", policy.max_imbalance_ratio}}}};
}

json compass_json(const CalibratedCompass& c, bool fingerprint_mismatch) {
  return json{{"compass_id", c.id},
              {"space", c.space.to_string()},
              {"direction", latent_json(c.direction.values())},
              {"direction_norm_check", std::sqrt(kernels::sum_squares(c.direction.values()))},
              {"bias", c.bias},
              {"weight_norm", c.weight_norm},
              {"step_unit", c.step_unit.magnitude()},
              {"feature_scale", c.feature_scale},
              {"source_session", c.source_session},
              {"origin_category", c.origin_category},
              {"n_left", c.training_stats.n_left},
              {"n_right", c.training_stats.n_right},
              {"separable", c.training_stats.separable},
              {"fingerprint_mismatch", fingerprint_mismatch}};
}

json step_json(const TrajectoryStep& s, const std::string& image_id) {
  json j{{"step_index", s.step_index},
         {"lambda", s.lambda},
         {"margin_value", s.margin_value},
         {"clipped", s.clipped},
         {"image_id", image_id},
         {"url", image_url(image_id)}};
  if (s.rendered_latent) j["rendered_latent"] = latent_json(s.rendered_latent->values());
  return j;
}

json trajectory_json(const Trajectory& t, const std::map<int, std::string>& images) {
  json steps = json::array();
  for (const auto& s : t.steps) steps.push_back(step_json(s, images.at(s.step_index)));
  return json{{"trajectory_id", t.id},
              {"compass_id", t.compass->id},
              {"category", t.category},
              {"start", latent_json(t.start.values())},
              {"start_image_id", t.source_image_id},
              {"steps", std::move(steps)}};
}

json record_summary(const DirectionRecord& r) { return record_to_json(r); }

// Registers the step's image and returns its id.
std::string register_step(State& state, State::CompassEntry& entry, const Trajectory& t, const TrajectoryStep& s) {
  const std::string id = make_token("img");
  state.add_image(id, s.image, s.rendered_latent, entry.map.compass()->id);
  entry.step_images[t.id][s.step_index] = id;
  return id;
}

}  // namespace

CompassService::CompassService(ServiceConfig config, std::shared_ptr<const Generator> backend)
    : config_((config.validate(), std::move(config))),
      backend_(std::move(backend)),
      engine_(backend_, config_.engine_config()),
      store_(config_.data_dir),
      fingerprint_(engine_.info().fingerprint()),
      state_(std::make_unique<State>()),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

CompassService::~CompassService() { stop(); }

std::size_t CompassService::session_count() const {
  std::lock_guard lock(state_->mu);
  return state_->sessions.size();
}

void CompassService::expire_idle(Clock::time_point now) {
  State& s = *state_;
  std::lock_guard lock(s.mu);
  const auto cutoff = now - config_.session_ttl;
  std::erase_if(s.sessions, [&](const auto& kv) { return kv.second.last_used < cutoff; });
  std::erase_if(s.compasses, [&](const auto& kv) { return kv.second.last_used < cutoff; });
  std::erase_if(s.trajectory_owner, [&](const auto& kv) { return !s.compasses.contains(kv.second); });
  std::erase_if(s.images, [&](const auto& kv) {
    return !s.sessions.contains(kv.second.owner) && !s.compasses.contains(kv.second.owner);
  });
  s.last_sweep = now;
}

void CompassService::install_routes() {
  auto& srv = *server_;
  State& st = *state_;
  const CompassEngine& eng = engine_;

  // Wraps a handler with the error mapping and the periodic idle sweep.
  auto guarded = [this](auto fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      const auto now = Clock::now();
      bool sweep = false;
      {
        std::lock_guard lock(state_->mu);
        sweep = now - state_->last_sweep > std::min<Clock::duration>(config_.session_ttl / 10, std::chrono::minutes(1));
      }
      if (sweep) expire_idle(now);
      try {
        fn(req, res);
      } catch (const Error& e) {
        reply_error(res, error_name(e.code()), e.what(), http_status(e.code()));
      } catch (const json::exception& e) {
        reply_error(res, error_name(ErrorCode::InvalidArgument), std::string("malformed JSON: ") + e.what(), 400);
      }
    };
  };
  auto param = [](const httplib::Request& req) { return req.matches[1].str(); };

  srv.set_payload_max_length(16u << 20);
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    reply_error(res, "Internal", what, 500);
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) reply_error(res, "NotFound", "no such endpoint", res.status);
  });

  srv.Get("/api/info", guarded([this](const httplib::Request&, httplib::Response& res) {
    const auto& p = engine_.config().policy;
    reply_json(res, {{"generator", info_to_json(engine_.info())},
                     {"fingerprint", fingerprint_},
                     {"kernels", std::string(kernels::isa_name(kernels::active().isa))},
                     {"truncation_theta", engine_.config().truncation_theta},
                     {"step_multiplier", engine_.config().step_multiplier},
                     {"initial_steps", kInitialSteps},
                     {"policy",
                      {{"min_total", p.min_total},
                       {"min_per_class", p.min_per_class},
                       {"max_imbalance_ratio", p.max_imbalance_ratio}}}});
  }));

  srv.Post("/api/sessions", guarded([&st, &eng](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    auto entry = std::make_shared<State::SessionEntry>();
    entry->session = eng.create_session(require_int32(body, "category"), SpaceTag::parse(require_string(body, "space")));
    entry->next_seed = static_cast<std::int64_t>(fnv1a64(entry->session.id) & 0x7fffffffu) * 1000;
    const json out = session_json(entry->session, eng.config().policy);
    {
      std::lock_guard lock(st.mu);
      st.sessions[entry->session.id] = State::Slot<State::SessionEntry>{entry, Clock::now()};
    }
    reply_json(res, out, 201);
  }));

  srv.Get(R"(/api/sessions/([^/]+))", guarded([&st, &eng, param](const httplib::Request& req, httplib::Response& res) {
    auto entry = st.session(param(req));
    std::lock_guard lock(entry->mu);
    reply_json(res, session_json(entry->session, eng.config().policy));
  }));

  srv.Post(R"(/api/sessions/([^/]+)/pool)",
           guarded([this, &st, &eng, param](const httplib::Request& req, httplib::Response& res) {
             auto entry = st.session(param(req));
             const json body = parse_body(req);
             const int count = require_int32(body, "count");
             if (count < 1 || count > config_.max_pool_request) {
               throw Error(ErrorCode::InvalidArgument,
                           "count must be in 1.." + std::to_string(config_.max_pool_request));
             }
             std::lock_guard lock(entry->mu);
             const std::int64_t seed = body.contains("seed") ? require_int(body, "seed") : entry->next_seed;
             if (seed > std::numeric_limits<std::int64_t>::max() - count) {
               throw Error(ErrorCode::InvalidArgument, "seed is out of range");
             }
             const auto fresh = eng.fill_pool(entry->session, count, seed);
             entry->next_seed = seed + count;
             json samples = json::array();
             for (const auto& s : fresh) {
               st.add_image(s.id, s.pixels, s.z, entry->session.id);
               samples.push_back(sample_json(s, std::nullopt));
             }
             reply_json(res, {{"session_id", entry->session.id}, {"samples", std::move(samples)}});
           }));

  srv.Post(R"(/api/sessions/([^/]+)/assignments)",
           guarded([&st, &eng, param](const httplib::Request& req, httplib::Response& res) {
             auto entry = st.session(param(req));
             const json body = parse_body(req);
             const std::string image_id = require_string(body, "image_id");
             const Side side = parse_side(require_string(body, "side"));
             std::lock_guard lock(entry->mu);
             eng.assign(entry->session, image_id, side);
             const int left = entry->session.count(Side::Left);
             const int right = entry->session.count(Side::Right);
             reply_json(res, {{"image_id", image_id},
                              {"side", std::string(side_name(side))},
                              {"counts", {{"left", left}, {"right", right}, {"total", left + right}}}});
           }));

  srv.Post(R"(/api/sessions/([^/]+)/calibrate)",
           guarded([&st, &eng, param](const httplib::Request& req, httplib::Response& res) {
             auto entry = st.session(param(req));
             parse_body(req);
             std::shared_ptr<const CalibratedCompass> compass;
             {
               std::lock_guard lock(entry->mu);
               compass = std::make_shared<const CalibratedCompass>(eng.calibrate(entry->session));
             }
             st.add_compass(std::make_shared<State::CompassEntry>(compass));
             reply_json(res, compass_json(*compass, false), 201);
           }));

  srv.Get(R"(/api/images/([^/]+))", guarded([&st, param](const httplib::Request& req, httplib::Response& res) {
    const auto img = st.image(param(req));
    const auto png = encode_png(*img.raster);
    res.status = 200;
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }));

  srv.Get(R"(/api/compasses/([^/]+))", guarded([&st, param](const httplib::Request& req, httplib::Response& res) {
    auto entry = st.compass(param(req));
    std::lock_guard lock(entry->mu);
    json out = compass_json(*entry->map.compass(), entry->fingerprint_mismatch);
    if (!entry->record_id.empty()) out["record_id"] = entry->record_id;
    reply_json(res, out);
  }));

  srv.Post(R"(/api/compasses/([^/]+)/trajectories)",
           guarded([&st, &eng, param](const httplib::Request& req, httplib::Response& res) {
             auto entry = st.compass(param(req));
             const json body = parse_body(req);
             const bool by_image = body.contains("start_image_id");
             const bool by_seed = body.contains("seed");
             if (by_image == by_seed) {
               throw Error(ErrorCode::InvalidArgument, "give exactly one of start_image_id and seed");
             }
             std::lock_guard lock(entry->mu);
             const auto& compass = entry->map.compass();
             const int category = body.contains("category") ? require_int32(body, "category") : compass->origin_category;
             Trajectory* t = nullptr;
             if (by_image) {
               const std::string image_id = require_string(body, "start_image_id");
               const auto img = st.image(image_id);
               if (!img.z) throw Error(ErrorCode::InvalidArgument, "image " + image_id + " has no latent to start from");
               t = &entry->map.add_trajectory(eng, *img.z, category);
               t->source_image_id = image_id;
             } else {
               if (!eng.info().has_category(category)) {
                 throw Error(ErrorCode::UnknownCategory, "unknown category " + std::to_string(category));
               }
               const ImageSample start = eng.generator().sample(require_int(body, "seed"), category);
               st.add_image(start.id, start.pixels, start.z, compass->id);
               t = &entry->map.add_trajectory(eng, start, category);
             }
             for (const auto& s : t->steps) register_step(st, *entry, *t, s);
             {
               std::lock_guard slock(st.mu);
               st.trajectory_owner[t->id] = compass->id;
             }
             reply_json(res, trajectory_json(*t, entry->step_images[t->id]), 201);
           }));

  srv.Get(R"(/api/compasses/([^/]+)/trajectories)",
          guarded([&st, param](const httplib::Request& req, httplib::Response& res) {
            auto entry = st.compass(param(req));
            std::lock_guard lock(entry->mu);
            json list = json::array();
            for (const auto& t : entry->map.trajectories()) list.push_back(trajectory_json(t, entry->step_images[t.id]));
            reply_json(res, {{"compass_id", entry->map.compass()->id}, {"trajectories", std::move(list)}});
          }));

  srv.Get(R"(/api/trajectories/([^/]+))", guarded([&st, param](const httplib::Request& req, httplib::Response& res) {
    const std::string id = param(req);
    auto entry = st.compass_of_trajectory(id);
    std::lock_guard lock(entry->mu);
    Trajectory* t = entry->map.find(id);
    if (!t) throw Error(ErrorCode::UnknownTrajectory, "no trajectory " + id);
    reply_json(res, trajectory_json(*t, entry->step_images[t->id]));
  }));

  srv.Post(R"(/api/trajectories/([^/]+)/extend)",
           guarded([&st, &eng, param](const httplib::Request& req, httplib::Response& res) {
             const std::string id = param(req);
             auto entry = st.compass_of_trajectory(id);
             const json body = parse_body(req);
             const std::string end = require_string(body, "end");
             if (end != "forward" && end != "backward") {
               throw Error(ErrorCode::InvalidArgument, "end must be forward or backward");
             }
             std::lock_guard lock(entry->mu);
             Trajectory* t = entry->map.find(id);
             if (!t) throw Error(ErrorCode::UnknownTrajectory, "no trajectory " + id);
             const TrajectoryStep& step = eng.extend(*t, end == "forward" ? End::Forward : End::Backward);
             const std::string image_id = register_step(st, *entry, *t, step);
             reply_json(res, {{"trajectory_id", t->id},
                              {"step", step_json(step, image_id)},
                              {"min_index", t->min_index()},
                              {"max_index", t->max_index()}});
           }));

  srv.Post(R"(/api/compasses/([^/]+)/save)",
           guarded([this, &st, param](const httplib::Request& req, httplib::Response& res) {
             auto entry = st.compass(param(req));
             const json body = parse_body(req);
             const std::string label = require_string(body, "label");
             std::shared_ptr<const CalibratedCompass> compass;
             {
               std::lock_guard lock(entry->mu);
               compass = entry->map.compass();
             }
             const DirectionRecord r = store_.save(*compass, label, compass->origin_category, fingerprint_);
             reply_json(res, record_summary(r), 201);
           }));

  srv.Get("/api/directions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (req.has_param("status") && req.get_param_value("status") != "approved") {
      throw Error(ErrorCode::InvalidArgument, "the public listing shows approved directions only");
    }
    std::optional<SpaceTag> space;
    if (req.has_param("space") && !req.get_param_value("space").empty()) {
      space = SpaceTag::parse(req.get_param_value("space"));
    }
    json list = json::array();
    for (const auto& r : store_.list(ModerationStatus::Approved, space)) list.push_back(record_summary(r));
    reply_json(res, {{"directions", std::move(list)}});
  }));

  srv.Post(R"(/api/directions/([^/]+)/load)",
           guarded([this, &st, param](const httplib::Request& req, httplib::Response& res) {
             parse_body(req);
             const DirectionRecord r = store_.get(param(req));
             LoadedCompass loaded = to_compass(r, fingerprint_);
             auto compass = std::make_shared<const CalibratedCompass>(std::move(loaded.compass));
             auto entry = std::make_shared<State::CompassEntry>(compass);
             entry->fingerprint_mismatch = loaded.fingerprint_mismatch;
             entry->record_id = r.id;
             st.add_compass(entry);
             json out = compass_json(*compass, loaded.fingerprint_mismatch);
             out["record_id"] = r.id;
             out["label"] = r.label;
             reply_json(res, out, 201);
           }));

  srv.Post(R"(/api/directions/([^/]+)/moderation)",
           guarded([this, param](const httplib::Request& req, httplib::Response& res) {
             const json body = parse_body(req);
             const ModerationStatus status = parse_status(require_string(body, "status"));
             reply_json(res, record_summary(store_.set_moderation_status(param(req), status)));
           }));
}

int CompassService::bind(const std::string& host, int port) {
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

void CompassService::listen() { server_->listen_after_bind(); }

int CompassService::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return bound;
}

void CompassService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace latcompass
