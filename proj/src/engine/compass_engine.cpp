#include "latcompass/compass_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <future>
#include <thread>

#include "latcompass/encoding.hpp"
#include "latcompass/error.hpp"
#include "latcompass/kernels.hpp"

namespace latcompass {
namespace {

constexpr int kMaxWorkers = 8;
constexpr double kDegenerateStep = 1e-9;

// Runs fn(0..count-1) on up to kMaxWorkers threads; rethrows the first error.
template <typename Fn>
void run_indexed(int count, Fn&& fn) {
  const int workers = std::min(count, kMaxWorkers);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::future<void>> futures;
  futures.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&] {
      for (int i = next++; i < count; i = next++) fn(i);
    }));
  }
  std::exception_ptr first;
  for (auto& f : futures) {
    try {
      f.get();
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

std::vector<double> flatten_scaled(const ActivationTensor& act, double scale) {
  std::vector<double> out(act.data);
  for (double& v : out) v /= scale;
  return out;
}

}  // namespace

std::string_view side_name(Side side) {
  switch (side) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Unassigned: return "unassigned";
  }
  return "unassigned";
}

Side parse_side(std::string_view text) {
  if (text == "left") return Side::Left;
  if (text == "right") return Side::Right;
  if (text == "unassigned") return Side::Unassigned;
  throw Error(ErrorCode::InvalidArgument, "side must be left, right or unassigned");
}

const ImageSample* Session::find(const std::string& image_id) const {
  for (const auto& s : pool) {
    if (s.id == image_id) return &s;
  }
  return nullptr;
}

int Session::count(Side side) const {
  return static_cast<int>(std::count_if(assignments.begin(), assignments.end(),
                                        [&](const auto& kv) { return kv.second == side; }));
}

double CalibratedCompass::margin(std::span<const double> feature) const {
  if (feature.size() != direction.size()) {
    throw Error(ErrorCode::DimensionMismatch, "feature dimension does not match the compass");
  }
  return weight_norm * kernels::dot(direction.values(), feature) + bias;
}

const TrajectoryStep& Trajectory::center() const {
  for (const auto& s : steps) {
    if (s.step_index == 0) return s;
  }
  throw Error(ErrorCode::InvalidArgument, "trajectory has no center step");
}

void EngineConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(truncation_theta)) throw Error(ErrorCode::InvalidArgument, "truncation_theta must be positive");
  if (!positive(step_multiplier)) throw Error(ErrorCode::InvalidArgument, "step_multiplier must be positive");
  if (policy.min_total < 1 || policy.min_per_class < 1) {
    throw Error(ErrorCode::InvalidArgument, "calibration minimums must be positive");
  }
  if (!(policy.max_imbalance_ratio >= 1.0) || !std::isfinite(policy.max_imbalance_ratio)) {
    throw Error(ErrorCode::InvalidArgument, "max_imbalance_ratio must be >= 1");
  }
  solver.validate();
}

CompassEngine::CompassEngine(std::shared_ptr<const Generator> generator, EngineConfig config)
    : generator_(std::move(generator)), config_(config) {
  if (!generator_) throw Error(ErrorCode::InvalidArgument, "engine needs a generator");
  config_.validate();
  info_ = generator_->info();
  info_.validate();
}

void CompassEngine::check_space(const SpaceTag& space) const {
  if (!space.is_z() && !info_.find_layer(space.layer_index())) {
    throw Error(ErrorCode::UnknownLayer, "unknown layer " + std::to_string(space.layer_index()));
  }
}

Session CompassEngine::create_session(int category, SpaceTag space) const {
  if (!info_.has_category(category)) {
    throw Error(ErrorCode::UnknownCategory, "unknown category " + std::to_string(category));
  }
  check_space(space);
  Session s;
  s.id = make_token("ses");
  s.category = category;
  s.space = space;
  s.created_at = std::chrono::system_clock::now();
  return s;
}

std::vector<ImageSample> CompassEngine::fill_pool(Session& session, int count, std::int64_t seed) const {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "pool count must be >= 1");
  std::vector<std::optional<ImageSample>> slots(static_cast<std::size_t>(count));
  run_indexed(count, [&](int i) {
    slots[static_cast<std::size_t>(i)] = generator_->sample(seed + i, session.category);
  });
  std::vector<ImageSample> fresh;
  fresh.reserve(slots.size());
  for (auto& s : slots) {
    if (s->z.size() != static_cast<std::size_t>(info_.latent_dim)) {
      throw Error(ErrorCode::BackendUnavailable, "backend sample has the wrong latent dimension");
    }
    fresh.push_back(std::move(*s));
  }
  session.pool.insert(session.pool.end(), fresh.begin(), fresh.end());
  return fresh;
}

void CompassEngine::assign(Session& session, const std::string& image_id, Side side) const {
  if (!session.find(image_id)) throw Error(ErrorCode::UnknownImage, "image " + image_id + " is not in the pool");
  if (side == Side::Unassigned) {
    session.assignments.erase(image_id);
  } else {
    session.assignments[image_id] = side;
  }
}

void CompassEngine::check_policy(const Session& session) const {
  const auto& p = config_.policy;
  const int left = session.count(Side::Left);
  const int right = session.count(Side::Right);
  const int total = left + right;
  if (left < p.min_per_class || right < p.min_per_class) {
    throw Error(ErrorCode::ClassTooSmall, "each side needs at least " + std::to_string(p.min_per_class) +
                                              " images (left " + std::to_string(left) + ", right " +
                                              std::to_string(right) + ")");
  }
  if (total < p.min_total) {
    throw Error(ErrorCode::CalibrationUnderfilled, "calibration needs at least " + std::to_string(p.min_total) +
                                                       " sorted images, have " + std::to_string(total));
  }
  const int larger = std::max(left, right);
  const int smaller = std::min(left, right);
  if (static_cast<double>(larger) > p.max_imbalance_ratio * smaller) {
    throw Error(ErrorCode::ClassImbalance, "sides are unbalanced (" + std::to_string(left) + " left, " +
                                               std::to_string(right) + " right)");
  }
}

CalibratedCompass CompassEngine::calibrate(const Session& session) const {
  return calibrate(session, config_.solver);
}

CalibratedCompass CompassEngine::calibrate(const Session& session, const svm::SolverConfig& solver) const {
  check_policy(session);
  check_space(session.space);

  // Training order is pool order so the fit is reproducible.
  std::vector<const ImageSample*> members;
  std::vector<int> labels;
  for (const auto& s : session.pool) {
    auto it = session.assignments.find(s.id);
    if (it == session.assignments.end()) continue;
    members.push_back(&s);
    labels.push_back(it->second == Side::Right ? 1 : -1);
  }

  double feature_scale = 1.0;
  std::vector<std::vector<double>> features;
  if (session.space.is_z()) {
    for (const auto* s : members) features.emplace_back(s->z.values().begin(), s->z.values().end());
  } else {
    const int layer = session.space.layer_index();
    std::vector<ActivationTensor> pool_acts(session.pool.size());
    run_indexed(static_cast<int>(session.pool.size()), [&](int i) {
      pool_acts[static_cast<std::size_t>(i)] =
          generator_->activations(session.pool[static_cast<std::size_t>(i)].z, session.category, layer);
    });
    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& a : pool_acts) {
      sq += kernels::sum_squares(a.data);
      n += a.data.size();
    }
    const double rms = n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
    feature_scale = (rms > 0.0 && std::isfinite(rms)) ? rms : 1.0;
    for (const auto* s : members) {
      const auto idx = static_cast<std::size_t>(s - session.pool.data());
      features.push_back(flatten_scaled(pool_acts[idx], feature_scale));
    }
  }

  svm::LabeledSet set(features.front().size());
  for (std::size_t i = 0; i < features.size(); ++i) set.add(features[i], labels[i]);
  const svm::Hyperplane h = svm::fit(set, solver);
  Direction direction = svm::direction_of(h, session.space);

  double sum_pos = 0.0;
  double sum_neg = 0.0;
  int n_pos = 0;
  int n_neg = 0;
  bool separable = true;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double proj = kernels::dot(direction.values(), features[i]);
    if (labels[i] > 0) {
      sum_pos += proj;
      ++n_pos;
    } else {
      sum_neg += proj;
      ++n_neg;
    }
    if (labels[i] * svm::margin(h, features[i]) <= 0.0) separable = false;
  }
  const double gap = sum_pos / n_pos - sum_neg / n_neg;
  if (!(gap > kDegenerateStep)) {
    throw Error(ErrorCode::DegenerateStep, "classes do not separate along the fitted direction");
  }

  return CalibratedCompass{
      make_token("cmp"),
      std::move(direction),
      h.b,
      std::sqrt(kernels::sum_squares(h.w)),
      TraversalStepSize(config_.step_multiplier * gap / (2.0 * kInitialSteps)),
      session.space,
      feature_scale,
      session.id,
      session.category,
      TrainingStats{n_neg, n_pos, separable},
  };
}

void CompassEngine::check_compass(const CalibratedCompass& compass, const LatentVector& start, int category) const {
  if (!info_.has_category(category)) {
    throw Error(ErrorCode::UnknownCategory, "unknown category " + std::to_string(category));
  }
  if (!start.tag().is_z()) throw Error(ErrorCode::SpaceMismatch, "trajectory start must be a Z-space latent");
  if (start.size() != static_cast<std::size_t>(info_.latent_dim)) {
    throw Error(ErrorCode::DimensionMismatch, "start latent has dimension " + std::to_string(start.size()) +
                                                  ", backend expects " + std::to_string(info_.latent_dim));
  }
  check_space(compass.space);
  const std::size_t expected = compass.space.is_z()
                                   ? static_cast<std::size_t>(info_.latent_dim)
                                   : info_.find_layer(compass.space.layer_index())->size();
  if (compass.direction.size() != expected) {
    throw Error(ErrorCode::DimensionMismatch, "compass direction has dimension " +
                                                  std::to_string(compass.direction.size()) + ", expected " +
                                                  std::to_string(expected));
  }
}

TrajectoryStep CompassEngine::make_step(const Trajectory& t, int index) const {
  const CalibratedCompass& c = *t.compass;
  TrajectoryStep step;
  step.step_index = index;
  step.lambda = index * c.step_unit.magnitude();

  if (c.space.is_z()) {
    const LatentVector moved = traverse(t.start, c.direction, step.lambda);
    // Bounds never pull a coordinate inside the start's own value, so the
    // center renders the start exactly.
    const double theta = config_.truncation_theta;
    std::vector<double> clamped(moved.values().begin(), moved.values().end());
    for (std::size_t i = 0; i < clamped.size(); ++i) {
      const double lo = std::min(-theta, t.start[i]);
      const double hi = std::max(theta, t.start[i]);
      const double v = std::min(std::max(clamped[i], lo), hi);
      if (v != clamped[i]) step.clipped = true;
      clamped[i] = v;
    }
    LatentVector rendered(std::move(clamped), SpaceTag::z());
    step.image = generator_->render(rendered, t.category);
    step.margin_value = c.margin(moved.values());
    step.rendered_latent = std::move(rendered);
  } else {
    ActivationTensor act = *t.base_activations;
    if (step.lambda != 0.0) kernels::axpy(step.lambda * c.feature_scale, c.direction.values(), act.data);
    step.margin_value = c.margin(flatten_scaled(act, c.feature_scale));
    step.image = generator_->render_from_activations(act, t.category);
  }
  return step;
}

Trajectory CompassEngine::navigate(std::shared_ptr<const CalibratedCompass> compass, const LatentVector& start,
                                   int category) const {
  if (!compass) throw Error(ErrorCode::UnknownCompass, "no compass");
  check_compass(*compass, start, category);

  Trajectory t{make_token("trj"), std::move(compass), category, start, {}, std::nullopt, {}};
  if (!t.compass->space.is_z()) {
    t.base_activations = generator_->activations(start, category, t.compass->space.layer_index());
  }
  constexpr int n = 2 * kInitialSteps + 1;
  std::vector<std::optional<TrajectoryStep>> slots(n);
  run_indexed(n, [&](int i) { slots[static_cast<std::size_t>(i)] = make_step(t, i - kInitialSteps); });
  for (auto& s : slots) t.steps.push_back(std::move(*s));
  return t;
}

Trajectory CompassEngine::navigate(std::shared_ptr<const CalibratedCompass> compass, const ImageSample& start,
                                   int category) const {
  Trajectory t = navigate(std::move(compass), start.z, category);
  t.source_image_id = start.id;
  return t;
}

const TrajectoryStep& CompassEngine::extend(Trajectory& trajectory, End end) const {
  if (trajectory.steps.empty()) throw Error(ErrorCode::UnknownTrajectory, "trajectory has no steps");
  if (end == End::Forward) {
    trajectory.steps.push_back(make_step(trajectory, trajectory.max_index() + 1));
    return trajectory.steps.back();
  }
  trajectory.steps.insert(trajectory.steps.begin(), make_step(trajectory, trajectory.min_index() - 1));
  return trajectory.steps.front();
}

Trajectory& CompassMap::add_trajectory(const CompassEngine& engine, const ImageSample& start, int category) {
  trajectories_.push_back(engine.navigate(compass_, start, category));
  return trajectories_.back();
}

Trajectory& CompassMap::add_trajectory(const CompassEngine& engine, const LatentVector& start, int category) {
  trajectories_.push_back(engine.navigate(compass_, start, category));
  return trajectories_.back();
}

Trajectory* CompassMap::find(const std::string& trajectory_id) {
  for (auto& t : trajectories_) {
    if (t.id == trajectory_id) return &t;
  }
  return nullptr;
}

}  // namespace latcompass
