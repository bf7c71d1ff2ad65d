#pragma once

// The calibrate / navigate loop.
//
// A Session collects a pool of generated images and the user's two-sided
// sorting of them. calibrate() turns the sorting into a labeled set (Right =
// +1), fits the linear SVM and keeps the hyperplane's unit normal as the
// compass direction, together with a step unit derived from how far apart the
// two classes project. navigate() renders the start image plus three steps in
// each direction; extend() appends one more step at either end.
//
// Scene level works on Z directly. Detail level works on the flattened
// activations of one layer, scaled by the pool's RMS activation, and applies
// the direction back to the unscaled tensor before finishing the forward pass.

#include <chrono>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latcompass/generator.hpp"
#include "latcompass/latent.hpp"
#include "latcompass/svm.hpp"

namespace latcompass {

enum class Side { Left, Right, Unassigned };

std::string_view side_name(Side side);
// "left" | "right" | "unassigned"; throws InvalidArgument otherwise.
Side parse_side(std::string_view text);

struct Session {
  std::string id;
  int category = 0;
  SpaceTag space = SpaceTag::z();
  std::vector<ImageSample> pool;
  std::map<std::string, Side> assignments;  // holds only Left / Right entries
  std::chrono::system_clock::time_point created_at;

  const ImageSample* find(const std::string& image_id) const;
  int count(Side side) const;
};

struct TrainingStats {
  int n_left = 0;
  int n_right = 0;
  bool separable = false;
};

struct CalibratedCompass {
  std::string id;
  Direction direction;
  double bias = 0.0;
  double weight_norm = 1.0;  // ||w||; the hyperplane is weight_norm * direction, bias
  TraversalStepSize step_unit;
  SpaceTag space = SpaceTag::z();
  double feature_scale = 1.0;  // 1.0 at scene level
  std::string source_session;
  int origin_category = 0;
  TrainingStats training_stats;

  // Signed decision value of the calibrating hyperplane at a feature vector
  // (latent for scene level, scaled activations for detail level).
  double margin(std::span<const double> feature) const;
};

struct TrajectoryStep {
  int step_index = 0;
  double lambda = 0.0;
  double margin_value = 0.0;
  bool clipped = false;  // truncation changed the rendered latent
  Raster image;
  // Latent actually rendered (scene level only).
  std::optional<LatentVector> rendered_latent;
};

enum class End { Forward, Backward };

struct Trajectory {
  std::string id;
  std::shared_ptr<const CalibratedCompass> compass;
  int category = 0;
  LatentVector start;
  std::string source_image_id;  // pool image the start came from, if any
  std::optional<ActivationTensor> base_activations;
  std::vector<TrajectoryStep> steps;  // ordered by step_index

  const TrajectoryStep& center() const;
  int min_index() const { return steps.front().step_index; }
  int max_index() const { return steps.back().step_index; }
};

struct CalibrationPolicy {
  int min_total = 14;
  int min_per_class = 5;
  double max_imbalance_ratio = 2.0;
};

struct EngineConfig {
  double truncation_theta = 2.0;
  double step_multiplier = 1.0;
  CalibrationPolicy policy;
  svm::SolverConfig solver;

  void validate() const;
};

inline constexpr int kInitialSteps = 3;

class CompassEngine {
 public:
  // Reads the generator descriptor once; throws BackendUnavailable if the
  // backend cannot describe itself.
  explicit CompassEngine(std::shared_ptr<const Generator> generator, EngineConfig config = {});

  const GeneratorInfo& info() const noexcept { return info_; }
  const EngineConfig& config() const noexcept { return config_; }
  const Generator& generator() const noexcept { return *generator_; }

  Session create_session(int category, SpaceTag space) const;
  std::vector<ImageSample> fill_pool(Session& session, int count, std::int64_t seed) const;
  void assign(Session& session, const std::string& image_id, Side side) const;

  // Throws ClassTooSmall, CalibrationUnderfilled or ClassImbalance, checked
  // in that order.
  void check_policy(const Session& session) const;
  CalibratedCompass calibrate(const Session& session) const;
  CalibratedCompass calibrate(const Session& session, const svm::SolverConfig& solver) const;

  Trajectory navigate(std::shared_ptr<const CalibratedCompass> compass, const LatentVector& start,
                      int category) const;
  Trajectory navigate(std::shared_ptr<const CalibratedCompass> compass, const ImageSample& start,
                      int category) const;
  const TrajectoryStep& extend(Trajectory& trajectory, End end) const;

 private:
  void check_space(const SpaceTag& space) const;
  void check_compass(const CalibratedCompass& compass, const LatentVector& start, int category) const;
  TrajectoryStep make_step(const Trajectory& t, int index) const;

  std::shared_ptr<const Generator> generator_;
  GeneratorInfo info_;
  EngineConfig config_;
};

/// Trajectories of one compass kept side by side for comparison.
class CompassMap {
 public:
  explicit CompassMap(std::shared_ptr<const CalibratedCompass> compass) : compass_(std::move(compass)) {}

  const std::shared_ptr<const CalibratedCompass>& compass() const noexcept { return compass_; }
  const std::deque<Trajectory>& trajectories() const noexcept { return trajectories_; }

  Trajectory& add_trajectory(const CompassEngine& engine, const ImageSample& start, int category);
  Trajectory& add_trajectory(const CompassEngine& engine, const LatentVector& start, int category);
  Trajectory* find(const std::string& trajectory_id);

 private:
  std::shared_ptr<const CalibratedCompass> compass_;
  std::deque<Trajectory> trajectories_;  // stable references
};

}  // namespace latcompass
