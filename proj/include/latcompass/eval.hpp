#pragma once

// Recovery of the builtin generator's planted directions.
//
// Each seed simulates a user sorting session: a pool of 4 * n_train samples is
// drawn, and the n_train/2 most pronounced exemplars on each side of the
// planted attribute go Left (negative) and Right (positive). The calibrated
// direction is scored against the ground truth, and a few fresh starts are
// navigated to check that the rendered attribute readout moves monotonically.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "latcompass/compass_engine.hpp"
#include "latcompass/json_io.hpp"

namespace latcompass::eval {

enum class Space { Scene, Detail };

std::string_view space_name(Space space);
// "scene" | "detail"; throws InvalidArgument otherwise.
Space parse_space(std::string_view text);

struct RecoveryOptions {
  int category = 0;
  int starts_per_seed = 5;
};

struct RecoveryReport {
  int attribute = 0;
  Space space = Space::Scene;
  int n_train = 0;
  std::vector<std::int64_t> seeds;
  std::vector<double> cosines;         // |cos(d, ground truth)| per seed
  double median_cosine = 0.0;
  std::vector<double> channel_masses;  // detail level: sum of d_i^2 over the planted channel
  double median_channel_mass = 0.0;
  int trajectories = 0;
  int monotone_trajectories = 0;
  double monotonic_fraction = 0.0;
  std::vector<std::shared_ptr<const CalibratedCompass>> compasses;  // per seed
};

// The engine must wrap the builtin generator. attribute is 1..4. Engine
// errors (policy, solver) propagate.
RecoveryReport recovery_experiment(const CompassEngine& engine, int attribute, int n_train,
                                   std::span<const std::int64_t> seeds, Space space,
                                   const RecoveryOptions& options = {});

// Fraction of trajectories, `starts` per listed category, whose readout of
// `attribute` is monotone. Throws InvalidArgument for an empty category list.
double cross_category_check(const CompassEngine& engine, const std::shared_ptr<const CalibratedCompass>& compass,
                            int attribute, std::span<const int> categories, int starts = 5,
                            std::int64_t start_seed = 1'000'000);

// Strictly increasing readout across every consecutive pair of steps in which
// truncation clipped neither step.
bool monotone_readout(const Trajectory& trajectory, int attribute);

double median(std::vector<double> values);

// Digest of everything that determines a report: inputs, engine
// configuration and generator fingerprint.
std::string config_digest(const CompassEngine& engine, int attribute, int n_train,
                          std::span<const std::int64_t> seeds, Space space, const RecoveryOptions& options);

// {attribute, space, n_train, seeds, cosines, median_cosine, monotonic_fraction,
//  config_digest}, plus channel_masses / median_channel_mass at detail level.
json report_to_json(const RecoveryReport& report, const std::string& digest);

}  // namespace latcompass::eval
