#include "latcompass/eval.hpp"

#include <algorithm>
#include <cmath>

#include "latcompass/builtin_generator.hpp"
#include "latcompass/encoding.hpp"
#include "latcompass/error.hpp"
#include "latcompass/readout.hpp"

namespace latcompass::eval {
namespace {

constexpr std::int64_t kSeedStride = 100'000;

void check_attribute(int attribute) {
  if (attribute < 1 || attribute > 4) throw Error(ErrorCode::InvalidArgument, "attribute must be 1..4");
}

// Ground-truth key of a pool image: the planted latent coordinate, or the
// mean of the planted channel at detail level.
double planted_key(const CompassEngine& engine, const ImageSample& s, int attribute, Space space) {
  if (space == Space::Scene) return s.z[static_cast<std::size_t>(attribute - 1)];
  const ActivationTensor a = engine.generator().activations(s.z, s.category, BuiltinGenerator::kLayerIndex);
  const std::size_t plane = static_cast<std::size_t>(a.height) * static_cast<std::size_t>(a.width);
  const auto first = a.data.begin() + static_cast<std::ptrdiff_t>(plane * static_cast<std::size_t>(attribute - 1));
  double sum = 0.0;
  for (auto it = first; it != first + static_cast<std::ptrdiff_t>(plane); ++it) sum += *it;
  return sum / static_cast<double>(plane);
}

}  // namespace

std::string_view space_name(Space space) { return space == Space::Scene ? "scene" : "detail"; }

Space parse_space(std::string_view text) {
  if (text == "scene") return Space::Scene;
  if (text == "detail") return Space::Detail;
  throw Error(ErrorCode::InvalidArgument, "space must be scene or detail");
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

bool monotone_readout(const Trajectory& trajectory, int attribute) {
  check_attribute(attribute);
  const auto& steps = trajectory.steps;
  double prev = readout::attribute(attribute, steps.front().image);
  for (std::size_t i = 1; i < steps.size(); ++i) {
    const double cur = readout::attribute(attribute, steps[i].image);
    if (!steps[i - 1].clipped && !steps[i].clipped && !(cur > prev)) return false;
    prev = cur;
  }
  return true;
}

RecoveryReport recovery_experiment(const CompassEngine& engine, int attribute, int n_train,
                                   std::span<const std::int64_t> seeds, Space space, const RecoveryOptions& options) {
  check_attribute(attribute);
  if (n_train < 2) throw Error(ErrorCode::InvalidArgument, "n_train must be at least 2");
  if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "at least one seed is required");
  if (options.starts_per_seed < 0) throw Error(ErrorCode::InvalidArgument, "starts_per_seed must be >= 0");
  const GeneratorInfo& info = engine.info();
  if (info.latent_dim != BuiltinGenerator::kLatentDim || !info.find_layer(BuiltinGenerator::kLayerIndex)) {
    throw Error(ErrorCode::InvalidArgument, "recovery experiments need the builtin generator");
  }

  RecoveryReport report;
  report.attribute = attribute;
  report.space = space;
  report.n_train = n_train;
  report.seeds.assign(seeds.begin(), seeds.end());

  const SpaceTag tag = space == Space::Scene ? SpaceTag::z() : SpaceTag::layer(BuiltinGenerator::kLayerIndex);
  const int n_right = (n_train + 1) / 2;
  const int n_left = n_train / 2;
  const int pool_size = 4 * n_train;

  for (const std::int64_t seed : seeds) {
    const std::int64_t base = seed * kSeedStride;
    Session session = engine.create_session(options.category, tag);
    engine.fill_pool(session, pool_size, base);

    std::vector<std::pair<double, const ImageSample*>> keyed;
    for (const auto& s : session.pool) keyed.emplace_back(planted_key(engine, s, attribute, space), &s);
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int i = 0; i < n_right && i < pool_size && keyed[static_cast<std::size_t>(i)].first > 0.0; ++i) {
      engine.assign(session, keyed[static_cast<std::size_t>(i)].second->id, Side::Right);
    }
    for (int i = 0; i < n_left && i < pool_size; ++i) {
      const auto& k = keyed[keyed.size() - 1 - static_cast<std::size_t>(i)];
      if (!(k.first < 0.0)) break;
      engine.assign(session, k.second->id, Side::Left);
    }

    auto compass = std::make_shared<const CalibratedCompass>(engine.calibrate(session));
    const auto d = compass->direction.values();
    if (space == Space::Scene) {
      report.cosines.push_back(std::abs(d[static_cast<std::size_t>(attribute - 1)]));
    } else {
      const std::size_t plane = static_cast<std::size_t>(BuiltinGenerator::kGrid * BuiltinGenerator::kGrid);
      const std::size_t off = plane * static_cast<std::size_t>(attribute - 1);
      double sum = 0.0;
      double mass = 0.0;
      for (std::size_t i = off; i < off + plane; ++i) {
        sum += d[i];
        mass += d[i] * d[i];
      }
      report.cosines.push_back(std::abs(sum) / std::sqrt(static_cast<double>(plane)));
      report.channel_masses.push_back(mass);
    }

    for (int j = 0; j < options.starts_per_seed; ++j) {
      const ImageSample start = engine.generator().sample(base + pool_size + j, options.category);
      const Trajectory t = engine.navigate(compass, start, options.category);
      ++report.trajectories;
      if (monotone_readout(t, attribute)) ++report.monotone_trajectories;
    }
    report.compasses.push_back(std::move(compass));
  }

  report.median_cosine = median(report.cosines);
  if (!report.channel_masses.empty()) report.median_channel_mass = median(report.channel_masses);
  report.monotonic_fraction =
      report.trajectories ? static_cast<double>(report.monotone_trajectories) / report.trajectories : 0.0;
  return report;
}

double cross_category_check(const CompassEngine& engine, const std::shared_ptr<const CalibratedCompass>& compass,
                            int attribute, std::span<const int> categories, int starts, std::int64_t start_seed) {
  check_attribute(attribute);
  if (categories.empty()) throw Error(ErrorCode::InvalidArgument, "category list is empty");
  if (starts < 1) throw Error(ErrorCode::InvalidArgument, "starts must be >= 1");
  if (!compass) throw Error(ErrorCode::UnknownCompass, "no compass");
  int total = 0;
  int monotone = 0;
  for (const int category : categories) {
    for (int j = 0; j < starts; ++j) {
      const ImageSample start = engine.generator().sample(start_seed + j, category);
      const Trajectory t = engine.navigate(compass, start, category);
      ++total;
      if (monotone_readout(t, attribute)) ++monotone;
    }
  }
  return static_cast<double>(monotone) / total;
}

std::string config_digest(const CompassEngine& engine, int attribute, int n_train,
                          std::span<const std::int64_t> seeds, Space space, const RecoveryOptions& options) {
  const EngineConfig& c = engine.config();
  const json doc{{"attribute", attribute},
                 {"n_train", n_train},
                 {"seeds", std::vector<std::int64_t>(seeds.begin(), seeds.end())},
                 {"space", std::string(space_name(space))},
                 {"category", options.category},
                 {"starts_per_seed", options.starts_per_seed},
                 {"truncation_theta", c.truncation_theta},
                 {"step_multiplier", c.step_multiplier},
                 {"policy", {c.policy.min_total, c.policy.min_per_class, c.policy.max_imbalance_ratio}},
                 {"solver", {c.solver.c, c.solver.tolerance, c.solver.max_iterations}},
                 {"generator", engine.info().fingerprint()}};
  return digest_hex(doc.dump());
}

json report_to_json(const RecoveryReport& report, const std::string& digest) {
  json j{{"attribute", report.attribute},
         {"space", std::string(space_name(report.space))},
         {"n_train", report.n_train},
         {"seeds", report.seeds},
         {"cosines", report.cosines},
         {"median_cosine", report.median_cosine},
         {"monotonic_fraction", report.monotonic_fraction},
         {"config_digest", digest}};
  if (report.space == Space::Detail) {
    j["channel_masses"] = report.channel_masses;
    j["median_channel_mass"] = report.median_channel_mass;
  }
  return j;
}

}  // namespace latcompass::eval
