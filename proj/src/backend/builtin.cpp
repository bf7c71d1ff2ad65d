#include "latcompass/builtin_generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "latcompass/encoding.hpp"
#include "latcompass/error.hpp"

namespace latcompass {
namespace {

constexpr int kBayer8[8][8] = {
    {0, 32, 8, 40, 2, 34, 10, 42},  {48, 16, 56, 24, 50, 18, 58, 26},
    {12, 44, 4, 36, 14, 46, 6, 38}, {60, 28, 52, 20, 62, 30, 54, 22},
    {3, 35, 11, 43, 1, 33, 9, 41},  {51, 19, 59, 27, 49, 17, 57, 25},
    {15, 47, 7, 39, 13, 45, 5, 37}, {63, 31, 55, 23, 61, 29, 53, 21},
};

constexpr double kBackgroundChroma = 0.04;
constexpr double kDiscChroma = 0.10;
constexpr double kStripeDepth = 0.2;

const std::array<const char*, BuiltinGenerator::kCategories> kCategoryNames = {
    "meadow", "harbor", "canyon", "forest"};

void check_category(int category) {
  if (category < 0 || category >= BuiltinGenerator::kCategories) {
    throw Error(ErrorCode::UnknownCategory, "unknown category " + std::to_string(category));
  }
}

void check_latent(const LatentVector& z) {
  if (!z.tag().is_z()) throw Error(ErrorCode::SpaceMismatch, "render expects a Z-space vector");
  if (z.size() != BuiltinGenerator::kLatentDim) {
    throw Error(ErrorCode::DimensionMismatch, "latent dimension " + std::to_string(z.size()) +
                                                  ", generator expects " +
                                                  std::to_string(BuiltinGenerator::kLatentDim));
  }
}

std::uint8_t dither(double value, int x, int y) {
  const double t = (kBayer8[y & 7][x & 7] + 0.5) / 64.0;
  const double q = std::floor(value * 255.0 + t);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

}  // namespace

std::vector<double> standard_normal_stream(std::int64_t seed, std::size_t count) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  auto uniform = [&rng] {
    // (0, 1]: never zero, so log() below is finite
    return 1.0 - static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  std::vector<double> out;
  out.reserve(count + 1);
  while (out.size() < count) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    out.push_back(r * std::cos(a));
    out.push_back(r * std::sin(a));
  }
  out.resize(count);
  return out;
}

GeneratorInfo BuiltinGenerator::info() const {
  GeneratorInfo info;
  info.latent_dim = kLatentDim;
  for (int c = 0; c < kCategories; ++c) info.categories.push_back({c, kCategoryNames[c]});
  info.layers.push_back({kLayerIndex, kChannels, kGrid, kGrid});
  info.image_width = kImageSize;
  info.image_height = kImageSize;
  return info;
}

ImageSample BuiltinGenerator::sample(std::int64_t seed, int category) const {
  check_category(category);
  LatentVector z(standard_normal_stream(seed, kLatentDim), SpaceTag::z());
  Raster pixels = render(z, category);
  return ImageSample{make_token("img"), std::move(z), category, seed, std::move(pixels)};
}

Raster BuiltinGenerator::render(const LatentVector& z, int category) const {
  return render_from_activations(activations(z, category, kLayerIndex), category);
}

ActivationTensor BuiltinGenerator::activations(const LatentVector& z, int category, int layer) const {
  if (layer != kLayerIndex) throw Error(ErrorCode::UnknownLayer, "unknown layer " + std::to_string(layer));
  check_category(category);
  check_latent(z);

  ActivationTensor act{kLayerIndex, kChannels, kGrid, kGrid, {}};
  act.data.resize(static_cast<std::size_t>(kChannels * kGrid * kGrid));
  const double base[kChannels] = {std::tanh(z[0]) + 0.1 * category, std::tanh(z[1]),
                                  std::tanh(z[2]), std::tanh(z[3])};
  const double ramp = 0.1 * std::tanh(z[4]);
  for (int c = 0; c < kChannels; ++c) {
    for (int y = 0; y < kGrid; ++y) {
      for (int x = 0; x < kGrid; ++x) {
        act.data[static_cast<std::size_t>((c * kGrid + y) * kGrid + x)] =
            base[c] + ramp * (x - 1.5) / 1.5;
      }
    }
  }
  return act;
}

Raster BuiltinGenerator::render_from_activations(const ActivationTensor& act, int category) const {
  if (act.layer != kLayerIndex) {
    throw Error(ErrorCode::UnknownLayer, "unknown layer " + std::to_string(act.layer));
  }
  check_category(category);
  if (act.channels != kChannels || act.height != kGrid || act.width != kGrid ||
      act.data.size() != static_cast<std::size_t>(kChannels * kGrid * kGrid)) {
    throw Error(ErrorCode::ShapeMismatch, "activation shape does not match layer 1 (4x4x4)");
  }
  for (double v : act.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "activation tensor has a non-finite entry");
  }

  constexpr int cells = kGrid * kGrid;
  auto at = [&](int c, int cy, int cx) {
    return act.data[static_cast<std::size_t>((c * kGrid + cy) * kGrid + cx)];
  };
  auto channel_mean = [&](int c) {
    double s = 0.0;
    for (int i = 0; i < cells; ++i) s += act.data[static_cast<std::size_t>(c * cells + i)];
    return s / cells;
  };

  const double radius = std::max(0.0, 8.0 + 6.0 * channel_mean(2));
  const double frequency = std::max(0.0, 2.0 + 2.0 * channel_mean(3));
  const double center = kImageSize / 2.0;
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const double inv_sqrt6 = 1.0 / std::sqrt(6.0);

  Raster out{kImageSize, kImageSize, std::vector<std::uint8_t>(kImageSize * kImageSize * 3)};
  const int cell_px = kImageSize / kGrid;
  for (int y = 0; y < kImageSize; ++y) {
    const int cy = y / cell_px;
    const double dy = y + 0.5 - center;
    for (int x = 0; x < kImageSize; ++x) {
      const int cx = x / cell_px;
      const double gray = 0.5 + 0.4 * at(0, cy, cx);
      const double hue = 0.5 * std::numbers::pi * at(1, cy, cx);
      const double dx = x + 0.5 - center;
      // Approximate pixel coverage of the disc, so the edge moves continuously
      // with the radius.
      const double coverage = std::clamp(radius - std::hypot(dx, dy) + 0.5, 0.0, 1.0);
      const double stripe =
          1.0 + kStripeDepth * std::sin(2.0 * std::numbers::pi * frequency * (x + 0.5) / kImageSize);
      const double mag = (kBackgroundChroma + coverage * (kDiscChroma - kBackgroundChroma)) * stripe;
      const double a = mag * std::cos(hue);
      const double b = mag * std::sin(hue);
      // gray + a*(1,-1,0)/sqrt2 + b*(1,1,-2)/sqrt6
      const double r = gray + a * inv_sqrt2 + b * inv_sqrt6;
      const double g = gray - a * inv_sqrt2 + b * inv_sqrt6;
      const double bl = gray - 2.0 * b * inv_sqrt6;
      std::uint8_t* px = out.rgb.data() + (static_cast<std::size_t>(y) * kImageSize + x) * 3;
      px[0] = dither(r, x, y);
      px[1] = dither(g, x, y);
      px[2] = dither(bl, x, y);
    }
  }
  return out;
}

}  // namespace latcompass
