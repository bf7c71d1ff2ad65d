#pragma once

// A small deterministic generator with a 128-dimensional latent, standing in
// for an external neural backend in wire-protocol tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "latcompass/builtin_generator.hpp"
#include "latcompass/error.hpp"
#include "latcompass/generator.hpp"

namespace latcompass::testing {

class WideGenerator final : public Generator {
 public:
  static constexpr int kDim = 128;

  GeneratorInfo info() const override {
    GeneratorInfo gi;
    gi.latent_dim = kDim;
    gi.categories = {{0, "alpha"}, {7, "beta"}};
    gi.layers = {{3, 2, 2, 2}};
    gi.image_width = 8;
    gi.image_height = 6;
    return gi;
  }

  ImageSample sample(std::int64_t seed, int category) const override {
    check_category(category);
    LatentVector z(standard_normal_stream(seed, kDim), SpaceTag::z());
    Raster r = render(z, category);
    return ImageSample{"wide-" + std::to_string(seed), std::move(z), category, seed, std::move(r)};
  }

  Raster render(const LatentVector& z, int category) const override {
    return render_from_activations(activations(z, category, 3), category);
  }

  ActivationTensor activations(const LatentVector& z, int category, int layer) const override {
    if (layer != 3) throw Error(ErrorCode::UnknownLayer, "unknown layer");
    check_category(category);
    if (z.size() != kDim) throw Error(ErrorCode::DimensionMismatch, "expects 128 dims");
    ActivationTensor a{3, 2, 2, 2, std::vector<double>(8, 0.0)};
    for (std::size_t i = 0; i < kDim; ++i) a.data[i % 8] += z[i] / 16.0;
    for (double& v : a.data) v = std::tanh(v) + 0.01 * category;
    return a;
  }

  Raster render_from_activations(const ActivationTensor& a, int category) const override {
    check_category(category);
    if (a.layer != 3) throw Error(ErrorCode::UnknownLayer, "unknown layer");
    if (a.channels != 2 || a.height != 2 || a.width != 2 || a.data.size() != 8) {
      throw Error(ErrorCode::ShapeMismatch, "expects 2x2x2");
    }
    Raster r{8, 6, std::vector<std::uint8_t>(8 * 6 * 3)};
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 8; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
          const double v = 0.5 + 0.45 * a.data[static_cast<std::size_t>((ch * 3 + x + y) % 8)];
          r.rgb[static_cast<std::size_t>((y * 8 + x) * 3 + ch)] =
              static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
      }
    }
    return r;
  }

 private:
  static void check_category(int c) {
    if (c != 0 && c != 7) throw Error(ErrorCode::UnknownCategory, "unknown category");
  }
};

}  // namespace latcompass::testing
