#pragma once

// Two-stage procedural generator with planted attribute axes. It stands in
// for a neural generator in tests and evaluation because its ground-truth
// directions are known.
//
// Stage 1, (z, category) -> F in 4x4x4 (layer index 1):
//   F[0] = tanh(z1) + 0.1 * category   brightness
//   F[1] = tanh(z2)                    hue
//   F[2] = tanh(z3)                    disc radius
//   F[3] = tanh(z4)                    stripe frequency
//   every channel additionally carries the zero-mean horizontal ramp
//   0.1 * tanh(z5) * (x - 1.5) / 1.5 over the 4x4 grid. z6..z8 are unused.
//
// Stage 2, F -> 64x64 RGB. Each pixel reads its 16x16 cell of F:
//   gray level      Y = 0.5 + 0.4 * F0(cell)
//   hue angle       (pi/2) * F1(cell) in the chroma plane orthogonal to gray
//   centered disc   radius 8 + 6 * mean(F2) px, raised chroma magnitude inside
//   stripes         chroma magnitude modulated by sin at 2 + 2 * mean(F3)
//                   cycles per image width
// and is quantized with an 8x8 ordered dither. Chroma never changes
// (R+G+B)/3, so mean luminance tracks mean(F0) alone until channels clip.

#include "latcompass/generator.hpp"

namespace latcompass {

class BuiltinGenerator final : public Generator {
 public:
  static constexpr int kLatentDim = 8;
  static constexpr int kImageSize = 64;
  static constexpr int kLayerIndex = 1;
  static constexpr int kChannels = 4;
  static constexpr int kGrid = 4;
  static constexpr int kCategories = 4;

  GeneratorInfo info() const override;
  ImageSample sample(std::int64_t seed, int category) const override;
  Raster render(const LatentVector& z, int category) const override;
  ActivationTensor activations(const LatentVector& z, int category, int layer) const override;
  Raster render_from_activations(const ActivationTensor& act, int category) const override;
};

// Standard-normal draws: mt19937_64 seeded with the seed's two's-complement
// bits, Box-Muller on pairs of 53-bit uniforms, using both the cosine and the
// sine variate. Shared with tests that need the same stream.
std::vector<double> standard_normal_stream(std::int64_t seed, std::size_t count);

}  // namespace latcompass
