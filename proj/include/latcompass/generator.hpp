#pragma once

// Uniform interface to image generators: the G in G(z + lambda d), plus
// access to one or more intermediate layers for activation-level edits.

#include <cstdint>
#include <string>
#include <vector>

#include "latcompass/latent.hpp"

namespace latcompass {

struct Category {
  int id = 0;
  std::string name;

  friend bool operator==(const Category&, const Category&) = default;
};

struct LayerInfo {
  int index = 0;
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  friend bool operator==(const LayerInfo&, const LayerInfo&) = default;
};

struct GeneratorInfo {
  int latent_dim = 0;
  std::vector<Category> categories;
  std::vector<LayerInfo> layers;
  int image_width = 0;
  int image_height = 0;

  bool has_category(int id) const;
  // nullptr if the layer is not declared
  const LayerInfo* find_layer(int index) const;
  // Throws InvalidArgument when a descriptor invariant does not hold.
  void validate() const;
  // Digest of the canonical JSON descriptor; identifies the generator a
  // saved direction was calibrated against.
  std::string fingerprint() const;

  friend bool operator==(const GeneratorInfo&, const GeneratorInfo&) = default;
};

/// 8-bit RGB, row-major, 3 bytes per pixel.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  friend bool operator==(const Raster&, const Raster&) = default;
};

struct ImageSample {
  std::string id;
  LatentVector z;
  int category = 0;
  std::int64_t seed = 0;
  Raster pixels;
};

/// One layer's activations, channel-major (c, h, w).
struct ActivationTensor {
  int layer = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  bool same_shape(const LayerInfo& l) const {
    return channels == l.channels && height == l.height && width == l.width;
  }
};

class Generator {
 public:
  virtual ~Generator() = default;

  // Errors: BackendUnavailable.
  virtual GeneratorInfo info() const = 0;
  // z ~ N(0, I) from a deterministic PRNG seeded with `seed`; image = render(z).
  // Errors: UnknownCategory, BackendUnavailable.
  virtual ImageSample sample(std::int64_t seed, int category) const = 0;
  // Errors: DimensionMismatch, UnknownCategory, BackendUnavailable.
  virtual Raster render(const LatentVector& z, int category) const = 0;
  // Errors: UnknownLayer, DimensionMismatch, UnknownCategory, BackendUnavailable.
  virtual ActivationTensor activations(const LatentVector& z, int category, int layer) const = 0;
  // Continues the forward pass from an (edited) activation tensor.
  // Errors: ShapeMismatch, UnknownLayer, UnknownCategory, BackendUnavailable.
  virtual Raster render_from_activations(const ActivationTensor& act, int category) const = 0;
};

}  // namespace latcompass
