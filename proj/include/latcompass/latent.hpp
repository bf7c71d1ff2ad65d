#pragma once

// Latent-space value types and the arithmetic of traversal: z + lambda * d.
//
// Every vector carries the space it lives in (the generator's input space Z,
// or the flattened activations of one intermediate layer) so a direction
// learned in one space cannot be silently applied in the other.

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace latcompass {

class SpaceTag {
 public:
  enum class Kind { Z, Layer };

  static SpaceTag z() { return SpaceTag(Kind::Z, 0); }
  static SpaceTag layer(int index) { return SpaceTag(Kind::Layer, index); }

  // "z" or "layer:<index>"; throws Error(InvalidArgument) on anything else.
  static SpaceTag parse(const std::string& text);

  Kind kind() const noexcept { return kind_; }
  bool is_z() const noexcept { return kind_ == Kind::Z; }
  int layer_index() const noexcept { return layer_; }
  std::string to_string() const;

  friend bool operator==(const SpaceTag&, const SpaceTag&) = default;

 private:
  SpaceTag(Kind kind, int layer) : kind_(kind), layer_(layer) {}
  Kind kind_;
  int layer_;
};

/// A point in latent or activation space. Entries are finite, length > 0.
class LatentVector {
 public:
  LatentVector(std::vector<double> values, SpaceTag tag);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  const SpaceTag& tag() const noexcept { return tag_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const LatentVector&, const LatentVector&) = default;

 private:
  std::vector<double> values_;
  SpaceTag tag_;
};

/// A unit-norm vector (within 1e-9). Obtain one through normalize() or,
/// for already-normalized persisted data, Direction::from_unit().
class Direction {
 public:
  static Direction from_unit(std::vector<double> values, SpaceTag tag);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  const SpaceTag& tag() const noexcept { return tag_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Direction&, const Direction&) = default;

 private:
  friend Direction normalize(std::span<const double>, SpaceTag);
  Direction(std::vector<double> values, SpaceTag tag)
      : values_(std::move(values)), tag_(tag) {}

  std::vector<double> values_;
  SpaceTag tag_;
};

/// Latent-space units per traversal step; positive and finite.
class TraversalStepSize {
 public:
  explicit TraversalStepSize(double magnitude);
  double magnitude() const noexcept { return magnitude_; }

  friend bool operator==(const TraversalStepSize&, const TraversalStepSize&) = default;

 private:
  double magnitude_;
};

inline constexpr double kUnitNormTolerance = 1e-9;
inline constexpr double kZeroNormThreshold = 1e-12;

// Errors: ZeroVector when ||v|| < 1e-12, NonFinite on NaN/inf entries.
Direction normalize(std::span<const double> v, SpaceTag tag);

// z + lambda * d. Errors: SpaceMismatch, DimensionMismatch.
LatentVector traverse(const LatentVector& z, const Direction& d, double lambda);

// dot(v, d). Errors: SpaceMismatch, DimensionMismatch.
double project(const LatentVector& v, const Direction& d);

// Each entry clamped to [-theta, theta]. theta must be positive and finite.
LatentVector truncate(const LatentVector& z, double theta);

}  // namespace latcompass
