#include "latcompass/latent.hpp"

#include <charconv>
#include <cmath>

#include "latcompass/error.hpp"
#include "latcompass/kernels.hpp"

namespace latcompass {
namespace {

void require_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "vector has a non-finite entry");
  }
}

void require_compatible(const SpaceTag& a, std::size_t na, const SpaceTag& b, std::size_t nb) {
  if (!(a == b)) {
    throw Error(ErrorCode::SpaceMismatch,
                "space " + b.to_string() + " applied to a vector in space " + a.to_string());
  }
  if (na != nb) {
    throw Error(ErrorCode::DimensionMismatch,
                "dimension " + std::to_string(nb) + " does not match " + std::to_string(na));
  }
}

}  // namespace

SpaceTag SpaceTag::parse(const std::string& text) {
  if (text == "z") return z();
  constexpr std::string_view prefix = "layer:";
  if (text.size() > prefix.size() && text.compare(0, prefix.size(), prefix) == 0) {
    int index = 0;
    const char* first = text.data() + prefix.size();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, index);
    if (ec == std::errc() && ptr == last && index >= 0) return layer(index);
  }
  throw Error(ErrorCode::InvalidArgument, "bad space tag '" + text + "'");
}

std::string SpaceTag::to_string() const {
  return is_z() ? std::string("z") : "layer:" + std::to_string(layer_);
}

LatentVector::LatentVector(std::vector<double> values, SpaceTag tag)
    : values_(std::move(values)), tag_(tag) {
  if (values_.empty()) throw Error(ErrorCode::DimensionMismatch, "empty latent vector");
  require_finite(values_);
}

Direction Direction::from_unit(std::vector<double> values, SpaceTag tag) {
  if (values.empty()) throw Error(ErrorCode::DimensionMismatch, "empty direction");
  require_finite(values);
  const double norm = std::sqrt(kernels::sum_squares(values));
  if (std::abs(norm - 1.0) > kUnitNormTolerance) {
    throw Error(ErrorCode::InvalidArgument, "direction is not unit norm");
  }
  return Direction(std::move(values), tag);
}

TraversalStepSize::TraversalStepSize(double magnitude) : magnitude_(magnitude) {
  if (!(magnitude > 0.0) || !std::isfinite(magnitude)) {
    throw Error(ErrorCode::InvalidArgument, "step size must be positive and finite");
  }
}

Direction normalize(std::span<const double> v, SpaceTag tag) {
  if (v.empty()) throw Error(ErrorCode::DimensionMismatch, "empty vector");
  require_finite(v);
  const double norm = std::sqrt(kernels::sum_squares(v));
  if (norm < kZeroNormThreshold) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return Direction(std::move(out), tag);
}

LatentVector traverse(const LatentVector& z, const Direction& d, double lambda) {
  require_compatible(z.tag(), z.size(), d.tag(), d.size());
  if (!std::isfinite(lambda)) throw Error(ErrorCode::NonFinite, "lambda is not finite");
  std::vector<double> out(z.values().begin(), z.values().end());
  // z + 0*d would turn -0.0 into +0.0; the identity step must be bitwise.
  if (lambda != 0.0) kernels::axpy(lambda, d.values(), out);
  return LatentVector(std::move(out), z.tag());
}

double project(const LatentVector& v, const Direction& d) {
  require_compatible(v.tag(), v.size(), d.tag(), d.size());
  return kernels::dot(v.values(), d.values());
}

LatentVector truncate(const LatentVector& z, double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw Error(ErrorCode::InvalidArgument, "truncation theta must be positive and finite");
  }
  std::vector<double> out(z.values().begin(), z.values().end());
  kernels::clamp(out, -theta, theta);
  return LatentVector(std::move(out), z.tag());
}

}  // namespace latcompass
