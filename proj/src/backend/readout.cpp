#include "latcompass/readout.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "latcompass/error.hpp"

namespace latcompass::readout {
namespace {

constexpr double kDiscToBackground = 2.5;  // disc chroma over background chroma
constexpr int kBandRows = 16;  // rows per edge band; the disc never reaches them

struct Chroma {
  double a;
  double b;
};

Chroma chroma_at(const Raster& image, std::size_t pixel) {
  const double r = image.rgb[pixel * 3] / 255.0;
  const double g = image.rgb[pixel * 3 + 1] / 255.0;
  const double bl = image.rgb[pixel * 3 + 2] / 255.0;
  return {(r - g) / std::numbers::sqrt2, (r + g - 2.0 * bl) / std::sqrt(6.0)};
}

std::size_t pixel_count(const Raster& image) {
  return static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
}

// Column profile of chroma magnitude averaged over the top and bottom bands.
std::vector<double> band_profile(const Raster& image) {
  const int w = image.width;
  const int band = std::min(kBandRows, image.height / 2);
  std::vector<double> profile(static_cast<std::size_t>(w), 0.0);
  if (band == 0) return profile;
  for (int k = 0; k < 2 * band; ++k) {
    const int y = k < band ? k : image.height - 2 * band + k;
    for (int x = 0; x < w; ++x) {
      const Chroma c = chroma_at(image, static_cast<std::size_t>(y) * w + x);
      profile[static_cast<std::size_t>(x)] += std::hypot(c.a, c.b) / (2 * band);
    }
  }
  return profile;
}

}  // namespace

double mean_luminance(const Raster& image) {
  const std::size_t n = pixel_count(image);
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::uint8_t v : image.rgb) sum += v;
  return sum / (3.0 * 255.0 * static_cast<double>(n));
}

double hue_angle(const Raster& image) {
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t i = 0; i < pixel_count(image); ++i) {
    const Chroma c = chroma_at(image, i);
    sa += c.a;
    sb += c.b;
  }
  return std::atan2(sb, sa);
}

double disc_radius(const Raster& image) {
  const int w = image.width;
  if (w == 0 || image.height < 2) return 0.0;
  // The edge bands give each column's background chroma, which carries the
  // stripe modulation.
  const std::vector<double> background = band_profile(image);
  double area = 0.0;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < w; ++x) {
      const double ref = background[static_cast<std::size_t>(x)];
      if (!(ref > 0.0)) continue;
      const Chroma c = chroma_at(image, static_cast<std::size_t>(y) * w + x);
      const double coverage = (std::hypot(c.a, c.b) / ref - 1.0) / (kDiscToBackground - 1.0);
      // Soft threshold: dither noise in the background stays below the ramp.
      area += std::clamp((coverage - 0.25) / 0.5, 0.0, 1.0);
    }
  }
  return std::sqrt(area / std::numbers::pi);
}

double stripe_frequency(const Raster& image) {
  const int w = image.width;
  if (w == 0 || image.height < 2) return 0.0;
  const std::vector<double> profile = band_profile(image);

  // Energy captured by the least-squares fit of {1, sin, cos} at frequency f.
  // Unlike a plain DFT bin this is unbiased for non-integer cycle counts.
  auto power_at = [&](double f) {
    double m[3][4] = {};
    for (int x = 0; x < w; ++x) {
      const double phase = 2.0 * std::numbers::pi * f * (x + 0.5) / w;
      const double basis[3] = {1.0, std::sin(phase), std::cos(phase)};
      const double v = profile[static_cast<std::size_t>(x)];
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) m[i][j] += basis[i] * basis[j];
        m[i][3] += basis[i] * v;
      }
    }
    double rhs[3] = {m[0][3], m[1][3], m[2][3]};
    for (int col = 0; col < 3; ++col) {
      int pivot = col;
      for (int r = col + 1; r < 3; ++r) {
        if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
      }
      if (std::abs(m[pivot][col]) < 1e-12) return -1.0;
      for (int k = 0; k < 4; ++k) std::swap(m[col][k], m[pivot][k]);
      for (int r = col + 1; r < 3; ++r) {
        const double factor = m[r][col] / m[col][col];
        for (int k = col; k < 4; ++k) m[r][k] -= factor * m[col][k];
      }
    }
    double coef[3];
    for (int r = 2; r >= 0; --r) {
      double acc = m[r][3];
      for (int k = r + 1; k < 3; ++k) acc -= m[r][k] * coef[k];
      coef[r] = acc / m[r][r];
    }
    return coef[0] * rhs[0] + coef[1] * rhs[1] + coef[2] * rhs[2];
  };
  // coarse scan, then refine around the coarse peak
  double best_f = 0.05;
  double best_power = -1.0;
  for (double f = 0.05; f <= w / 4.0; f += 0.05) {
    const double p = power_at(f);
    if (p > best_power) {
      best_power = p;
      best_f = f;
    }
  }
  const double lo = std::max(0.0, best_f - 0.05);
  const double hi = best_f + 0.05;
  for (double f = lo; f <= hi; f += 0.001) {
    const double p = power_at(f);
    if (p > best_power) {
      best_power = p;
      best_f = f;
    }
  }
  return best_f;
}

double attribute(int axis, const Raster& image) {
  switch (axis) {
    case 1: return mean_luminance(image);
    case 2: return hue_angle(image);
    case 3: return disc_radius(image);
    case 4: return stripe_frequency(image);
    default: throw Error(ErrorCode::InvalidArgument, "attribute axis must be 1..4, got " + std::to_string(axis));
  }
}

}  // namespace latcompass::readout
