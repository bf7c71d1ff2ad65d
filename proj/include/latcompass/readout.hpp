#pragma once

// Scalar measurements of the builtin generator's planted attributes, taken
// from rendered pixels only. Axis numbering follows the latent coordinates:
// 1 luminance, 2 hue, 3 disc radius, 4 stripe frequency.

#include "latcompass/generator.hpp"

namespace latcompass::readout {

// Mean of (R+G+B)/3 over all pixels, in [0, 1].
double mean_luminance(const Raster& image);

// Angle of the mean chroma vector in the plane orthogonal to gray, radians.
double hue_angle(const Raster& image);

// Radius in pixels of a disc with the same area as the thresholded disc mass:
// each pixel's chroma relative to its column's background (from the top and
// bottom 16 rows) is mapped to an estimated coverage.
double disc_radius(const Raster& image);

// Frequency (cycles per image width) whose least-squares sinusoid best fits
// the column profile of chroma magnitude over the top and bottom 16 rows.
double stripe_frequency(const Raster& image);

// Dispatch by axis 1..4; throws Error(InvalidArgument) otherwise.
double attribute(int axis, const Raster& image);

}  // namespace latcompass::readout
