#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "latcompass/generator.hpp"

namespace latcompass {

// Lossless 8-bit RGB PNG. decode_png throws Error(InvalidArgument) on
// malformed data; alpha/palette/gray inputs are converted to RGB.
std::vector<std::uint8_t> encode_png(const Raster& raster);
Raster decode_png(std::span<const std::uint8_t> bytes);

}  // namespace latcompass
