#include "latcompass/png_codec.hpp"

#include <png.h>

#include <cstring>
#include <string>

#include "latcompass/error.hpp"

namespace latcompass {

std::vector<std::uint8_t> encode_png(const Raster& raster) {
  if (raster.width <= 0 || raster.height <= 0 ||
      raster.rgb.size() != static_cast<std::size_t>(raster.width) * raster.height * 3) {
    throw Error(ErrorCode::InvalidArgument, "raster buffer does not match its size");
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, raster.rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::InvalidArgument, std::string("png encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, raster.rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::InvalidArgument, std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::InvalidArgument, std::string("png decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Raster r;
  r.width = static_cast<int>(image.width);
  r.height = static_cast<int>(image.height);
  r.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, r.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::InvalidArgument, std::string("png decode failed: ") + image.message);
  }
  return r;
}

}  // namespace latcompass
