#include "latcompass/json_io.hpp"

#include <algorithm>

#include "latcompass/encoding.hpp"
#include "latcompass/error.hpp"

namespace latcompass {

json info_to_json(const GeneratorInfo& info) {
  json cats = json::array();
  for (const auto& c : info.categories) cats.push_back({{"id", c.id}, {"name", c.name}});
  json layers = json::array();
  for (const auto& l : info.layers) {
    layers.push_back({{"index", l.index}, {"shape", {l.channels, l.height, l.width}}});
  }
  return {{"latent_dim", info.latent_dim},
          {"categories", std::move(cats)},
          {"layers", std::move(layers)},
          {"image_size", {info.image_width, info.image_height}}};
}

GeneratorInfo info_from_json(const json& j) {
  GeneratorInfo info;
  info.latent_dim = static_cast<int>(require_int(j, "latent_dim"));
  for (const auto& c : require_field(j, "categories")) {
    info.categories.push_back({static_cast<int>(require_int(c, "id")), require_string(c, "name")});
  }
  for (const auto& l : require_field(j, "layers")) {
    const auto& shape = require_field(l, "shape");
    if (!shape.is_array() || shape.size() != 3) {
      throw Error(ErrorCode::InvalidArgument, "layer shape must be [c,h,w]");
    }
    info.layers.push_back({static_cast<int>(require_int(l, "index")), shape[0].get<int>(),
                           shape[1].get<int>(), shape[2].get<int>()});
  }
  const auto& size = require_field(j, "image_size");
  if (!size.is_array() || size.size() != 2) {
    throw Error(ErrorCode::InvalidArgument, "image_size must be [w,h]");
  }
  info.image_width = size[0].get<int>();
  info.image_height = size[1].get<int>();
  info.validate();
  return info;
}

std::vector<double> doubles_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorCode::InvalidArgument, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

const json& require_field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

std::int64_t require_int(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

double require_number(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_number()) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "' must be a number");
  }
  return v.get<double>();
}

std::string require_string(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_string()) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

bool GeneratorInfo::has_category(int id) const {
  return std::any_of(categories.begin(), categories.end(), [&](const auto& c) { return c.id == id; });
}

const LayerInfo* GeneratorInfo::find_layer(int index) const {
  for (const auto& l : layers) {
    if (l.index == index) return &l;
  }
  return nullptr;
}

void GeneratorInfo::validate() const {
  if (latent_dim < 1) throw Error(ErrorCode::InvalidArgument, "latent_dim must be >= 1");
  if (categories.empty()) throw Error(ErrorCode::InvalidArgument, "generator declares no categories");
  for (const auto& l : layers) {
    if (l.channels <= 0 || l.height <= 0 || l.width <= 0) {
      throw Error(ErrorCode::InvalidArgument, "layer shapes must be positive");
    }
  }
  if (image_width <= 0 || image_height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  }
}

std::string GeneratorInfo::fingerprint() const { return digest_hex(info_to_json(*this).dump()); }

}  // namespace latcompass
