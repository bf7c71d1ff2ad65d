#pragma once

// JSON forms shared by the wire protocol, the service and the record files.

#include <json.hpp>

#include "latcompass/generator.hpp"
#include "latcompass/latent.hpp"

namespace latcompass {

using json = nlohmann::json;

// {latent_dim, categories:[{id,name}], layers:[{index, shape:[c,h,w]}], image_size:[w,h]}
json info_to_json(const GeneratorInfo& info);
GeneratorInfo info_from_json(const json& j);

// Reads a flat array of numbers; throws InvalidArgument on any other shape.
std::vector<double> doubles_from_json(const json& j);

// Typed field accessors that throw Error(InvalidArgument) naming the field.
const json& require_field(const json& j, const char* key);
std::int64_t require_int(const json& j, const char* key);
double require_number(const json& j, const char* key);
std::string require_string(const json& j, const char* key);

}  // namespace latcompass
