#pragma once

#include <string>

#include "earnn/embedding.hpp"
#include "earnn/network.hpp"
#include "json.hpp"

namespace earnn {

// Everything needed to score with a trained model.
struct ModelBundle {
  ModelParams params;
  VariantConfig variant;
  Vocabulary vocab;
  nlohmann::json meta;  // training config snapshot
};

// Binary format: magic + version, length-prefixed JSON header (vocabulary,
// variant, dims, meta, tensor manifest), then raw little-endian doubles.
// Round-trips are bit-exact.
void save_model(const std::string& path, const ModelBundle& bundle);
ModelBundle load_model(const std::string& path);

}  // namespace earnn
