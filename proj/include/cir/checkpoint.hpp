#pragma once

#include "cir/fusion.hpp"
#include "cir/util.hpp"

namespace cir {

// Manifest JSON (mode, alpha, dims, heads, tensor index) plus an f32le
// payload holding every tensor back to back in manifest order.
void save_checkpoint(const FusionModel<float>& model, const fs::path& manifest_path,
                     const Json& extra = Json::object());
FusionModel<float> load_checkpoint(const fs::path& manifest_path);

// Manifest contents without loading tensors.
Json read_checkpoint_manifest(const fs::path& manifest_path);

}  // namespace cir
