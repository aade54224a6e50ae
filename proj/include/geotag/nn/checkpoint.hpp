/*
 Copyright 2026 The Geotag Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <filesystem>

#include "geotag/nn/model.hpp"

namespace geotag::nn {

struct Checkpoint {
  Model<float> model;
  AdamState<float> adam;
  nlohmann::json extras;  // caller metadata stored alongside the config
};

// Layout (little-endian):
//   "GTM1"
//   u32 n, n bytes of JSON ModelConfig
//   u32 parameter count, then per parameter in declaration order:
//     u32 name length, name, u32 value count, f32 values
//   AdamState: u64 t, u32 moment count, then per moment u32 count, f32 m, f32 v
void save_checkpoint(const std::filesystem::path& path, Model<float>& model, const AdamState<float>& adam,
                     const nlohmann::json& extras = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace geotag::nn
