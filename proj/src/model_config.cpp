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

#include "geotag/nn/model.hpp"

namespace geotag::nn {
namespace {

LayerKind kind_from_string(const std::string& s) {
  for (LayerKind k : {LayerKind::Conv2D, LayerKind::BatchNorm, LayerKind::MaxPool2D, LayerKind::Dropout,
                      LayerKind::GlobalAvgPool, LayerKind::Dense}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown layer kind '" + s + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)}};
  switch (s.kind) {
    case LayerKind::Conv2D:
      j["filters"] = s.filters;
      j["kernel"] = {s.kernel_h, s.kernel_w};
      j["padding"] = s.padding;
      break;
    case LayerKind::MaxPool2D:
      j["pool_size"] = {s.pool_h, s.pool_w};
      j["strides"] = s.stride;
      j["padding"] = s.padding;
      break;
    case LayerKind::Dropout:
      j["rate"] = s.drop_prob;
      break;
    default:
      break;
  }
}

void from_json(const nlohmann::json& j, LayerSpec& s) {
  s = LayerSpec{};
  s.kind = kind_from_string(j.at("kind").get<std::string>());
  switch (s.kind) {
    case LayerKind::Conv2D:
      s.filters = j.at("filters").get<Index>();
      s.kernel_h = j.at("kernel").at(0).get<Index>();
      s.kernel_w = j.at("kernel").at(1).get<Index>();
      s.padding = j.value("padding", std::string("valid"));
      break;
    case LayerKind::MaxPool2D:
      s.pool_h = j.at("pool_size").at(0).get<Index>();
      s.pool_w = j.at("pool_size").at(1).get<Index>();
      s.stride = j.at("strides").get<Index>();
      s.padding = j.value("padding", std::string("same"));
      break;
    case LayerKind::Dropout:
      s.drop_prob = j.at("rate").get<double>();
      break;
    default:
      break;
  }
}

void to_json(nlohmann::json& j, const HeadSpec& s) {
  j = nlohmann::json{{"name", s.name}, {"units", s.units}, {"l2_lambda", s.l2_lambda}};
}

void from_json(const nlohmann::json& j, HeadSpec& s) {
  s.name = j.at("name").get<std::string>();
  s.units = j.at("units").get<Index>();
  s.l2_lambda = j.value("l2_lambda", 0.001);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"architecture", c.architecture},
                     {"input", {c.input_height, c.input_width, c.input_channels}},
                     {"backbone", c.backbone},
                     {"heads", c.heads},
                     {"bn_momentum", c.bn_momentum},
                     {"bn_epsilon", c.bn_epsilon},
                     {"adam", c.adam}};
  if (c.norm) j["feature_norm"] = {{"mean", c.norm->mean}, {"stddev", c.norm->stddev}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.architecture = j.value("architecture", std::string("custom"));
  const auto& input = j.at("input");
  c.input_height = input.at(0).get<Index>();
  c.input_width = input.at(1).get<Index>();
  c.input_channels = input.size() > 2 ? input.at(2).get<Index>() : 1;
  c.backbone = j.at("backbone").get<std::vector<LayerSpec>>();
  c.heads = j.at("heads").get<std::vector<HeadSpec>>();
  c.bn_momentum = j.value("bn_momentum", 0.99);
  c.bn_epsilon = j.value("bn_epsilon", 1e-3);
  if (j.contains("adam")) c.adam = j.at("adam").get<AdamConfig>();
  if (j.contains("feature_norm")) {
    c.norm = FeatureNorm{j["feature_norm"].at("mean").get<std::vector<double>>(),
                         j["feature_norm"].at("stddev").get<std::vector<double>>()};
  }
}

std::vector<LayerSpec> large_cnn_backbone() {
  struct Block {
    Index filters, kernel, pool;
  };
  constexpr Block blocks[] = {{64, 7, 5}, {128, 7, 4}, {256, 5, 3}, {512, 3, 2}};
  std::vector<LayerSpec> layers;
  for (const Block& b : blocks) {
    layers.push_back(LayerSpec::conv(b.filters, b.kernel));
    layers.push_back(LayerSpec::batchnorm());
    layers.push_back(LayerSpec::maxpool(b.pool, 2));
    layers.push_back(LayerSpec::dropout(0.3));
  }
  return layers;
}

ModelConfig multitask_config(Index input_width) {
  ModelConfig c;
  c.architecture = "multitask";
  c.input_width = input_width;
  c.backbone = large_cnn_backbone();
  c.heads = {{"scene", 10, 0.001}, {"city", 6, 0.001}};
  return c;
}

ModelConfig singletask_config(Index input_width) {
  ModelConfig c = multitask_config(input_width);
  c.architecture = "singletask";
  c.heads = {{"city", 6, 0.001}};
  return c;
}

ModelConfig miniature_config() {
  ModelConfig c;
  c.architecture = "miniature";
  c.input_height = 8;
  c.input_width = 16;
  c.backbone = {LayerSpec::conv(3, 3), LayerSpec::batchnorm(), LayerSpec::maxpool(2, 2),
                LayerSpec::dropout(0.3), LayerSpec::conv(4, 3), LayerSpec::batchnorm(),
                LayerSpec::maxpool(2, 2), LayerSpec::dropout(0.3)};
  c.heads = {{"scene", 10, 0.001}, {"city", 6, 0.001}};
  return c;
}

void validate(const ModelConfig& c) {
  const auto fail = [](const std::string& why) { throw ValidationError("model config: " + why); };
  if (c.input_channels < 1 || c.input_height < 1 || c.input_width < 1) fail("input dims must be >= 1");
  for (std::size_t i = 0; i < c.backbone.size(); ++i) {
    const LayerSpec& s = c.backbone[i];
    const std::string where = "layer " + std::to_string(i + 1) + ": ";
    switch (s.kind) {
      case LayerKind::Conv2D:
        if (s.filters < 1) fail(where + "filters must be >= 1");
        if (s.kernel_h < 1 || s.kernel_w < 1 || s.kernel_h % 2 == 0 || s.kernel_w % 2 == 0) {
          fail(where + "kernel dims must be odd and >= 1");
        }
        if (s.padding != "valid") fail(where + "only valid convolution padding is supported");
        break;
      case LayerKind::MaxPool2D:
        if (s.pool_h < 1 || s.pool_w < 1 || s.stride < 1) fail(where + "pool size and strides must be >= 1");
        if (s.padding != "same") fail(where + "only same pooling padding is supported");
        break;
      case LayerKind::Dropout:
        if (!(s.drop_prob >= 0.0 && s.drop_prob < 1.0)) fail(where + "drop probability must lie in [0, 1)");
        break;
      case LayerKind::BatchNorm:
        break;
      default:
        fail(where + to_string(s.kind) + " is not a backbone layer");
    }
  }
  if (c.heads.empty()) fail("at least one head is required");
  for (const HeadSpec& h : c.heads) {
    if (h.units < 1) fail("head '" + h.name + "' needs >= 1 unit");
    if (h.l2_lambda < 0.0) fail("head '" + h.name + "' has a negative L2 weight");
  }
  if (c.architecture == "multitask") {
    if (c.heads.size() != 2 || c.heads[0].units != 10 || c.heads[1].units != 6) {
      fail("multitask architecture needs heads scene(10) and city(6)");
    }
  } else if (c.architecture == "singletask") {
    if (c.heads.size() != 1 || c.heads[0].units != 6) fail("singletask architecture needs one city(6) head");
  }
  if (c.norm) {
    if (static_cast<Index>(c.norm->mean.size()) != c.input_height ||
        static_cast<Index>(c.norm->stddev.size()) != c.input_height) {
      fail("feature norm length must equal the input height");
    }
    for (double s : c.norm->stddev) {
      if (!(s > 0.0)) fail("feature norm stddev must be positive");
    }
  }
}

}  // namespace geotag::nn
