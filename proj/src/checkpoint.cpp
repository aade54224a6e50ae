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

#include "geotag/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace geotag::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_floats(std::ostream& out, const Vec<float>& v) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

class Reader {
 public:
  Reader(std::istream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

  template <typename T>
  T get() {
    T v{};
    bytes(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }

  void bytes(char* dst, std::size_t n) {
    if (!in_.read(dst, static_cast<std::streamsize>(n))) throw DecodeError(path_.string() + ": truncated checkpoint");
  }

  Vec<float> floats() {
    const auto n = get<std::uint32_t>();
    Vec<float> v(n);
    bytes(reinterpret_cast<char*>(v.data()), n * sizeof(float));
    return v;
  }

  std::string string() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
  const std::filesystem::path& path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model<float>& model, const AdamState<float>& adam,
                     const nlohmann::json& extras) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write("GTM1", 4);
  nlohmann::json config = model.config();
  config["adam"] = adam.config;
  config["extras"] = extras;
  const std::string blob = config.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(blob.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));

  const auto params = model.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_floats(out, p->value);
  }

  put<std::uint64_t>(out, static_cast<std::uint64_t>(adam.t));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(adam.m.size()));
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    put_floats(out, adam.m[i]);
    put_floats(out, adam.v[i]);
  }
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open " + path.string());
  Reader r(in, path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "GTM1", 4) != 0) throw DecodeError(path.string() + ": bad checkpoint magic");

  const auto blob = nlohmann::json::parse(r.string());
  const auto config = blob.get<ModelConfig>();
  Checkpoint ck{Model<float>(config, 0), AdamState<float>{}, blob.value("extras", nlohmann::json::object())};
  ck.adam.config = config.adam;

  auto params = ck.model.parameters();
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) throw DecodeError(path.string() + ": parameter count does not match config");
  for (auto* p : params) {
    const std::string name = r.string();
    Vec<float> values = r.floats();
    if (name != p->name || values.size() != p->value.size()) {
      throw DecodeError(path.string() + ": parameter '" + name + "' does not match '" + p->name + "'");
    }
    p->value = std::move(values);
  }

  ck.adam.t = static_cast<std::int64_t>(r.get<std::uint64_t>());
  const auto moments = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < moments; ++i) {
    ck.adam.m.push_back(r.floats());
    ck.adam.v.push_back(r.floats());
  }
  return ck;
}

}  // namespace geotag::nn
