// Copyright (c) 2026 The saasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "saasr/errors.h"
#include "saasr/model.h"

namespace saasr {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

json ConfigJson(const ModelConfig& c) {
  return json{{"input_dim", c.input_dim},
              {"model_dim", c.model_dim},
              {"profile_dim", c.profile_dim},
              {"vocab_size", c.vocab_size},
              {"heads", c.heads},
              {"encoder_layers", c.encoder_layers},
              {"asr_decoder_layers", c.asr_decoder_layers},
              {"speaker_decoder_layers", c.speaker_decoder_layers},
              {"ff_dim", c.ff_dim},
              {"subsample", c.subsample},
              {"conv_kernel", c.conv_kernel},
              {"se_reduction", c.se_reduction},
              {"speaker_conv_layers", c.speaker_conv_layers},
              {"dropout", c.dropout}};
}

ModelConfig ConfigFromJson(const json& j) {
  if (!j.is_object()) throw FormatError("model config must be a JSON object");
  ModelConfig c;
  const json defaults = ConfigJson(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) {
      throw ArgumentError("unknown model config key '" + key + "'");
    }
  }
  auto read = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception& e) {
      throw ArgumentError(std::string("model config key '") + key +
                          "': " + e.what());
    }
  };
  read("input_dim", c.input_dim);
  read("model_dim", c.model_dim);
  read("profile_dim", c.profile_dim);
  read("vocab_size", c.vocab_size);
  read("heads", c.heads);
  read("encoder_layers", c.encoder_layers);
  read("asr_decoder_layers", c.asr_decoder_layers);
  read("speaker_decoder_layers", c.speaker_decoder_layers);
  read("ff_dim", c.ff_dim);
  read("subsample", c.subsample);
  read("conv_kernel", c.conv_kernel);
  read("se_reduction", c.se_reduction);
  read("speaker_conv_layers", c.speaker_conv_layers);
  read("dropout", c.dropout);
  c.Validate();
  return c;
}

}  // namespace

std::string ModelConfigToJson(const ModelConfig& config) {
  return ConfigJson(config).dump();
}

ModelConfig ModelConfigFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  return ConfigFromJson(j);
}

void SaveCheckpoint(const SaAsrModel& model, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json manifest = json::array();
  std::size_t offset = 0;
  std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw FormatError("cannot write " + dir + "/params.bin");
  for (const auto& [name, t] : model.parameters()) {
    auto v = t.values();
    bin.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
    manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += v.size();
  }
  if (!bin) throw FormatError("short write to " + dir + "/params.bin");
  json meta{{"format", "saasr-checkpoint-1"},
            {"config", ConfigJson(model.config())},
            {"num_values", offset},
            {"tensors", manifest}};
  std::ofstream js(fs::path(dir) / "params.json");
  if (!js) throw FormatError("cannot write " + dir + "/params.json");
  js << meta.dump(1) << "\n";
}

SaAsrModel LoadCheckpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream js(fs::path(dir) / "params.json");
  if (!js) throw FormatError("missing checkpoint manifest in " + dir);
  json meta;
  try {
    meta = json::parse(js);
  } catch (const json::parse_error& e) {
    throw FormatError("checkpoint manifest: " + std::string(e.what()));
  }
  if (meta.value("format", "") != "saasr-checkpoint-1") {
    throw FormatError("unrecognized checkpoint format in " + dir);
  }
  SaAsrModel model(ConfigFromJson(meta.at("config")), 0);
  const json& tensors = meta.at("tensors");
  auto& params = model.parameters();
  if (tensors.size() != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(tensors.size()) +
                      " tensors, model expects " + std::to_string(params.size()));
  }
  std::ifstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw FormatError("missing checkpoint values in " + dir);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, t] = params[i];
    const json& entry = tensors[i];
    if (entry.at("name").get<std::string>() != name ||
        entry.at("shape").get<Shape>() != t.shape() ||
        entry.at("offset").get<std::size_t>() != offset) {
      throw FormatError("checkpoint entry " + std::to_string(i) +
                        " does not match parameter " + name);
    }
    auto v = t.mutable_values();
    bin.read(reinterpret_cast<char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!bin) throw FormatError("truncated checkpoint values in " + dir);
    offset += v.size();
  }
  if (bin.peek() != std::ifstream::traits_type::eof()) {
    throw FormatError("trailing bytes in " + dir + "/params.bin");
  }
  return model;
}

void CopyParameters(const SaAsrModel& source, SaAsrModel& target) {
  const auto& from = source.parameters();
  auto& to = target.parameters();
  if (from.size() != to.size()) {
    throw ArgumentError("parameter lists differ in length");
  }
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].first != to[i].first ||
        from[i].second.shape() != to[i].second.shape()) {
      throw ArgumentError("parameter mismatch at " + from[i].first);
    }
  }
  for (std::size_t i = 0; i < from.size(); ++i) {
    auto src = from[i].second.values();
    std::copy(src.begin(), src.end(), to[i].second.mutable_values().begin());
  }
}

std::uint64_t ParameterHash(const SaAsrModel& model) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& [name, t] : model.parameters()) {
    for (double x : t.values()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
      }
    }
  }
  return h;
}

}  // namespace saasr
