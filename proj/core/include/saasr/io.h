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

// File formats. Datasets and decode results are JSON lines, one record per
// line; float64 arrays travel as base64 of their little-endian bytes so
// they round-trip exactly.

#ifndef SAASR_IO_H_
#define SAASR_IO_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saasr/decode.h"
#include "saasr/synth.h"

namespace saasr {

std::string EncodeDoubles(std::span<const double> values);
// Throws FormatError on malformed input.
std::vector<double> DecodeDoubles(const std::string& text);

std::string SampleToJson(const MixtureSample& sample);
MixtureSample SampleFromJson(const std::string& line);
void WriteDataset(const std::string& path, std::span<const MixtureSample> samples);
std::vector<MixtureSample> ReadDataset(const std::string& path);

std::string InventoryToJson(const SpeakerInventory& inventory);
SpeakerInventory InventoryFromJson(const std::string& text);

// One decoded input. `error` is set instead of `result` when decoding that
// input failed.
struct DecodeRecord {
  std::size_t index = 0;
  std::optional<DecodeResult> result;
  std::string error;
};

std::string DecodeRecordToJson(const DecodeRecord& record, bool emit_beta);
DecodeRecord DecodeRecordFromJson(const std::string& line);
void WriteDecodeRecords(const std::string& path,
                        std::span<const DecodeRecord> records, bool emit_beta);
std::vector<DecodeRecord> ReadDecodeRecords(const std::string& path);

std::string ReadTextFile(const std::string& path);
void WriteTextFile(const std::string& path, const std::string& text);

}  // namespace saasr

#endif  // SAASR_IO_H_
