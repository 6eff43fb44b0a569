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

#include "saasr/io.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "saasr/errors.h"

namespace saasr {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "payload encoding assumes a little-endian host");

json Parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

template <typename F>
auto Guard(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

json MatrixJson(std::span<const double> values, std::size_t rows,
                std::size_t cols) {
  return json{{"rows", rows}, {"cols", cols}, {"data", EncodeDoubles(values)}};
}

std::vector<double> MatrixFromJson(const json& j, std::size_t* rows,
                                   std::size_t* cols) {
  *rows = j.at("rows").get<std::size_t>();
  *cols = j.at("cols").get<std::size_t>();
  std::vector<double> v = DecodeDoubles(j.at("data").get<std::string>());
  if (v.size() != *rows * *cols) {
    throw FormatError("matrix payload holds " + std::to_string(v.size()) +
                      " values, expected " + std::to_string(*rows * *cols));
  }
  return v;
}

std::vector<double> Flatten(const std::vector<std::vector<double>>& rows) {
  std::vector<double> v;
  for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
  return v;
}

std::vector<std::vector<double>> Unflatten(const std::vector<double>& v,
                                           std::size_t rows, std::size_t cols) {
  std::vector<std::vector<double>> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r].assign(v.begin() + r * cols, v.begin() + (r + 1) * cols);
  }
  return out;
}

template <typename T, typename ToJson>
void WriteLines(const std::string& path, std::span<const T> items, ToJson to_json) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  for (const T& item : items) out << to_json(item) << "\n";
  if (!out) throw FormatError("short write to " + path);
}

template <typename T, typename FromJson>
std::vector<T> ReadLines(const std::string& path, FromJson from_json) {
  if (std::filesystem::is_directory(path)) {
    throw FormatError(path + " is a directory");
  }
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  std::vector<T> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(from_json(line));
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::string EncodeDoubles(std::span<const double> values) {
  const std::size_t bytes = values.size() * sizeof(double);
  std::string out(4 * ((bytes + 2) / 3), '\0');
  if (bytes == 0) return out;
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(values.data()),
                                static_cast<int>(bytes));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<double> DecodeDoubles(const std::string& text) {
  if (text.empty()) return {};
  if (text.size() % 4 != 0) throw FormatError("base64 length not a multiple of 4");
  std::string raw(3 * text.size() / 4, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(raw.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw FormatError("invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes that padding stands for.
  std::size_t size = static_cast<std::size_t>(n);
  if (text.back() == '=') --size;
  if (text[text.size() - 2] == '=') --size;
  if (size % sizeof(double) != 0) {
    throw FormatError("payload is not a whole number of float64 values");
  }
  std::vector<double> out(size / sizeof(double));
  std::memcpy(out.data(), raw.data(), size);
  return out;
}

std::string SampleToJson(const MixtureSample& s) {
  json utts = json::array();
  for (const Utterance& u : s.utterances) {
    utts.push_back({{"tokens", u.tokens},
                    {"speaker_id", u.speaker_id},
                    {"start_frame", u.start_frame}});
  }
  const std::size_t fd = s.profiles.empty() ? 0 : s.profiles[0].size();
  json j{{"index", s.index},
         {"features", MatrixJson(s.features.values(), s.features.rows(),
                                 s.features.cols())},
         {"utterances", utts},
         {"transcript",
          {{"tokens", s.transcript.tokens}, {"speakers", s.transcript.speakers}}},
         {"profiles", MatrixJson(Flatten(s.profiles), s.profiles.size(), fd)},
         {"profile_speakers", s.profile_speakers},
         {"true_speakers", s.true_speakers}};
  return j.dump();
}

MixtureSample SampleFromJson(const std::string& line) {
  const json j = Parse(line, "dataset line");
  MixtureSample s = Guard("dataset line", [&] {
    MixtureSample s;
    s.index = j.at("index").get<std::size_t>();
    std::size_t rows, cols;
    std::vector<double> x = MatrixFromJson(j.at("features"), &rows, &cols);
    s.features = Tensor({rows, cols}, std::move(x));
    for (const json& u : j.at("utterances")) {
      s.utterances.push_back({u.at("tokens").get<std::vector<std::size_t>>(),
                              u.at("speaker_id").get<std::size_t>(),
                              u.at("start_frame").get<std::size_t>()});
    }
    s.transcript.tokens = j.at("transcript").at("tokens").get<std::vector<std::size_t>>();
    s.transcript.speakers =
        j.at("transcript").at("speakers").get<std::vector<std::size_t>>();
    std::vector<double> d = MatrixFromJson(j.at("profiles"), &rows, &cols);
    s.profiles = Unflatten(d, rows, cols);
    s.profile_speakers = j.at("profile_speakers").get<std::vector<std::size_t>>();
    s.true_speakers = j.at("true_speakers").get<std::vector<std::size_t>>();
    return s;
  });
  ValidateTranscript(s.transcript);
  if (s.profile_speakers.size() != s.profiles.size()) {
    throw FormatError("profile_speakers does not match the profile count");
  }
  for (std::size_t spk : s.transcript.speakers) {
    if (spk > s.profiles.size()) {
      throw FormatError("transcript speaker " + std::to_string(spk) +
                        " outside the profile set");
    }
  }
  return s;
}

void WriteDataset(const std::string& path, std::span<const MixtureSample> samples) {
  WriteLines(path, samples, SampleToJson);
}

std::vector<MixtureSample> ReadDataset(const std::string& path) {
  return ReadLines<MixtureSample>(path, SampleFromJson);
}

std::string InventoryToJson(const SpeakerInventory& inv) {
  const InventoryConfig& c = inv.config();
  json emissions = json::array();
  for (const auto& table : inv.emissions()) {
    emissions.push_back(MatrixJson(Flatten(table), table.size(), c.feature_dim));
  }
  json j{{"seed", inv.seed()},
         {"config",
          {{"num_speakers", c.num_speakers},
           {"feature_dim", c.feature_dim},
           {"signature_dim", c.signature_dim},
           {"vocab_size", c.vocab_size},
           {"token_scale", c.token_scale},
           {"speaker_scale", c.speaker_scale},
           {"max_signature_cosine", c.max_signature_cosine}}},
         {"signatures",
          MatrixJson(Flatten(inv.signatures()), inv.size(), c.signature_dim)},
         {"emissions", emissions}};
  return j.dump(1);
}

SpeakerInventory InventoryFromJson(const std::string& text) {
  const json j = Parse(text, "inventory");
  return Guard("inventory", [&] {
    InventoryConfig c;
    const json& jc = j.at("config");
    c.num_speakers = jc.at("num_speakers").get<std::size_t>();
    c.feature_dim = jc.at("feature_dim").get<std::size_t>();
    c.signature_dim = jc.at("signature_dim").get<std::size_t>();
    c.vocab_size = jc.at("vocab_size").get<std::size_t>();
    c.token_scale = jc.at("token_scale").get<double>();
    c.speaker_scale = jc.at("speaker_scale").get<double>();
    c.max_signature_cosine = jc.at("max_signature_cosine").get<double>();
    std::size_t rows, cols;
    std::vector<double> sig = MatrixFromJson(j.at("signatures"), &rows, &cols);
    std::vector<std::vector<std::vector<double>>> emissions;
    for (const json& e : j.at("emissions")) {
      std::size_t er, ec;
      std::vector<double> v = MatrixFromJson(e, &er, &ec);
      emissions.push_back(Unflatten(v, er, ec));
    }
    return SpeakerInventory(c, j.at("seed").get<std::uint64_t>(),
                            Unflatten(sig, rows, cols), std::move(emissions));
  });
}

std::string DecodeRecordToJson(const DecodeRecord& record, bool emit_beta) {
  json j{{"index", record.index}};
  if (!record.result) {
    j["error"] = record.error;
    return j.dump();
  }
  const DecodeResult& r = *record.result;
  const std::vector<SpeakerSegment> segments = Deserialize(r.transcript);
  json utts = json::array();
  for (std::size_t m = 0; m < segments.size(); ++m) {
    utts.push_back({{"tokens", segments[m].tokens},
                    {"speaker_id", segments[m].speaker_id},
                    {"score", r.assignment.utterance_scores.at(m)}});
  }
  j["tokens"] = r.transcript.tokens;
  j["utterances"] = utts;
  j["log_score"] = r.token_log_score;
  j["speaker_count"] = {{"segments", r.count.segments},
                        {"distinct", r.count.distinct}};
  if (emit_beta) {
    const std::size_t k = r.beta.empty() ? 0 : r.beta[0].size();
    j["beta_matrix"] = MatrixJson(Flatten(r.beta), r.beta.size(), k);
  }
  return j.dump();
}

DecodeRecord DecodeRecordFromJson(const std::string& line) {
  const json j = Parse(line, "decode line");
  return Guard("decode line", [&] {
    DecodeRecord rec;
    rec.index = j.at("index").get<std::size_t>();
    if (j.contains("error")) {
      rec.error = j.at("error").get<std::string>();
      return rec;
    }
    DecodeResult r;
    r.transcript.tokens = j.at("tokens").get<std::vector<std::size_t>>();
    ValidateTokenSequence(r.transcript.tokens);
    const json& utts = j.at("utterances");
    if (utts.size() != CountUtterances(r.transcript.tokens)) {
      throw FormatError("utterance list does not match the token stream");
    }
    for (const json& u : utts) {
      r.assignment.speakers.push_back(u.at("speaker_id").get<std::size_t>());
      r.assignment.utterance_scores.push_back(u.at("score").get<double>());
      r.assignment.log_score += r.assignment.utterance_scores.back();
    }
    const std::vector<std::size_t> utt = UtteranceIndexOfPositions(r.transcript.tokens);
    for (std::size_t n = 0; n < r.transcript.tokens.size(); ++n) {
      r.transcript.speakers.push_back(r.assignment.speakers[utt[n]]);
    }
    r.token_log_score = j.at("log_score").get<double>();
    r.count.segments = j.at("speaker_count").at("segments").get<std::size_t>();
    r.count.distinct = j.at("speaker_count").at("distinct").get<std::size_t>();
    if (j.contains("beta_matrix")) {
      std::size_t rows, cols;
      std::vector<double> b = MatrixFromJson(j.at("beta_matrix"), &rows, &cols);
      r.beta = Unflatten(b, rows, cols);
    }
    rec.result = std::move(r);
    return rec;
  });
}

void WriteDecodeRecords(const std::string& path,
                        std::span<const DecodeRecord> records, bool emit_beta) {
  WriteLines(path, records, [emit_beta](const DecodeRecord& r) {
    return DecodeRecordToJson(r, emit_beta);
  });
}

std::vector<DecodeRecord> ReadDecodeRecords(const std::string& path) {
  return ReadLines<DecodeRecord>(path, DecodeRecordFromJson);
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
  if (!out) throw FormatError("short write to " + path);
}

}  // namespace saasr
