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

#include "cli.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "saasr/decode.h"
#include "saasr/errors.h"
#include "saasr/io.h"
#include "saasr/metrics.h"
#include "saasr/model.h"
#include "saasr/synth.h"
#include "saasr/train.h"
#include "scoring.h"

namespace saasr::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

class ScoringMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  std::size_t jobs = 1;
};

void AddCommon(CLI::App* app, Common& c, bool needs_out) {
  app->add_option("--config", c.config_path, "JSON file with configuration keys");
  app->add_option("--seed", c.seed, "global seed");
  auto* out = app->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
  app->add_flag("--force", c.force, "overwrite an existing output directory");
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

bool SameKind(const json& a, const json& b) {
  if (a.is_null() || b.is_null()) return true;
  if (a.is_number() && b.is_number()) {
    return !(a.is_number_integer() && b.is_number_float());
  }
  return a.type() == b.type();
}

// Overlays `file` on `defaults`, refusing keys the defaults lack. Nested
// objects are checked by the component that consumes them.
json Overlay(const json& defaults, const json& file) {
  if (!file.is_object()) throw ArgumentError("config file must hold a JSON object");
  json merged = defaults;
  for (const auto& [key, value] : file.items()) {
    if (!defaults.contains(key)) throw ArgumentError("unknown config key '" + key + "'");
    if (!SameKind(defaults[key], value)) {
      throw ArgumentError("config key '" + key + "' has the wrong type");
    }
    merged[key] = value;
  }
  return merged;
}

json LoadConfig(const json& defaults, const Common& common) {
  json cfg = defaults;
  if (!common.config_path.empty()) {
    json file;
    try {
      file = json::parse(ReadTextFile(common.config_path));
    } catch (const json::parse_error& e) {
      throw ArgumentError(common.config_path + ": " + e.what());
    } catch (const FormatError& e) {
      throw ArgumentError(e.what());
    }
    cfg = Overlay(defaults, file);
  }
  if (common.seed) cfg["seed"] = *common.seed;
  return cfg;
}

template <typename T>
void Override(json& cfg, const char* key, const std::optional<T>& value) {
  if (value) cfg[key] = *value;
}

template <typename T>
T Get(const json& cfg, const char* key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("config key '") + key + "': " + e.what());
  }
}

// A dataset directory written by `gen` stands for its `split` file.
std::string ResolveData(const std::string& path, const char* split) {
  if (fs::is_directory(path)) return (fs::path(path) / (std::string(split) + ".jsonl")).string();
  return path;
}

void PrepareOutDir(const Common& common) {
  const fs::path dir(common.out);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ArgumentError(common.out + " is not a directory");
    if (!fs::is_empty(dir) && !common.force) {
      throw ArgumentError("output directory " + common.out +
                          " already exists; pass --force to overwrite");
    }
  }
  fs::create_directories(dir);
}

// The echo is itself a valid --config file for the same subcommand.
void EchoConfig(const Common& common, const json& cfg) {
  WriteTextFile((fs::path(common.out) / "config.json").string(), cfg.dump(2) + "\n");
}

std::string Hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------- gen

struct GenFlags {
  std::optional<std::size_t> n, n_dev, n_test, frames_per_token;
  std::optional<double> noise;
};

json GenDefaults() {
  return json{{"seed", 1},
              {"n", 5000},
              {"n_dev", 0},
              {"n_test", 500},
              {"num_speakers", 16},
              {"feature_dim", 16},
              {"signature_dim", 16},
              {"vocab_size", 24},
              {"token_scale", 1.0},
              {"speaker_scale", 1.0},
              {"max_signature_cosine", 0.8},
              {"profiles_per_sample", 8},
              {"speaker_count_probs", {1.0 / 3, 1.0 / 3, 1.0 / 3}},
              {"min_tokens", 3},
              {"max_tokens", 8},
              {"frames_per_token", 4},
              {"noise_stddev", 0.1},
              {"min_delay", 5}};
}

int CmdGen(const Common& common, const GenFlags& flags, std::ostream& out) {
  json cfg = LoadConfig(GenDefaults(), common);
  Override(cfg, "n", flags.n);
  Override(cfg, "n_dev", flags.n_dev);
  Override(cfg, "n_test", flags.n_test);
  Override(cfg, "frames_per_token", flags.frames_per_token);
  Override(cfg, "noise_stddev", flags.noise);

  InventoryConfig ic;
  ic.num_speakers = Get<std::size_t>(cfg, "num_speakers");
  ic.feature_dim = Get<std::size_t>(cfg, "feature_dim");
  ic.signature_dim = Get<std::size_t>(cfg, "signature_dim");
  ic.vocab_size = Get<std::size_t>(cfg, "vocab_size");
  ic.token_scale = Get<double>(cfg, "token_scale");
  ic.speaker_scale = Get<double>(cfg, "speaker_scale");
  ic.max_signature_cosine = Get<double>(cfg, "max_signature_cosine");
  DatasetConfig dc;
  const auto probs = Get<std::vector<double>>(cfg, "speaker_count_probs");
  if (probs.size() != 3) throw ArgumentError("speaker_count_probs needs 3 entries");
  std::copy(probs.begin(), probs.end(), dc.speaker_count_probs.begin());
  dc.profiles_per_sample = Get<std::size_t>(cfg, "profiles_per_sample");
  dc.min_tokens = Get<std::size_t>(cfg, "min_tokens");
  dc.max_tokens = Get<std::size_t>(cfg, "max_tokens");
  dc.frames_per_token = Get<std::size_t>(cfg, "frames_per_token");
  dc.noise_stddev = Get<double>(cfg, "noise_stddev");
  dc.min_delay = Get<std::size_t>(cfg, "min_delay");
  dc.Validate();
  const auto seed = Get<std::uint64_t>(cfg, "seed");

  PrepareOutDir(common);
  const SpeakerInventory inventory = SpeakerInventory::Generate(ic, seed);
  const fs::path dir(common.out);
  WriteTextFile((dir / "inventory.json").string(), InventoryToJson(inventory) + "\n");

  // Splits share one sample seed and occupy disjoint index ranges.
  const std::uint64_t sample_seed = seed + 1;
  json splits = json::object();
  std::size_t first = 0;
  for (const char* split : {"train", "dev", "test"}) {
    const std::string key = std::string("n") + (split[0] == 't' && split[1] == 'r'
                                                     ? ""
                                                     : std::string("_") + split);
    const auto n = Get<std::size_t>(cfg, key.c_str());
    const std::string file = std::string(split) + ".jsonl";
    const std::vector<MixtureSample> samples =
        GenerateDataset(inventory, dc, sample_seed, n, first);
    WriteDataset((dir / file).string(), samples);
    splits[split] = {{"file", file}, {"first_index", first}, {"count", n}};
    out << split << ": " << n << " samples -> " << (dir / file).string() << "\n";
    first += n;
  }
  json manifest{{"seed", seed},
                {"inventory_seed", seed},
                {"sample_seed", sample_seed},
                {"inventory", "inventory.json"},
                {"splits", splits}};
  WriteTextFile((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  EchoConfig(common, cfg);
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainFlags {
  std::optional<std::string> data, stage, init_from;
  bool cold_start = false;
  std::optional<std::size_t> steps, batch_size, warmup, prefetch, log_every;
  std::optional<double> peak_lr, speaker_loss_weight;
  std::optional<bool> mask_augment;
};

// Model dimensions default to what `gen` writes with its defaults.
ModelConfig DefaultModel() {
  const InventoryConfig inv;
  ModelConfig m;
  m.input_dim = inv.feature_dim;
  m.profile_dim = inv.signature_dim;
  m.vocab_size = inv.vocab_size;
  return m;
}

json TrainDefaults() {
  return json{{"seed", 1},
              {"data", ""},
              {"stage", "asr_only"},
              {"init_from", ""},
              {"cold_start", false},
              {"steps", 1000},
              {"batch_size", 8},
              {"peak_lr", 1e-3},
              {"warmup_steps", 0},  // 0: min(1000, steps / 4), at least 1
              {"mask_augment", nullptr},  // null: on for asr_only only
              {"speaker_loss_weight", 1.0},
              {"clip_norm", 5.0},
              {"prefetch", 0},
              {"log_every", 100},
              {"model", json::parse(ModelConfigToJson(DefaultModel()))}};
}

std::vector<TrainExample> ToExamples(const std::vector<MixtureSample>& samples) {
  std::vector<TrainExample> out;
  out.reserve(samples.size());
  for (const MixtureSample& s : samples) {
    out.push_back({s.features, s.transcript, ProfileTensor(s.profiles)});
  }
  return out;
}

int CmdTrain(const Common& common, const TrainFlags& flags, std::ostream& out,
             std::ostream& err) {
  json cfg = LoadConfig(TrainDefaults(), common);
  bool file_has_model = false;
  if (!common.config_path.empty()) {
    file_has_model = json::parse(ReadTextFile(common.config_path)).contains("model");
  }
  Override(cfg, "data", flags.data);
  Override(cfg, "stage", flags.stage);
  Override(cfg, "init_from", flags.init_from);
  if (flags.cold_start) cfg["cold_start"] = true;
  Override(cfg, "steps", flags.steps);
  Override(cfg, "batch_size", flags.batch_size);
  Override(cfg, "warmup_steps", flags.warmup);
  Override(cfg, "prefetch", flags.prefetch);
  Override(cfg, "log_every", flags.log_every);
  Override(cfg, "peak_lr", flags.peak_lr);
  Override(cfg, "speaker_loss_weight", flags.speaker_loss_weight);
  Override(cfg, "mask_augment", flags.mask_augment);

  TrainConfig tc;
  tc.stage = ParseStage(Get<std::string>(cfg, "stage"));
  tc.seed = Get<std::uint64_t>(cfg, "seed");
  tc.total_steps = Get<std::size_t>(cfg, "steps");
  tc.batch_size = Get<std::size_t>(cfg, "batch_size");
  tc.peak_lr = Get<double>(cfg, "peak_lr");
  tc.warmup_steps = Get<std::size_t>(cfg, "warmup_steps");
  if (tc.warmup_steps == 0) {
    tc.warmup_steps = std::max<std::size_t>(1, std::min<std::size_t>(1000, tc.total_steps / 4));
    cfg["warmup_steps"] = tc.warmup_steps;
  }
  if (cfg["mask_augment"].is_null()) cfg["mask_augment"] = tc.stage == TrainStage::kAsrOnly;
  tc.mask_augment = Get<bool>(cfg, "mask_augment");
  tc.speaker_loss_weight = Get<double>(cfg, "speaker_loss_weight");
  tc.clip_norm = Get<double>(cfg, "clip_norm");
  tc.prefetch = Get<std::size_t>(cfg, "prefetch");
  tc.Validate();
  const auto log_every = Get<std::size_t>(cfg, "log_every");

  const auto init_from = Get<std::string>(cfg, "init_from");
  const bool cold_start = Get<bool>(cfg, "cold_start");
  if (tc.stage == TrainStage::kJoint && init_from.empty() && !cold_start) {
    throw ArgumentError("stage joint needs --init-from CHECKPOINT or --cold-start");
  }
  const auto data_path = Get<std::string>(cfg, "data");
  if (data_path.empty()) throw ArgumentError("train needs --data");

  std::optional<SaAsrModel> model;
  if (!init_from.empty()) {
    if (!fs::exists(fs::path(init_from) / "params.json")) {
      throw ArgumentError("no checkpoint at " + init_from);
    }
    model.emplace(LoadCheckpoint(init_from));
    const json ckpt_model = json::parse(ModelConfigToJson(model->config()));
    if (file_has_model && cfg["model"] != ckpt_model) {
      throw ArgumentError("model config differs from the --init-from checkpoint");
    }
    cfg["model"] = ckpt_model;
  } else {
    model.emplace(ModelConfigFromJson(cfg["model"].dump()), tc.seed);
    cfg["model"] = json::parse(ModelConfigToJson(model->config()));
  }

  const std::vector<MixtureSample> samples = ReadDataset(ResolveData(data_path, "train"));
  for (const MixtureSample& s : samples) {
    if (s.features.cols() != model->config().input_dim) {
      throw ArgumentError("dataset features have " + std::to_string(s.features.cols()) +
                          " dims, model expects " +
                          std::to_string(model->config().input_dim));
    }
    if (s.profiles.empty() || s.profiles[0].size() != model->config().profile_dim) {
      throw ArgumentError("dataset profiles do not match the model profile_dim");
    }
  }
  const std::vector<TrainExample> examples = ToExamples(samples);

  PrepareOutDir(common);
  EchoConfig(common, cfg);
  const std::uint64_t init_hash = ParameterHash(*model);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<TracePoint> trace;
  std::string abort_message;
  try {
    trace = TrainLoop(*model, examples, tc, [&](const TracePoint& p) {
      trace.push_back(p);
      if (log_every > 0 && p.step % log_every == 0) {
        const double secs = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "step %zu lr %.3e loss %.4f token %.4f speaker %.4f (%.0fs)\n",
                      p.step, p.lr, p.loss, p.token_loss, p.speaker_loss, secs);
        err << buf << std::flush;
      }
      return true;
    });
  } catch (const NumericError& e) {
    abort_message = e.what();
  }
  const fs::path dir(common.out);
  WriteTraceCsv((dir / "trace.csv").string(), trace);
  if (!abort_message.empty()) {
    throw NumericError("training aborted: " + abort_message);
  }
  SaveCheckpoint(*model, (dir / "checkpoint").string());
  json run{{"stage", StageName(tc.stage)},
           {"steps", trace.size()},
           {"init_from", init_from},
           {"init_hash", Hex(init_hash)},
           {"final_hash", Hex(ParameterHash(*model))},
           {"parameters", model->ParameterCount()}};
  WriteTextFile((dir / "run.json").string(), run.dump(2) + "\n");
  out << "trained " << trace.size() << " steps; checkpoint -> "
      << (dir / "checkpoint").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- decode

struct DecodeFlags {
  std::optional<std::string> checkpoint, data, assignment, search;
  std::optional<std::size_t> beam, max_len;
  bool emit_beta = false;
};

json DecodeDefaults() {
  return json{{"seed", 1},
              {"checkpoint", ""},
              {"data", ""},
              {"search", "beam"},
              {"beam", 4},
              {"max_len", 64},
              {"speaker_assignment", "argmax"},
              {"emit_beta", false}};
}

int CmdDecode(const Common& common, const DecodeFlags& flags, std::ostream& out) {
  json cfg = LoadConfig(DecodeDefaults(), common);
  Override(cfg, "checkpoint", flags.checkpoint);
  Override(cfg, "data", flags.data);
  Override(cfg, "speaker_assignment", flags.assignment);
  Override(cfg, "search", flags.search);
  Override(cfg, "beam", flags.beam);
  Override(cfg, "max_len", flags.max_len);
  if (flags.emit_beta) cfg["emit_beta"] = true;

  const auto assignment_name = Get<std::string>(cfg, "speaker_assignment");
  if (assignment_name != "argmax" && assignment_name != "dedup") {
    throw ArgumentError("speaker_assignment must be argmax or dedup");
  }
  const AssignmentMode mode =
      assignment_name == "dedup" ? AssignmentMode::kDedup : AssignmentMode::kArgmax;
  const auto search = Get<std::string>(cfg, "search");
  if (search != "beam" && search != "greedy") {
    throw ArgumentError("search must be beam or greedy");
  }
  SearchOptions so;
  so.beam_width = Get<std::size_t>(cfg, "beam");
  so.max_len = Get<std::size_t>(cfg, "max_len");
  if (so.beam_width == 0 || so.max_len == 0) {
    throw ArgumentError("beam and max_len must be >= 1");
  }
  const bool emit_beta = Get<bool>(cfg, "emit_beta");
  const auto ckpt = Get<std::string>(cfg, "checkpoint");
  const auto data_path = Get<std::string>(cfg, "data");
  if (ckpt.empty() || data_path.empty()) {
    throw ArgumentError("decode needs --checkpoint and --data");
  }
  if (!fs::exists(fs::path(ckpt) / "params.json")) {
    throw ArgumentError("no checkpoint at " + ckpt);
  }
  const SaAsrModel model = LoadCheckpoint(ckpt);
  const std::vector<MixtureSample> samples = ReadDataset(ResolveData(data_path, "test"));
  PrepareOutDir(common);
  EchoConfig(common, cfg);

  std::vector<DecodeRecord> records(samples.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      const MixtureSample& s = samples[i];
      DecodeRecord& rec = records[i];
      rec.index = s.index;
      try {
        const Tensor profiles = ProfileTensor(s.profiles);
        Hypothesis best;
        if (search == "greedy") {
          best = GreedySearch(model, s.features, profiles, so.max_len);
        } else {
          best = BeamSearch(model, s.features, profiles, so).at(0);
        }
        rec.result = MakeDecodeResult(best, mode);
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < common.jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const fs::path file = fs::path(common.out) / "decode.jsonl";
  WriteDecodeRecords(file.string(), records, emit_beta);
  const auto failed = std::count_if(records.begin(), records.end(),
                                    [](const DecodeRecord& r) { return !r.result; });
  out << "decoded " << records.size() << " samples (" << failed << " failed) -> "
      << file.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- score

struct ScoreFlags {
  std::optional<std::string> data, decode;
  bool cpwer = false;
};

json ScoreDefaults() {
  return json{{"seed", 1}, {"data", ""}, {"decode", ""}, {"cpwer", false}};
}

json CountsJson(const ErrorCount& c) {
  json j{{"errors", c.errors}, {"total", c.total}};
  j["percent"] = c.total ? json(100.0 * c.Rate()) : json(nullptr);
  return j;
}

json ConditionJson(const ConditionScores& c) {
  return json{{"samples", c.samples},
              {"ser", CountsJson(c.ser)},
              {"wer", CountsJson(c.wer)},
              {"sa_wer", CountsJson(c.sa_wer)}};
}

json CountingJson(const SpeakerCountingMatrix& m) {
  json counts = json::array(), percent = json::array();
  for (std::size_t a = 1; a <= SpeakerCountingMatrix::kRows; ++a) {
    json c = json::array(), p = json::array();
    for (std::size_t k = 0; k < SpeakerCountingMatrix::kCols; ++k) {
      c.push_back(m.count(a, k));
      p.push_back(m.Percent(a, k));
    }
    counts.push_back(c);
    percent.push_back(p);
  }
  return json{{"columns", {"1", "2", "3", ">=4"}}, {"counts", counts}, {"percent", percent}};
}

int CmdScore(const Common& common, const ScoreFlags& flags, std::ostream& out) {
  json cfg = LoadConfig(ScoreDefaults(), common);
  Override(cfg, "data", flags.data);
  Override(cfg, "decode", flags.decode);
  if (flags.cpwer) cfg["cpwer"] = true;
  const auto data_path = Get<std::string>(cfg, "data");
  const auto decode_path = Get<std::string>(cfg, "decode");
  if (data_path.empty() || decode_path.empty()) {
    throw ArgumentError("score needs --data and --decode");
  }
  const std::vector<MixtureSample> samples = ReadDataset(ResolveData(data_path, "test"));
  const std::vector<DecodeRecord> records = ReadDecodeRecords(decode_path);

  std::map<std::size_t, const DecodeRecord*> by_index;
  std::vector<std::size_t> offenders;
  for (const DecodeRecord& r : records) {
    if (!by_index.emplace(r.index, &r).second) offenders.push_back(r.index);
  }
  std::set<std::size_t> ref_indices;
  for (const MixtureSample& s : samples) {
    ref_indices.insert(s.index);
    if (!by_index.contains(s.index)) offenders.push_back(s.index);
  }
  for (const auto& [index, r] : by_index) {
    if (!ref_indices.contains(index)) offenders.push_back(index);
  }
  if (!offenders.empty()) {
    std::sort(offenders.begin(), offenders.end());
    offenders.erase(std::unique(offenders.begin(), offenders.end()), offenders.end());
    std::string list;
    for (std::size_t i = 0; i < offenders.size(); ++i) {
      list += (i ? ", " : "") + std::to_string(offenders[i]);
    }
    throw ScoringMismatch("sample ids differ between " + data_path + " and " +
                          decode_path + ": " + list);
  }

  const bool with_cpwer = Get<bool>(cfg, "cpwer");
  std::vector<ScoredSample> scored;
  ErrorCount cpwer;
  std::size_t failed = 0;
  for (const MixtureSample& s : samples) {
    const DecodeRecord& r = *by_index.at(s.index);
    ScoredSample sc = ToScoredSample(s, r.result);
    if (sc.failed) ++failed;
    std::map<std::string, TokenSeq> ref_streams, hyp_streams;
    for (const AttributedUtterance& u : sc.ref) {
      TokenSeq& stream = ref_streams[std::to_string(u.speaker)];
      stream.insert(stream.end(), u.tokens.begin(), u.tokens.end());
    }
    for (const AttributedUtterance& u : sc.hyp) {
      TokenSeq& stream = hyp_streams[std::to_string(u.speaker)];
      stream.insert(stream.end(), u.tokens.begin(), u.tokens.end());
    }
    if (with_cpwer) cpwer += CpwerCounts(ref_streams, hyp_streams);
    scored.push_back(std::move(sc));
  }
  const EvalReport report = Evaluate(scored);
  std::string table = FormatReport(report);
  if (with_cpwer) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "\ncpWER %.2f\n", 100.0 * cpwer.Rate());
    table += buf;
  }

  json conditions = json::array();
  for (std::size_t i = 0; i < 3; ++i) {
    json c = ConditionJson(report.conditions[i]);
    c["speakers"] = i + 1;
    conditions.push_back(c);
  }
  json j{{"samples", samples.size()},
         {"failed_samples", failed},
         {"conditions", conditions},
         {"total", ConditionJson(report.total)},
         {"counting_distinct", CountingJson(report.counting_distinct)},
         {"counting_segments", CountingJson(report.counting_segments)}};
  if (with_cpwer) j["cpwer"] = CountsJson(cpwer);

  PrepareOutDir(common);
  EchoConfig(common, cfg);
  const fs::path dir(common.out);
  WriteTextFile((dir / "report.txt").string(), table);
  WriteTextFile((dir / "report.json").string(), j.dump(2) + "\n");
  out << table;
  return kOk;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Speaker-attributed ASR on synthetic mixtures", "saasr"};
  app.require_subcommand(1);

  Common gen_common, train_common, decode_common, score_common;
  std::optional<std::uint64_t> selftest_seed;

  GenFlags gen_flags;
  CLI::App* gen = app.add_subcommand("gen", "generate inventory and dataset splits");
  AddCommon(gen, gen_common, true);
  gen->add_option("--n", gen_flags.n, "training samples");
  gen->add_option("--n-dev", gen_flags.n_dev, "dev samples");
  gen->add_option("--n-test", gen_flags.n_test, "test samples");
  gen->add_option("--frames-per-token", gen_flags.frames_per_token);
  gen->add_option("--noise", gen_flags.noise, "emission noise stddev");

  TrainFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "train one stage");
  AddCommon(train, train_common, true);
  train->add_option("--data", train_flags.data, "training split (JSON lines)");
  train->add_option("--stage", train_flags.stage, "asr_only or joint");
  train->add_option("--init-from", train_flags.init_from, "checkpoint directory");
  train->add_flag("--cold-start", train_flags.cold_start,
                  "allow the joint stage without a stage-1 checkpoint");
  train->add_option("--steps", train_flags.steps);
  train->add_option("--batch-size", train_flags.batch_size);
  train->add_option("--warmup", train_flags.warmup);
  train->add_option("--peak-lr", train_flags.peak_lr);
  train->add_option("--speaker-loss-weight", train_flags.speaker_loss_weight);
  train->add_option("--mask-augment", train_flags.mask_augment, "true or false");
  train->add_option("--prefetch", train_flags.prefetch, "batches prepared ahead");
  train->add_option("--log-every", train_flags.log_every);

  DecodeFlags decode_flags;
  CLI::App* decode = app.add_subcommand("decode", "decode a dataset split");
  AddCommon(decode, decode_common, true);
  decode->add_option("--checkpoint", decode_flags.checkpoint);
  decode->add_option("--data", decode_flags.data);
  decode->add_option("--beam", decode_flags.beam);
  decode->add_option("--max-len", decode_flags.max_len);
  decode->add_option("--search", decode_flags.search, "beam or greedy");
  decode->add_option("--speaker-assignment", decode_flags.assignment, "argmax or dedup");
  decode->add_flag("--emit-beta", decode_flags.emit_beta, "include beta matrices");

  ScoreFlags score_flags;
  CLI::App* score = app.add_subcommand("score", "score decode output");
  AddCommon(score, score_common, true);
  score->add_option("--data", score_flags.data, "reference split");
  score->add_option("--decode", score_flags.decode, "decode.jsonl");
  score->add_flag("--cpwer", score_flags.cpwer, "also report cpWER");

  CLI::App* selftest = app.add_subcommand("selftest", "run oracle-equivalence suites");
  selftest->add_option("--seed", selftest_seed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  try {
    if (*gen) return CmdGen(gen_common, gen_flags, out);
    if (*train) return CmdTrain(train_common, train_flags, out, err);
    if (*decode) return CmdDecode(decode_common, decode_flags, out);
    if (*score) return CmdScore(score_common, score_flags, out);
    if (*selftest) return RunSelfTest(out, selftest_seed.value_or(1)) == 0 ? kOk : kFailure;
  } catch (const ArgumentError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const FormatError& e) {
    err << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericError& e) {
    err << "runtime abort: " << e.what() << "\n";
    return kRuntimeAbort;
  } catch (const ScoringMismatch& e) {
    err << "scoring mismatch: " << e.what() << "\n";
    return kScoringMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace saasr::cli
