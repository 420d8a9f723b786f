// Copyright 2026 The pathoicl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pathoicl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pathoicl/artifacts.hpp"
#include "pathoicl/audio.hpp"
#include "pathoicl/digest.hpp"
#include "pathoicl/error.hpp"
#include "pathoicl/http_backend.hpp"
#include "pathoicl/mock_backend.hpp"
#include "pathoicl/response_parser.hpp"

namespace pathoicl {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) fail(ErrorCode::kConfigError, fmt::format("{} must be an object", where));
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail(ErrorCode::kConfigError, fmt::format("unknown key '{}' in {}", key, where));
    }
  }
}

template <typename T>
void read(const json& j, std::string_view key, T& out) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, fmt::format("key '{}': {}", key, e.what()));
  }
}

void read_ms(const json& j, std::string_view key, std::chrono::milliseconds& out) {
  std::int64_t ms = out.count();
  read(j, key, ms);
  out = std::chrono::milliseconds(ms);
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

VariantAxes parse_axes(const json& j) {
  VariantAxes axes;
  if (j.is_string()) {
    const auto text = j.get<std::string>();
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
    const auto f = parts.size() == 3 ? parse_task_framing(parts[0]) : std::nullopt;
    const auto d = parts.size() == 3 ? parse_response_detail(parts[1]) : std::nullopt;
    const auto i = parts.size() == 3 ? parse_input_representation(parts[2]) : std::nullopt;
    if (!f || !d || !i) {
      fail(ErrorCode::kConfigError,
           fmt::format("variant '{}' is not <framing>.<detail>.<input>, e.g. generic.detailed.image", text));
    }
    return VariantAxes{*f, *d, *i};
  }
  check_keys(j, "variant", {"task_framing", "response_detail", "input_repr"});
  std::string f = std::string(to_string(axes.framing));
  std::string d = std::string(to_string(axes.detail));
  std::string i = std::string(to_string(axes.input));
  read(j, "task_framing", f);
  read(j, "response_detail", d);
  read(j, "input_repr", i);
  return parse_axes(json(f + "." + d + "." + i));
}

json endpoint_json(const EndpointConfig& e) {
  return {{"base_url", e.base_url},
          {"model_name", e.model_name},
          {"audio_model_name", e.audio_model_name},
          {"api_key_env", e.api_key_env},
          {"temperature", e.temperature},
          {"max_parallel", e.max_parallel},
          {"timeout_ms", e.timeout.count()},
          {"max_retries", e.max_retries},
          {"backoff_base_ms", e.backoff_base.count()},
          {"backoff_cap_ms", e.backoff_cap.count()},
          {"max_image_bytes", e.max_image_bytes},
          {"max_audio_bytes", e.max_audio_bytes}};
}

json stft_json(const StftConfig& s) {
  return {{"window_ms", s.window_ms}, {"hop_ms", s.hop_ms}, {"sample_rate", s.sample_rate}};
}

json render_json(const RenderConfig& r) {
  return {{"db_range", r.db_range},
          {"reference_db", r.reference_db ? json(*r.reference_db) : json()},
          {"min_side", r.min_side},
          {"normalize", r.normalize},
          {"colormap", r.colormap}};
}

std::string file_sha256(const fs::path& path) {
  try {
    return sha256_hex(read_file(path));
  } catch (const Error& e) {
    fail(ErrorCode::kConfigError, fmt::format("manifest: {}", e.what()));
  }
}

std::string join(std::span<const std::string> parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

void write_text(const fs::path& path, std::string_view text) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) fail(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::exception_ptr annotate(const Error& e, const std::string& where) {
  const auto message = fmt::format("{}: {}", where, e.what());
  if (const auto* t = dynamic_cast<const TransportError*>(&e)) {
    return std::make_exception_ptr(TransportError(message, t->attempts()));
  }
  return std::make_exception_ptr(Error(e.code(), message));
}

std::string run_id_for(std::string_view cell_fp, const PromptVariant& variant, int repeat) {
  return fmt::format("{}.{}.r{}", cell_fp.substr(0, 12), variant.id(), repeat);
}

const char* const kLedgerHeader =
    "run_id\tfold\tutterance_id\ttask_framing\tresponse_detail\tinput_repr\tk\trepeat\tscore\tcache_hash\t"
    "excluded_flag\texclusion_reason\treprompt_of";

struct Task {
  const FoldPlan* fold = nullptr;
  const UtteranceRecord* utterance = nullptr;
  PromptVariant variant;
  int repeat = 0;
  std::string run_id;
};

struct Prepared {
  Corpus corpus;
  std::string fingerprint;
  PromptTemplates templates;
  std::map<std::pair<int, int>, std::vector<FoldPlan>> plans;
  std::vector<Task> tasks;
  std::set<std::string> needed;
  std::set<InputRepresentation> representations;
};

Prepared prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  Prepared p;
  p.corpus = load_manifest(cfg.manifest_path);
  p.fingerprint = config_fingerprint(cfg);
  p.templates = cfg.templates();
  for (const int k : cfg.shots) {
    for (int r = 0; r < cfg.repeats; ++r) {
      try {
        p.plans[{k, r}] = plan_experiment(p.corpus, k, repeat_seed(cfg.seed, r), cfg.planner);
      } catch (const Error& e) {
        std::rethrow_exception(annotate(e, fmt::format("k={} repeat={}", k, r)));
      }
    }
  }
  for (const auto& axes : cfg.variants) {
    p.representations.insert(axes.input);
    for (const int k : cfg.shots) {
      const PromptVariant variant{axes, k};
      const auto cell = cell_fingerprint(p.fingerprint, variant);
      for (int r = 0; r < cfg.repeats; ++r) {
        const auto run_id = run_id_for(cell, variant, r);
        for (const auto& fold : p.plans.at({k, r})) {
          for (const auto& ref : fold.references) p.needed.insert(ref.utterance.utterance_id);
          for (const auto& u : fold.test_utterances) {
            p.needed.insert(u.utterance_id);
            p.tasks.push_back(Task{&fold, &u, variant, r, run_id});
          }
        }
      }
    }
  }
  return p;
}

std::shared_ptr<ResponseCache> make_cache(const ExperimentConfig& cfg) {
  auto dir = cfg.effective_cache_dir();
  if (cfg.offline) dir = dir / "mock" / sha256_hex(cfg.mock_policy).substr(0, 16);
  return std::make_shared<ResponseCache>(dir);
}

LabelTable labels_of(const Corpus& corpus) {
  LabelTable labels;
  for (const auto& u : corpus.utterances()) labels.emplace(u.utterance_id, corpus.speaker(u.speaker_id).cohort);
  return labels;
}

bool is_parse_failure(ErrorCode code) {
  return code == ErrorCode::kUnparseableResponse || code == ErrorCode::kOutOfRangeScore;
}

LedgerRow score_task(const Task& task, LlmClient& client, ArtifactStore& store, const PromptTemplates& templates) {
  LedgerRow row;
  row.run_id = task.run_id;
  row.fold = task.fold->test_speaker;
  row.utterance_id = task.utterance->utterance_id;
  row.axes = task.variant.axes;
  row.k = task.variant.k;
  row.repeat = task.repeat;

  const AttachmentLookup lookup = [&store](const UtteranceRecord& u, InputRepresentation repr) {
    return store.get(u, repr);
  };
  auto bundle = build_bundle(*task.fold, task.variant, *task.utterance, lookup, templates);
  bundle.sample = task.repeat;
  auto exclude = [&row](std::string reason) {
    row.excluded = true;
    row.exclusion_reason = std::move(reason);
    return row;
  };

  RawResponse first;
  try {
    first = client.submit(bundle);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kProviderRefusal || e.code() == ErrorCode::kOversizeAttachment) {
      row.cache_hash = request_hash(canonical_request(bundle, client.config().model_for(bundle.variant.axes.input),
                                                      client.config().temperature));
      return exclude(std::string(to_string(e.code())));
    }
    throw;
  }
  row.cache_hash = first.request_hash;
  try {
    row.score = parse(first, task.variant, row.utterance_id).score;
    return row;
  } catch (const Error& e) {
    if (!is_parse_failure(e.code())) throw;
  }

  const auto second_bundle = with_reprompt(bundle, first.text, templates);
  row.reprompt_of = first.request_hash;
  RawResponse second;
  try {
    second = client.submit(second_bundle);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kProviderRefusal) return exclude(std::string(to_string(e.code())));
    throw;
  }
  row.cache_hash = second.request_hash;
  try {
    row.score = parse(second, task.variant, row.utterance_id).score;
  } catch (const Error& e) {
    if (!is_parse_failure(e.code())) throw;
    return exclude(std::string(to_string(e.code())));
  }
  return row;
}

struct Execution {
  std::vector<LedgerRow> rows;
  std::exception_ptr error;
};

Execution execute(const Prepared& p, LlmClient& client, ArtifactStore& store, int workers) {
  std::vector<std::optional<LedgerRow>> results(p.tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::size_t error_index = p.tasks.size();
  std::exception_ptr error;

  auto work = [&] {
    while (!stop.load()) {
      const auto i = next.fetch_add(1);
      if (i >= p.tasks.size()) return;
      const auto& task = p.tasks[i];
      try {
        results[i] = score_task(task, client, store, p.templates);
      } catch (const Error& e) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = annotate(e, fmt::format("variant={} k={} repeat={} fold={} utterance={}", task.variant.axes.id(),
                                          task.variant.k, task.repeat, task.fold->test_speaker,
                                          task.utterance->utterance_id));
        }
        stop.store(true);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
        stop.store(true);
      }
    }
  };

  const auto n = static_cast<std::size_t>(std::max(1, workers));
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work);
  }

  Execution out;
  out.error = error;
  for (auto& r : results) {
    if (r) out.rows.push_back(std::move(*r));
  }
  return out;
}

void write_plans(const Prepared& p, const fs::path& run_dir) {
  for (const auto& [key, folds] : p.plans) {
    const auto dir = run_dir / "fold-plans" / fold_plan_dir_name(key.first, key.second);
    fs::create_directories(dir);
    for (const auto& fold : folds) write_text(dir / (fold.test_speaker + ".json"), serialize_fold(fold));
  }
}

json run_record(const ExperimentConfig& cfg, const std::string& fingerprint) {
  return {{"fingerprint", fingerprint}, {"templates_version", cfg.templates().version()}, {"config", cfg.to_json()}};
}

}  // namespace

std::uint64_t repeat_seed(std::uint64_t seed, int repeat) { return seed ^ static_cast<std::uint64_t>(repeat); }

std::string fold_plan_dir_name(int k, int repeat) { return fmt::format("k{}-r{}", k, repeat); }

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, "config",
             {"manifest_path", "shots", "variants", "repeats", "seed", "endpoint", "offline", "mock_policy",
              "output_dir", "cache_dir", "stft", "render", "planner", "templates_dir"});
  ExperimentConfig cfg;
  std::string manifest;
  read(j, "manifest_path", manifest);
  cfg.manifest_path = resolve(manifest, base_dir);
  read(j, "shots", cfg.shots);
  if (const auto it = j.find("variants"); it != j.end() && !it->is_null()) {
    if (it->is_string() && it->get<std::string>() == "standard") {
      cfg.variants = standard_variants();
    } else if (it->is_array()) {
      cfg.variants.clear();
      for (const auto& v : *it) cfg.variants.push_back(parse_axes(v));
    } else {
      fail(ErrorCode::kConfigError, "variants must be \"standard\" or a list");
    }
  }
  read(j, "repeats", cfg.repeats);
  read(j, "seed", cfg.seed);
  read(j, "offline", cfg.offline);
  read(j, "mock_policy", cfg.mock_policy);
  std::string out = cfg.output_dir.string();
  read(j, "output_dir", out);
  cfg.output_dir = resolve(out, base_dir);
  if (const auto it = j.find("cache_dir"); it != j.end() && !it->is_null()) {
    cfg.cache_dir = resolve(it->get<std::string>(), base_dir);
  }
  if (const auto it = j.find("templates_dir"); it != j.end() && !it->is_null()) {
    cfg.templates_dir = resolve(it->get<std::string>(), base_dir);
  }
  if (const auto it = j.find("endpoint"); it != j.end() && !it->is_null()) {
    const auto& e = *it;
    check_keys(e, "endpoint",
               {"base_url", "model_name", "audio_model_name", "api_key_env", "temperature", "max_parallel",
                "timeout_ms", "max_retries", "backoff_base_ms", "backoff_cap_ms", "max_image_bytes",
                "max_audio_bytes"});
    auto& ep = cfg.endpoint;
    read(e, "base_url", ep.base_url);
    read(e, "model_name", ep.model_name);
    read(e, "audio_model_name", ep.audio_model_name);
    read(e, "api_key_env", ep.api_key_env);
    read(e, "temperature", ep.temperature);
    read(e, "max_parallel", ep.max_parallel);
    read_ms(e, "timeout_ms", ep.timeout);
    read(e, "max_retries", ep.max_retries);
    read_ms(e, "backoff_base_ms", ep.backoff_base);
    read_ms(e, "backoff_cap_ms", ep.backoff_cap);
    read(e, "max_image_bytes", ep.max_image_bytes);
    read(e, "max_audio_bytes", ep.max_audio_bytes);
  }
  if (const auto it = j.find("stft"); it != j.end() && !it->is_null()) {
    check_keys(*it, "stft", {"window_ms", "hop_ms", "sample_rate"});
    read(*it, "window_ms", cfg.stft.window_ms);
    read(*it, "hop_ms", cfg.stft.hop_ms);
    read(*it, "sample_rate", cfg.stft.sample_rate);
  }
  if (const auto it = j.find("render"); it != j.end() && !it->is_null()) {
    check_keys(*it, "render", {"db_range", "reference_db", "min_side", "normalize", "colormap"});
    read(*it, "db_range", cfg.render.db_range);
    if (const auto r = it->find("reference_db"); r != it->end() && !r->is_null()) {
      cfg.render.reference_db = r->get<double>();
    }
    read(*it, "min_side", cfg.render.min_side);
    read(*it, "normalize", cfg.render.normalize);
    read(*it, "colormap", cfg.render.colormap);
  }
  if (const auto it = j.find("planner"); it != j.end() && !it->is_null()) {
    check_keys(*it, "planner", {"allow_speaker_reuse"});
    read(*it, "allow_speaker_reuse", cfg.planner.allow_speaker_reuse);
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfigError, fmt::format("cannot open config {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(j, fs::absolute(path).parent_path());
}

json ExperimentConfig::to_json() const {
  json variants_json = json::array();
  for (const auto& v : variants) variants_json.push_back(v.id());
  return {{"manifest_path", manifest_path.string()},
          {"shots", shots},
          {"variants", variants_json},
          {"repeats", repeats},
          {"seed", seed},
          {"endpoint", endpoint_json(endpoint)},
          {"offline", offline},
          {"mock_policy", mock_policy},
          {"output_dir", output_dir.string()},
          {"cache_dir", cache_dir ? json(cache_dir->string()) : json()},
          {"stft", stft_json(stft)},
          {"render", render_json(render)},
          {"planner", {{"allow_speaker_reuse", planner.allow_speaker_reuse}}},
          {"templates_dir", templates_dir ? json(templates_dir->string()) : json()}};
}

void ExperimentConfig::validate() const {
  auto check = [](bool ok, std::string_view message) {
    if (!ok) fail(ErrorCode::kConfigError, std::string(message));
  };
  check(!manifest_path.empty(), "manifest_path is required");
  check(!shots.empty(), "shots must not be empty");
  check(std::all_of(shots.begin(), shots.end(), [](int k) { return k >= 1; }), "every shot count must be >= 1");
  check(std::set<int>(shots.begin(), shots.end()).size() == shots.size(), "shots contain duplicates");
  check(!variants.empty(), "variants must not be empty");
  check(std::set<VariantAxes>(variants.begin(), variants.end()).size() == variants.size(),
        "variants contain duplicates");
  check(repeats >= 1, "repeats must be >= 1");
  check(!output_dir.empty(), "output_dir is required");
  try {
    endpoint.validate();
    stft.validate();
    render.validate();
    if (offline) make_mock_policy(mock_policy, {});
  } catch (const Error& e) {
    fail(ErrorCode::kConfigError, e.what());
  }
}

fs::path ExperimentConfig::effective_cache_dir() const { return cache_dir ? *cache_dir : output_dir / "cache"; }

PromptTemplates ExperimentConfig::templates() const {
  return templates_dir ? PromptTemplates::load(*templates_dir) : PromptTemplates::builtin();
}

std::string config_fingerprint(const ExperimentConfig& cfg) {
  const json relevant = {
      {"manifest_sha256", file_sha256(cfg.manifest_path)},
      {"seed", cfg.seed},
      {"model_name", cfg.endpoint.model_name},
      {"audio_model_name", cfg.endpoint.audio_model_name},
      {"temperature", cfg.endpoint.temperature},
      {"max_image_bytes", cfg.endpoint.max_image_bytes},
      {"max_audio_bytes", cfg.endpoint.max_audio_bytes},
      {"backend", cfg.offline ? "mock:" + cfg.mock_policy : std::string("live")},
      {"stft", stft_json(cfg.stft)},
      {"render", render_json(cfg.render)},
      {"planner", {{"allow_speaker_reuse", cfg.planner.allow_speaker_reuse}}},
      {"templates", cfg.templates().version()},
  };
  return sha256_hex(relevant.dump());
}

std::string cell_fingerprint(std::string_view config_fp, const PromptVariant& variant) {
  return Sha256().update(config_fp).update("|").update(variant.id()).hex_digest();
}

std::string format_ledger(std::span<const LedgerRow> rows) {
  std::string out = kLedgerHeader;
  out += '\n';
  for (const auto& r : rows) {
    const std::string fields[] = {r.run_id,
                                  r.fold,
                                  r.utterance_id,
                                  std::string(to_string(r.axes.framing)),
                                  std::string(to_string(r.axes.detail)),
                                  std::string(to_string(r.axes.input)),
                                  std::to_string(r.k),
                                  std::to_string(r.repeat),
                                  r.score ? fmt::format("{}", *r.score) : std::string(),
                                  r.cache_hash,
                                  r.excluded ? "1" : "0",
                                  r.exclusion_reason,
                                  r.reprompt_of};
    out += join(fields, '\t');
    out += '\n';
  }
  return out;
}

std::vector<LedgerRow> parse_ledger(std::string_view tsv) {
  std::vector<LedgerRow> rows;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < tsv.size()) {
    auto end = tsv.find('\n', start);
    if (end == std::string_view::npos) end = tsv.size();
    const auto line = tsv.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kLedgerHeader) fail(ErrorCode::kInvalidArgument, "ledger: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    auto bad = [line_no](std::string_view what) {
      fail(ErrorCode::kInvalidArgument, fmt::format("ledger line {}: {}", line_no, what));
    };
    if (f.size() != 13) bad("expected 13 fields");
    LedgerRow r;
    r.run_id = f[0];
    r.fold = f[1];
    r.utterance_id = f[2];
    const auto fr = parse_task_framing(f[3]);
    const auto de = parse_response_detail(f[4]);
    const auto in = parse_input_representation(f[5]);
    if (!fr || !de || !in) bad("bad variant fields");
    r.axes = VariantAxes{*fr, *de, *in};
    auto int_field = [&](const std::string& s) {
      int v = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) bad("bad integer");
      return v;
    };
    r.k = int_field(f[6]);
    r.repeat = int_field(f[7]);
    if (!f[8].empty()) {
      double v = 0;
      const auto [p, ec] = std::from_chars(f[8].data(), f[8].data() + f[8].size(), v);
      if (ec != std::errc() || p != f[8].data() + f[8].size()) bad("bad score");
      r.score = v;
    }
    r.cache_hash = f[9];
    if (f[10] != "0" && f[10] != "1") bad("bad excluded_flag");
    r.excluded = f[10] == "1";
    r.exclusion_reason = f[11];
    r.reprompt_of = f[12];
    if (r.excluded == r.score.has_value()) bad("a row is either scored or excluded");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ExperimentSummary> aggregate_ledger(std::span<const LedgerRow> rows, const Corpus& corpus,
                                                std::string_view config_fp,
                                                std::span<const VariantAxes> variant_order, std::uint64_t seed,
                                                std::vector<SpeakerResultRow>* speakers) {
  struct FoldScores {
    std::vector<double> scores;
    int excluded = 0;
  };
  // (variant index, k) -> repeat -> fold -> scores
  std::map<std::pair<std::size_t, int>, std::map<int, std::map<std::string, FoldScores>>> grid;
  for (const auto& row : rows) {
    const auto it = std::find(variant_order.begin(), variant_order.end(), row.axes);
    if (it == variant_order.end()) continue;
    auto& fold = grid[{static_cast<std::size_t>(it - variant_order.begin()), row.k}][row.repeat][row.fold];
    if (row.score) {
      fold.scores.push_back(*row.score);
    } else {
      ++fold.excluded;
    }
  }

  std::vector<ExperimentSummary> cells;
  for (const auto& [key, repeats] : grid) {
    const PromptVariant variant{variant_order[key.first], key.second};
    const auto cell_fp = cell_fingerprint(config_fp, variant);
    std::vector<RunSummary> runs;
    for (const auto& [repeat, folds] : repeats) {
      std::vector<SpeakerResult> per_speaker;
      std::vector<std::string> excluded;
      for (const auto& [speaker, fs_] : folds) {
        const auto* record = corpus.find_speaker(speaker);
        if (record == nullptr) {
          fail(ErrorCode::kDanglingReference, fmt::format("ledger fold '{}' is not a corpus speaker", speaker));
        }
        if (fs_.scores.empty()) {
          excluded.push_back(speaker);
          continue;
        }
        per_speaker.push_back(soft_vote(speaker, record->cohort, fs_.scores, fs_.excluded));
        if (speakers) {
          speakers->push_back({run_id_for(cell_fp, variant, repeat), per_speaker.back()});
        }
      }
      runs.push_back(summarize_run(std::move(per_speaker), std::move(excluded), cell_fp, repeat_seed(seed, repeat),
                                   repeat));
    }
    auto summary = summarize_runs(runs, variant.axes.id(), variant.k);
    // Utterances of speakers dropped entirely are not in per_speaker.
    for (const auto& [repeat, folds] : repeats) {
      for (const auto& [speaker, fs_] : folds) {
        if (fs_.scores.empty()) summary.exclusions += fs_.excluded;
      }
    }
    cells.push_back(std::move(summary));
  }
  return cells;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, std::shared_ptr<ChatBackend> backend) {
  const auto p = prepare(cfg);
  RunOutcome outcome;
  outcome.run_dir = cfg.output_dir;
  outcome.fingerprint = p.fingerprint;
  try {
    fs::create_directories(cfg.output_dir);
  } catch (const fs::filesystem_error& e) {
    fail(ErrorCode::kConfigError, fmt::format("output_dir is not writable: {}", e.what()));
  }
  write_text(cfg.output_dir / "config.json", run_record(cfg, p.fingerprint).dump(2) + "\n");
  write_manifest(p.corpus, cfg.output_dir / "manifest.tsv");
  write_plans(p, cfg.output_dir);

  ArtifactStore store(cfg.output_dir / "artifacts", cfg.stft, cfg.render);
  outcome.artifacts_created = store.precompute(p.corpus, p.representations, p.needed).created;

  if (!backend) {
    if (cfg.offline) {
      backend = std::make_shared<MockBackend>(make_mock_policy(cfg.mock_policy, labels_of(p.corpus)));
    } else {
      backend = std::make_shared<HttpBackend>(cfg.endpoint);
    }
  }
  LlmClient client(cfg.endpoint, backend, make_cache(cfg));
  auto execution = execute(p, client, store, cfg.endpoint.max_parallel);
  if (execution.error) {
    // Finished rows stay inspectable; their responses are already cached.
    write_text(cfg.output_dir / "ledger.partial.tsv", format_ledger(execution.rows));
    std::rethrow_exception(execution.error);
  }
  fs::remove(cfg.output_dir / "ledger.partial.tsv");
  outcome.ledger = std::move(execution.rows);
  outcome.network_calls = client.network_calls();
  outcome.cache_hits = client.cache_hits();

  const auto ledger_text = format_ledger(outcome.ledger);
  write_text(cfg.output_dir / "ledger.tsv", ledger_text);
  // Aggregate from the serialized ledger so a later `report` gives the same numbers.
  const auto rows = parse_ledger(ledger_text);
  outcome.cells = aggregate_ledger(rows, p.corpus, p.fingerprint, cfg.variants, cfg.seed, &outcome.speaker_results);
  write_text(cfg.output_dir / "speaker-results.tsv", format_speaker_results(outcome.speaker_results));
  outcome.report = emit_report(outcome.cells);
  write_text(cfg.output_dir / "report.txt", outcome.report.table);
  write_text(cfg.output_dir / "report.tsv", outcome.report.tsv);
  return outcome;
}

DryRunEstimate dry_run(const ExperimentConfig& cfg) {
  const auto p = prepare(cfg);
  ArtifactStore store(cfg.output_dir / "artifacts", cfg.stft, cfg.render);
  store.precompute(p.corpus, p.representations, p.needed);
  const auto cache = make_cache(cfg);
  const AttachmentLookup lookup = [&store](const UtteranceRecord& u, InputRepresentation repr) {
    return store.get(u, repr);
  };
  DryRunEstimate estimate;
  for (const auto& task : p.tasks) {
    auto bundle = build_bundle(*task.fold, task.variant, *task.utterance, lookup, p.templates);
    bundle.sample = task.repeat;
    ++estimate.requests;
    const auto hash = request_hash(canonical_request(bundle, cfg.endpoint.model_for(task.variant.axes.input),
                                                     cfg.endpoint.temperature));
    if (cache->get(hash)) {
      ++estimate.cached;
      continue;
    }
    estimate.attachments += bundle.attachment_count();
    for (const auto& ex : bundle.exemplars) estimate.attachment_bytes += ex.attachment->bytes.size();
    if (bundle.test_attachment) estimate.attachment_bytes += bundle.test_attachment->bytes.size();
  }
  return estimate;
}

Report report_from_run_dir(const fs::path& run_dir) {
  json record;
  try {
    record = json::parse(read_text(run_dir / "config.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, fmt::format("{}: {}", (run_dir / "config.json").string(), e.what()));
  }
  const auto cfg = ExperimentConfig::from_json(record.at("config"));
  const auto corpus = load_manifest(run_dir / "manifest.tsv");
  const auto rows = parse_ledger(read_text(run_dir / "ledger.tsv"));
  const auto cells =
      aggregate_ledger(rows, corpus, record.at("fingerprint").get<std::string>(), cfg.variants, cfg.seed);
  return emit_report(cells);
}

}  // namespace pathoicl
