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

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pathoicl/artifacts.hpp"
#include "pathoicl/corpus.hpp"
#include "pathoicl/error.hpp"
#include "pathoicl/evaluation.hpp"
#include "pathoicl/runner.hpp"

namespace {

using namespace pathoicl;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kMalformedManifest:
    case ErrorCode::kDanglingReference:
    case ErrorCode::kDuplicateKey:
      return kExitConfig;
    default:
      return kExitRuntime;
  }
}

struct RunFlags {
  std::string config;
  std::optional<std::string> endpoint;
  std::optional<std::string> model;
  std::optional<double> temperature;
  std::optional<int> max_parallel;
  std::optional<std::string> cache_dir;
  std::optional<std::string> output_dir;
  std::optional<std::string> mock_policy;
  bool offline = false;
  bool dry = false;
};

ExperimentConfig load_with_overrides(const RunFlags& f) {
  auto cfg = ExperimentConfig::load(f.config);
  if (f.endpoint) cfg.endpoint.base_url = *f.endpoint;
  if (f.model) cfg.endpoint.model_name = *f.model;
  if (f.temperature) cfg.endpoint.temperature = *f.temperature;
  if (f.max_parallel) cfg.endpoint.max_parallel = *f.max_parallel;
  if (f.cache_dir) cfg.cache_dir = *f.cache_dir;
  if (f.output_dir) cfg.output_dir = *f.output_dir;
  if (f.mock_policy) cfg.mock_policy = *f.mock_policy;
  if (f.offline || f.mock_policy) cfg.offline = true;
  return cfg;
}

int cmd_ingest(const std::string& root, const std::string& out, const std::optional<int>& mic, int channel) {
  ScanOptions options;
  options.microphone = mic;
  options.channel = channel;
  const auto corpus = scan_uaspeech_directory(root, options);
  write_manifest(corpus, out);
  fmt::print("{} speakers ({} control, {} pathological), {} utterances -> {}\n", corpus.speakers().size(),
             corpus.count(Cohort::kControl), corpus.count(Cohort::kPathological), corpus.utterances().size(), out);
  return kExitOk;
}

int cmd_render(const RunFlags& flags) {
  const auto cfg = load_with_overrides(flags);
  cfg.validate();
  const auto corpus = load_manifest(cfg.manifest_path);
  std::set<InputRepresentation> reprs;
  for (const auto& v : cfg.variants) reprs.insert(v.input);
  ArtifactStore store(cfg.output_dir / "artifacts", cfg.stft, cfg.render);
  const auto stats = store.precompute(corpus, reprs);
  fmt::print("{} artifacts created, {} already present in {}\n", stats.created, stats.reused,
             store.dir().string());
  return kExitOk;
}

int cmd_run(const RunFlags& flags) {
  const auto cfg = load_with_overrides(flags);
  if (flags.dry) {
    const auto e = dry_run(cfg);
    fmt::print("requests: {} ({} already cached)\nattachments to send: {}\nattachment bytes: {}\n", e.requests,
               e.cached, e.attachments, e.attachment_bytes);
    return kExitOk;
  }
  const auto outcome = run_experiment(cfg);
  std::cout << outcome.report.table;
  fmt::print("\nrun directory: {}\nnetwork calls: {}, cache hits: {}\n", outcome.run_dir.string(),
             outcome.network_calls, outcome.cache_hits);
  return kExitOk;
}

int cmd_report(const std::optional<std::string>& run_dir, const std::optional<std::string>& cells) {
  Report report;
  if (cells) {
    std::ifstream in(*cells, std::ios::binary);
    if (!in) fail(ErrorCode::kConfigError, fmt::format("cannot read {}", *cells));
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    report = emit_report(parse_report_tsv(text));
  } else if (run_dir) {
    report = report_from_run_dir(*run_dir);
  } else {
    fail(ErrorCode::kConfigError, "report needs a run directory or --cells");
  }
  std::cout << report.table;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot in-context pathological speech classification harness"};
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "Scan a UA-Speech style directory into a manifest");
  std::string ingest_root;
  std::string ingest_out = "manifest.tsv";
  int mic = 5;
  bool all_mics = false;
  int channel = 1;
  ingest->add_option("root", ingest_root, "Corpus directory")->required();
  ingest->add_option("-o,--output", ingest_out, "Manifest to write");
  ingest->add_option("--mic", mic, "Keep only files of this microphone (_M<n> tag)")->capture_default_str();
  ingest->add_flag("--all-mics", all_mics, "Keep every microphone; word ids then include the tag");
  ingest->add_option("--channel", channel, "Channel to read from each file, 1-based")->capture_default_str();

  RunFlags flags;
  auto add_run_flags = [&flags](CLI::App* cmd) {
    cmd->add_option("-c,--config", flags.config, "Experiment config (JSON)")->required();
    cmd->add_option("--output-dir", flags.output_dir, "Run directory");
    cmd->add_option("--endpoint", flags.endpoint, "Base URL of an OpenAI-compatible API");
    cmd->add_option("--model", flags.model, "Model name");
    cmd->add_option("--temperature", flags.temperature, "Sampling temperature");
    cmd->add_option("--max-parallel", flags.max_parallel, "Concurrent requests");
    cmd->add_option("--cache-dir", flags.cache_dir, "Response cache directory");
    cmd->add_flag("--offline", flags.offline, "Use the in-process mock endpoint");
    cmd->add_option("--mock-policy", flags.mock_policy,
                    "always:<x> | label-leak | hash-score | malformed-parity:<m>:<policy>");
  };
  auto* render = app.add_subcommand("render", "Precompute spectrogram images and audio payloads");
  add_run_flags(render);
  auto* run = app.add_subcommand("run", "Run the experiment matrix");
  add_run_flags(run);
  run->add_flag("--dry-run", flags.dry, "Count requests and attachment bytes without sending");

  auto* report = app.add_subcommand("report", "Print the accuracy table of a finished run");
  std::optional<std::string> run_dir;
  std::optional<std::string> cells;
  report->add_option("run_dir", run_dir, "Run directory");
  report->add_option("--cells", cells, "Report TSV (cell_id, variant, k, mean, std, n_repeats, exclusions)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_root, ingest_out, all_mics ? std::nullopt : std::optional<int>(mic), channel);
    if (*render) return cmd_render(flags);
    if (*run) return cmd_run(flags);
    if (*report) return cmd_report(run_dir, cells);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
