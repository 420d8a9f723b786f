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

#include <doctest.h>

#include <atomic>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pathoicl/artifacts.hpp"
#include "pathoicl/audio.hpp"
#include "pathoicl/error.hpp"
#include "pathoicl/mock_backend.hpp"
#include "pathoicl/runner.hpp"

using namespace pathoicl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

struct Workspace {
  testing::TempDir tmp{"runner"};
  testing::Fixture fixture = testing::write_fixture(tmp / "corpus", testing::ten_speaker_spec());

  json base(const std::string& out = "run") const {
    return {{"manifest_path", fixture.manifest.string()},
            {"shots", {1}},
            {"variants", {"generic.detailed.image", "generic.score-only.image"}},
            {"repeats", 2},
            {"seed", 11},
            {"offline", true},
            {"mock_policy", "label-leak"},
            {"output_dir", (tmp / out).string()},
            {"planner", {{"allow_speaker_reuse", true}}},
            {"endpoint", {{"max_parallel", 4}, {"backoff_base_ms", 0}, {"max_retries", 0}}}};
  }
  ExperimentConfig config(const std::string& out = "run") const { return ExperimentConfig::from_json(base(out)); }
  std::size_t tasks_per_cell() const { return fixture.corpus.speakers().size() * 10; }
};

/// Forwards to a mock and starts failing with HTTP 500 after `healthy` replies.
class FlakyBackend : public ChatBackend {
 public:
  FlakyBackend(MockPolicy policy, std::size_t healthy) : inner_(std::move(policy)), healthy_(healthy) {}
  BackendReply send(const BackendRequest& request) override {
    if (served_.fetch_add(1) >= healthy_) return {500, "down"};
    ++succeeded_;
    return inner_.send(request);
  }
  std::size_t succeeded() const { return succeeded_.load(); }

 private:
  MockBackend inner_;
  std::size_t healthy_;
  std::atomic<std::size_t> served_{0};
  std::atomic<std::size_t> succeeded_{0};
};

}  // namespace

TEST_CASE("config parsing") {
  Workspace ws;
  const auto cfg = ws.config();
  CHECK(cfg.shots == std::vector<int>{1});
  CHECK(cfg.variants.size() == 2);
  CHECK(cfg.variants[1].detail == ResponseDetail::kScoreOnly);
  CHECK(cfg.endpoint.max_parallel == 4);
  CHECK(cfg.planner.allow_speaker_reuse);
  CHECK(cfg.effective_cache_dir() == ws.tmp / "run" / "cache");

  auto j = ws.base();
  j["variants"] = json::array({{{"task_framing", "dysarthria"}}, {{"input_repr", "audio"}}});
  const auto objects = ExperimentConfig::from_json(j);
  CHECK(objects.variants[0].id() == "dysarthria.detailed.image");
  CHECK(objects.variants[1].id() == "generic.detailed.audio");
  j["variants"] = "standard";
  CHECK(ExperimentConfig::from_json(j).variants == standard_variants());

  const auto round = ExperimentConfig::from_json(cfg.to_json());
  CHECK(round.to_json() == cfg.to_json());
  CHECK(config_fingerprint(round) == config_fingerprint(cfg));

  auto relative = ws.base();
  relative["manifest_path"] = "corpus/manifest.tsv";
  relative["output_dir"] = "out";
  const auto resolved = ExperimentConfig::from_json(relative, ws.tmp.path());
  CHECK(resolved.manifest_path == ws.tmp / "corpus/manifest.tsv");
  CHECK(resolved.output_dir == ws.tmp / "out");

  for (const auto& mutate : std::vector<std::function<void(json&)>>{
           [](json& x) { x["shot"] = 1; },
           [](json& x) { x["endpoint"]["retries"] = 1; },
           [](json& x) { x["render"] = {{"dbrange", 80}}; },
           [](json& x) { x["variants"] = {"generic.detailed"}; },
           [](json& x) { x["variants"] = {{{"framing", "generic"}}}; },
           [](json& x) { x["variants"] = 3; },
           [](json& x) { x["repeats"] = "three"; },
       }) {
    auto bad = ws.base();
    mutate(bad);
    CHECK(code_of([&] { ExperimentConfig::from_json(bad); }) == ErrorCode::kConfigError);
  }
  CHECK(code_of([&] { ExperimentConfig::load(ws.tmp / "none.json"); }) == ErrorCode::kConfigError);
  testing::write_config(ws.tmp / "broken.json", "{ not json");
  CHECK(code_of([&] { ExperimentConfig::load(ws.tmp / "broken.json"); }) == ErrorCode::kConfigError);
}

TEST_CASE("config validation") {
  Workspace ws;
  for (const auto& mutate : std::vector<std::function<void(ExperimentConfig&)>>{
           [](ExperimentConfig& c) { c.shots = {}; },
           [](ExperimentConfig& c) { c.shots = {1, 1}; },
           [](ExperimentConfig& c) { c.shots = {0}; },
           [](ExperimentConfig& c) { c.variants = {}; },
           [](ExperimentConfig& c) { c.variants = {c.variants[0], c.variants[0]}; },
           [](ExperimentConfig& c) { c.repeats = 0; },
           [](ExperimentConfig& c) { c.manifest_path.clear(); },
           [](ExperimentConfig& c) { c.mock_policy = "whatever"; },
           [](ExperimentConfig& c) { c.endpoint.max_parallel = 0; },
           [](ExperimentConfig& c) { c.render.colormap = "jet"; },
       }) {
    auto cfg = ws.config();
    mutate(cfg);
    CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::kConfigError);
  }
  ws.config().validate();
}

TEST_CASE("fingerprint tracks what changes results and nothing else") {
  Workspace ws;
  const auto base = ws.config();
  const auto fp = config_fingerprint(base);
  CHECK(fp.size() == 64);

  const std::vector<std::pair<const char*, std::function<void(ExperimentConfig&)>>> relevant{
      {"seed", [](ExperimentConfig& c) { c.seed += 1; }},
      {"model", [](ExperimentConfig& c) { c.endpoint.model_name = "gpt-4o-mini"; }},
      {"audio model", [](ExperimentConfig& c) { c.endpoint.audio_model_name = "x"; }},
      {"temperature", [](ExperimentConfig& c) { c.endpoint.temperature = 0.0; }},
      {"image limit", [](ExperimentConfig& c) { c.endpoint.max_image_bytes = 1000; }},
      {"backend", [](ExperimentConfig& c) { c.offline = false; }},
      {"mock policy", [](ExperimentConfig& c) { c.mock_policy = "always:0.5"; }},
      {"window", [](ExperimentConfig& c) { c.stft.window_ms = 20.0; }},
      {"db range", [](ExperimentConfig& c) { c.render.db_range = 60.0; }},
      {"reference", [](ExperimentConfig& c) { c.render.reference_db = 0.0; }},
      {"colormap", [](ExperimentConfig& c) { c.render.colormap = "gray"; }},
      {"planner", [](ExperimentConfig& c) { c.planner.allow_speaker_reuse = false; }},
  };
  for (const auto& [name, mutate] : relevant) {
    CAPTURE(name);
    auto cfg = base;
    mutate(cfg);
    CHECK(config_fingerprint(cfg) != fp);
  }

  const std::vector<std::pair<const char*, std::function<void(ExperimentConfig&)>>> irrelevant{
      {"shots", [](ExperimentConfig& c) { c.shots = {1, 3}; }},
      {"variants", [](ExperimentConfig& c) { c.variants = standard_variants(); }},
      {"repeats", [](ExperimentConfig& c) { c.repeats = 5; }},
      {"output", [](ExperimentConfig& c) { c.output_dir = "/elsewhere"; }},
      {"cache", [](ExperimentConfig& c) { c.cache_dir = "/cache"; }},
      {"parallel", [](ExperimentConfig& c) { c.endpoint.max_parallel = 1; }},
      {"retries", [](ExperimentConfig& c) { c.endpoint.max_retries = 9; }},
      {"url", [](ExperimentConfig& c) { c.endpoint.base_url = "http://localhost:1"; }},
  };
  for (const auto& [name, mutate] : irrelevant) {
    CAPTURE(name);
    auto cfg = base;
    mutate(cfg);
    CHECK(config_fingerprint(cfg) == fp);
  }

  // Same manifest bytes elsewhere give the same fingerprint; edited bytes do not.
  auto copy = base;
  copy.manifest_path = ws.tmp / "copy.tsv";
  fs::copy_file(base.manifest_path, copy.manifest_path);
  CHECK(config_fingerprint(copy) == fp);
  std::ofstream(copy.manifest_path, std::ios::app) << "\n";
  CHECK(config_fingerprint(copy) != fp);

  const PromptVariant a{standard_variants()[0], 1};
  const PromptVariant b{standard_variants()[0], 3};
  CHECK(cell_fingerprint(fp, a) != cell_fingerprint(fp, b));
  CHECK(cell_fingerprint(fp, a) == cell_fingerprint(fp, a));
}

TEST_CASE("artifact store is idempotent and content addressed") {
  Workspace ws;
  const auto& corpus = ws.fixture.corpus;
  const std::set<InputRepresentation> both{InputRepresentation::kSpectrogramImage, InputRepresentation::kRawAudio};
  ArtifactStore store(ws.tmp / "art", StftConfig{}, RenderConfig{});
  const auto first = store.precompute(corpus, both);
  CHECK(first.created == corpus.utterances().size() * 2);
  CHECK(first.reused == 0);
  const auto second = store.precompute(corpus, both);
  CHECK(second.created == 0);
  CHECK(second.reused == first.created);

  ArtifactStore again(ws.tmp / "art", StftConfig{}, RenderConfig{});
  CHECK(again.precompute(corpus, both).created == 0);

  const auto& u = corpus.utterances().front();
  const auto png = store.get(u, InputRepresentation::kSpectrogramImage);
  CHECK(png->kind == AttachmentKind::kPngImage);
  CHECK(store.path_for(u, InputRepresentation::kSpectrogramImage).extension() == ".png");
  const auto img = decode_png(png->bytes);
  CHECK(std::min(img.width, img.height) >= 512);
  CHECK(store.get(u, InputRepresentation::kSpectrogramImage) == png);

  RenderConfig gray;
  gray.colormap = "gray";
  ArtifactStore other(ws.tmp / "art", StftConfig{}, gray);
  CHECK(other.path_for(u, InputRepresentation::kSpectrogramImage) !=
        store.path_for(u, InputRepresentation::kSpectrogramImage));
  CHECK(other.path_for(u, InputRepresentation::kRawAudio) == store.path_for(u, InputRepresentation::kRawAudio));
  CHECK(other.precompute(corpus, {InputRepresentation::kSpectrogramImage}, {u.utterance_id}).created == 1);
}

TEST_CASE("raw audio attachments are 16 kHz mono PCM") {
  testing::TempDir tmp("rate");
  auto spec = testing::ten_speaker_spec();
  spec.sample_rate = 44100;
  spec.samples_per_clip = 44100 / 4;
  const auto fx = testing::write_fixture(tmp.path(), spec);
  ArtifactStore store(tmp / "art", StftConfig{}, RenderConfig{});
  const auto& u = fx.corpus.utterances().front();
  const auto wav = decode_wav(store.get(u, InputRepresentation::kRawAudio)->bytes);
  CHECK(wav.sample_rate == 16000);
  CHECK(wav.channels == 1);
  CHECK(wav.bits_per_sample == 16);
  CHECK(wav.frames() == 4000);
}

TEST_CASE("missing audio is reported with the utterance id") {
  const auto corpus = testing::synthetic_corpus(testing::ten_speaker_spec());
  testing::TempDir tmp("missing");
  ArtifactStore store(tmp.path(), StftConfig{}, RenderConfig{});
  try {
    store.get(corpus.utterances().front(), InputRepresentation::kSpectrogramImage);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(corpus.utterances().front().utterance_id) != std::string::npos);
  }
}

TEST_CASE("label-leak run matches the brute-force evaluator") {
  Workspace ws;
  const auto cfg = ws.config();
  const auto out = run_experiment(cfg);
  const std::size_t expected_rows = ws.tasks_per_cell() * 2 * 2;
  CHECK(out.ledger.size() == expected_rows);
  CHECK(out.network_calls == expected_rows);
  CHECK(out.cells.size() == 2);
  for (const auto& c : out.cells) {
    CHECK(c.mean_accuracy == 100.0);
    CHECK(c.std_accuracy == 0.0);
    CHECK(c.n_repeats == 2);
  }
  const auto brute = testing::brute_force_cells(
      out.run_dir, ws.fixture.corpus, {"generic.detailed.image", "generic.score-only.image"}, {1}, 2,
      [&](const std::string& id) {
        return ws.fixture.corpus.speaker(ws.fixture.corpus.find_utterance(id)->speaker_id).cohort == Cohort::kPathological
                   ? 1.0
                   : 0.0;
      });
  REQUIRE(brute.size() == out.cells.size());
  for (std::size_t i = 0; i < brute.size(); ++i) {
    CHECK(out.cells[i].variant_id == brute[i].variant_id);
    CHECK(out.cells[i].mean_accuracy == brute[i].mean);
    CHECK(out.cells[i].std_accuracy == brute[i].std);
  }

  for (const auto* name : {"config.json", "manifest.tsv", "ledger.tsv", "speaker-results.tsv", "report.txt",
                           "report.tsv"}) {
    CAPTURE(name);
    CHECK(fs::exists(out.run_dir / name));
  }
  CHECK_FALSE(fs::exists(out.run_dir / "ledger.partial.tsv"));
  CHECK(fs::exists(out.run_dir / "fold-plans" / fold_plan_dir_name(1, 1) / "CF01.json"));
  CHECK(parse_ledger(testing::read_text(out.run_dir / "ledger.tsv")) == out.ledger);
  CHECK(out.speaker_results.size() == ws.fixture.corpus.speakers().size() * 2 * 2);
  CHECK(parse_speaker_results(testing::read_text(out.run_dir / "speaker-results.tsv")) == out.speaker_results);
  const auto again = report_from_run_dir(out.run_dir);
  CHECK(again.table == out.report.table);
  CHECK(again.tsv == out.report.tsv);

  const auto record = json::parse(testing::read_text(out.run_dir / "config.json"));
  CHECK(record.at("fingerprint") == out.fingerprint);

  // every run id names its cell and repeat
  for (const auto& row : out.ledger) {
    CHECK(row.run_id.find(fmt::format(".r{}", row.repeat)) != std::string::npos);
    CHECK(row.run_id.find(PromptVariant{row.axes, row.k}.id()) != std::string::npos);
  }
}

TEST_CASE("second run is served from the cache and is byte identical") {
  Workspace ws;
  auto cfg = ws.config("a");
  cfg.cache_dir = ws.tmp / "shared-cache";
  const auto first = run_experiment(cfg);
  auto second_cfg = cfg;
  second_cfg.output_dir = ws.tmp / "b";
  second_cfg.endpoint.max_parallel = 1;
  const auto second = run_experiment(second_cfg);
  CHECK(second.network_calls == 0);
  CHECK(second.cache_hits == first.ledger.size());
  CHECK(testing::read_text(ws.tmp / "a" / "ledger.tsv") == testing::read_text(ws.tmp / "b" / "ledger.tsv"));
  CHECK(testing::read_text(ws.tmp / "a" / "report.txt") == testing::read_text(ws.tmp / "b" / "report.txt"));

  // a different mock policy never reuses those answers
  auto third = second_cfg;
  third.mock_policy = "always:0.5";
  third.output_dir = ws.tmp / "c";
  const auto constant = run_experiment(third);
  CHECK(constant.network_calls == first.ledger.size());
  for (const auto& c : constant.cells) CHECK(c.mean_accuracy == doctest::Approx(60.0));
}

TEST_CASE("interrupted runs resume from the cache") {
  Workspace ws;
  auto cfg = ws.config();
  cfg.repeats = 1;
  const std::size_t total = ws.tasks_per_cell() * 2;
  LabelTable labels;
  for (const auto& u : ws.fixture.corpus.utterances()) {
    labels.emplace(u.utterance_id, ws.fixture.corpus.speaker(u.speaker_id).cohort);
  }
  auto flaky = std::make_shared<FlakyBackend>(mock_policies::label_leak(labels), 37);
  try {
    run_experiment(cfg, flaky);
    FAIL("no error");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 1);
    const std::string what = e.what();
    CHECK(what.find("variant=") != std::string::npos);
    CHECK(what.find("utterance=") != std::string::npos);
  }
  CHECK(flaky->succeeded() == 37);
  CHECK(fs::exists(cfg.output_dir / "ledger.partial.tsv"));
  CHECK_FALSE(fs::exists(cfg.output_dir / "ledger.tsv"));
  const auto partial = parse_ledger(testing::read_text(cfg.output_dir / "ledger.partial.tsv"));
  CHECK(partial.size() <= 37);

  const auto est = dry_run(cfg);
  CHECK(est.requests == total);
  CHECK(est.cached == 37);

  const auto resumed = run_experiment(cfg);
  CHECK(resumed.network_calls == total - 37);
  CHECK(resumed.cache_hits == 37);
  CHECK(resumed.ledger.size() == total);
  CHECK_FALSE(fs::exists(cfg.output_dir / "ledger.partial.tsv"));
}

TEST_CASE("unparseable replies are re-prompted once, then excluded") {
  Workspace ws;
  auto cfg = ws.config();
  cfg.mock_policy = "malformed-parity:4:always:0.7";
  cfg.repeats = 1;
  const auto out = run_experiment(cfg);
  CHECK(out.ledger.size() == ws.tasks_per_cell() * 2);
  int reprompted = 0, excluded = 0;
  for (const auto& row : out.ledger) {
    if (row.reprompt_of.empty()) {
      CHECK_FALSE(mock_policies::is_malformed_hash(row.cache_hash, 4));
      CHECK(row.score == 0.7);
      continue;
    }
    ++reprompted;
    CHECK(mock_policies::is_malformed_hash(row.reprompt_of, 4));
    CHECK(row.reprompt_of != row.cache_hash);
    if (mock_policies::is_malformed_hash(row.cache_hash, 4)) {
      ++excluded;
      CHECK(row.excluded);
      CHECK(row.exclusion_reason == "UnparseableResponse");
      CHECK_FALSE(row.score.has_value());
    } else {
      CHECK(row.score == 0.7);
    }
  }
  CHECK(reprompted > 0);
  int counted = 0;
  for (const auto& c : out.cells) counted += c.exclusions;
  CHECK(counted == excluded);
  if (excluded > 0) CHECK(out.report.table.find("Excluded utterances") != std::string::npos);
}

TEST_CASE("refusals exclude the utterance but keep the speaker") {
  Workspace ws;
  auto cfg = ws.config();
  cfg.repeats = 1;
  cfg.variants = {standard_variants()[0]};
  auto backend = std::make_shared<MockBackend>(mock_policies::always(1.0));
  backend->set_override([](const BackendRequest& r, int) -> std::optional<BackendReply> {
    if (r.bundle.test_utterance_id.rfind("CF01_B1_CW", 0) == 0) {
      return BackendReply{400, "content_policy_violation"};
    }
    return std::nullopt;
  });
  const auto out = run_experiment(cfg, backend);
  int refused = 0;
  for (const auto& row : out.ledger) {
    if (row.excluded) {
      ++refused;
      CHECK(row.exclusion_reason == "ProviderRefusal");
      CHECK(row.fold == "CF01");
      CHECK(row.cache_hash.size() == 64);
    }
  }
  CHECK(refused == 2);
  bool found = false;
  for (const auto& s : out.speaker_results) {
    if (s.result.speaker_id == "CF01") {
      found = true;
      CHECK(s.result.n_excluded == refused);
      CHECK(s.result.n_utterances_scored + s.result.n_excluded == 10);
    }
  }
  CHECK(found);
}

TEST_CASE("auth failures abort the run with the task locus") {
  Workspace ws;
  auto backend = std::make_shared<MockBackend>(mock_policies::always(1.0));
  backend->set_override([](const BackendRequest&, int) { return BackendReply{401, "no"}; });
  try {
    run_experiment(ws.config(), backend);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAuthError);
    // the lowest-index task fails first: first variant, first repeat, first fold
    CHECK(std::string(e.what()).find("variant=generic.detailed.image k=1 repeat=0 fold=CF01") != std::string::npos);
  }
}

TEST_CASE("infeasible plans name k and repeat") {
  Workspace ws;
  auto cfg = ws.config();
  cfg.shots = {5};
  cfg.planner.allow_speaker_reuse = false;
  try {
    dry_run(cfg);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasibleBalance);
    CHECK(std::string(e.what()).find("k=5 repeat=0") != std::string::npos);
  }
}

TEST_CASE("dry run counts requests and payload") {
  Workspace ws;
  auto cfg = ws.config();
  cfg.shots = {3};
  cfg.repeats = 1;
  const auto est = dry_run(cfg);
  const std::size_t total = ws.tasks_per_cell() * 2;
  CHECK(est.requests == total);
  CHECK(est.cached == 0);
  CHECK(est.attachments == total * 7);
  CHECK(est.attachment_bytes > est.attachments * 100);
  run_experiment(cfg);
  CHECK(dry_run(cfg).cached == total);
}

TEST_CASE("ledger text round trip and validation") {
  LedgerRow a;
  a.run_id = "abc.generic.detailed.image.k1.r0";
  a.fold = "F01";
  a.utterance_id = "F01_B1_C1";
  a.k = 1;
  a.score = 0.1 + 0.2;
  a.cache_hash = std::string(64, 'a');
  LedgerRow b = a;
  b.score.reset();
  b.excluded = true;
  b.exclusion_reason = "ProviderRefusal";
  b.reprompt_of = std::string(64, 'b');
  const std::vector<LedgerRow> rows{a, b};
  const auto text = format_ledger(rows);
  CHECK(parse_ledger(text) == rows);
  CHECK(code_of([] { parse_ledger("nope\n"); }) == ErrorCode::kInvalidArgument);
  auto header = text.substr(0, text.find('\n') + 1);
  CHECK(code_of([&] { parse_ledger(header + "a\tb\n"); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] {
          parse_ledger(header + "r\tF\tu\tgeneric\tdetailed\timage\t1\t0\t0.5\th\t1\tx\t\n");
        }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] {
          parse_ledger(header + "r\tF\tu\tgeneric\tdetailed\tvideo\t1\t0\t0.5\th\t0\t\t\n");
        }) == ErrorCode::kInvalidArgument);
}
