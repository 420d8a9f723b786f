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

#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "pathoicl/error.hpp"
#include "pathoicl/fold_planner.hpp"
#include "pathoicl/http_backend.hpp"
#include "pathoicl/mock_backend.hpp"

using namespace pathoicl;

namespace {

struct Server {
  httplib::Server svr;
  int port = 0;
  std::jthread thread;
  std::string last_auth;
  std::string last_path;
  nlohmann::json last_body;
  int status = 200;

  Server() {
    svr.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth = req.get_header_value("Authorization");
      last_path = req.path;
      last_body = nlohmann::json::parse(req.body);
      res.status = status;
      res.set_content(MockBackend::completion_body("SCORE: 0.4"), "application/json");
    });
    port = svr.bind_to_any_port("127.0.0.1");
    thread = std::jthread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~Server() { svr.stop(); }
};

PromptBundle sample_bundle() {
  static const auto corpus = testing::synthetic_corpus(testing::ten_speaker_spec());
  const auto fold = build_fold(corpus, "CM01", 1, 0);
  return build_bundle(fold, PromptVariant{standard_variants()[0], 1}, fold.test_utterances[0],
                      [](const UtteranceRecord&, InputRepresentation) {
                        return Attachment::make(AttachmentKind::kPngImage, {0x89, 0x50});
                      });
}

}  // namespace

TEST_CASE("http backend posts chat completions with the bearer key") {
  Server server;
  ::setenv("PATHOICL_TEST_KEY", "sk-test", 1);
  EndpointConfig cfg;
  cfg.base_url = fmt::format("http://127.0.0.1:{}/v1/", server.port);
  cfg.api_key_env = "PATHOICL_TEST_KEY";
  cfg.backoff_base = std::chrono::milliseconds(0);
  LlmClient client(cfg, std::make_shared<HttpBackend>(cfg));
  const auto r = client.submit(sample_bundle());
  CHECK(r.text == "SCORE: 0.4");
  CHECK(server.last_path == "/v1/chat/completions");
  CHECK(server.last_auth == "Bearer sk-test");
  CHECK(server.last_body.at("model") == "gpt-4o");
  CHECK(server.last_body.at("temperature") == 1.0);

  server.status = 401;
  CHECK_THROWS_AS(client.submit(sample_bundle()), Error);
}

TEST_CASE("connection failures surface as status 0") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  EndpointConfig cfg;
  cfg.base_url = fmt::format("http://127.0.0.1:{}", port);
  cfg.timeout = std::chrono::milliseconds(500);
  HttpBackend backend(cfg);
  const auto b = sample_bundle();
  const auto canonical = canonical_request(b, "m", 1.0);
  const auto hash = request_hash(canonical);
  const auto reply = backend.send(BackendRequest{b, canonical, hash, "m", 1.0, cfg.timeout});
  CHECK(reply.status == 0);
  CHECK_FALSE(reply.body.empty());
}

TEST_CASE("endpoint without scheme is a config error") {
  EndpointConfig cfg;
  cfg.base_url = "localhost:8080";
  CHECK_THROWS_AS(HttpBackend{cfg}, Error);
}
