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

#pragma once

#include <string>

#include "pathoicl/llm_client.hpp"

namespace pathoicl {

/// OpenAI-compatible chat-completions over HTTP(S). The API key is read
/// from the configured environment variable at construction.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(const EndpointConfig& cfg);

  BackendReply send(const BackendRequest& request) override;

 private:
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string api_key_;
};

}  // namespace pathoicl
