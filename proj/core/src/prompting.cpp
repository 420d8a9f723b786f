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

#include "pathoicl/prompting.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "builtin_templates.hpp"
#include "pathoicl/digest.hpp"
#include "pathoicl/error.hpp"

namespace pathoicl {
namespace {

using TemplateField = std::string PromptTemplates::*;

constexpr std::pair<std::string_view, TemplateField> kTemplateFields[] = {
    {"system_generic", &PromptTemplates::system_generic},
    {"system_dysarthria", &PromptTemplates::system_dysarthria},
    {"symptom_list", &PromptTemplates::symptom_list},
    {"score_instruction_detailed", &PromptTemplates::score_instruction_detailed},
    {"score_instruction_score_only", &PromptTemplates::score_instruction_score_only},
    {"input_description_image", &PromptTemplates::input_description_image},
    {"input_description_audio", &PromptTemplates::input_description_audio},
    {"reference_label", &PromptTemplates::reference_label},
    {"test_instruction", &PromptTemplates::test_instruction},
    {"reprompt", &PromptTemplates::reprompt},
    {"class0_name", &PromptTemplates::class0_name},
    {"class1_name", &PromptTemplates::class1_name},
};

PromptTemplates make_builtin() {
  PromptTemplates t;
  for (const auto& [name, field] : kTemplateFields) {
    bool found = false;
    for (const auto& [builtin_name, text] : detail::kBuiltinTemplates) {
      if (builtin_name == name) {
        t.*field = std::string(text);
        found = true;
      }
    }
    if (!found) fail(ErrorCode::kConfigError, fmt::format("built-in template '{}' missing", name));
  }
  return t;
}

const std::string& score_instruction(const PromptTemplates& t, ResponseDetail detail) {
  return detail == ResponseDetail::kScoreOnly ? t.score_instruction_score_only
                                              : t.score_instruction_detailed;
}

nlohmann::json text_part(const std::string& text) { return {{"type", "text"}, {"text", text}}; }

nlohmann::json attachment_part(const Attachment& a) {
  return {{"type", "attachment"}, {"mime", a.mime()}, {"sha256", a.sha256}, {"bytes", a.bytes.size()}};
}

}  // namespace

std::string_view to_string(TaskFraming v) noexcept {
  return v == TaskFraming::kGenericAudioClassification ? "generic" : "dysarthria";
}
std::string_view to_string(ResponseDetail v) noexcept {
  return v == ResponseDetail::kScoreAndExplanation ? "detailed" : "score-only";
}
std::string_view to_string(InputRepresentation v) noexcept {
  return v == InputRepresentation::kSpectrogramImage ? "image" : "audio";
}

std::optional<TaskFraming> parse_task_framing(std::string_view text) noexcept {
  if (text == "generic") return TaskFraming::kGenericAudioClassification;
  if (text == "dysarthria") return TaskFraming::kDysarthriaSpecific;
  return std::nullopt;
}
std::optional<ResponseDetail> parse_response_detail(std::string_view text) noexcept {
  if (text == "detailed") return ResponseDetail::kScoreAndExplanation;
  if (text == "score-only") return ResponseDetail::kScoreOnly;
  return std::nullopt;
}
std::optional<InputRepresentation> parse_input_representation(std::string_view text) noexcept {
  if (text == "image") return InputRepresentation::kSpectrogramImage;
  if (text == "audio") return InputRepresentation::kRawAudio;
  return std::nullopt;
}

std::string VariantAxes::id() const {
  return fmt::format("{}.{}.{}", to_string(framing), to_string(detail), to_string(input));
}

std::vector<VariantAxes> standard_variants() {
  using enum TaskFraming;
  using enum ResponseDetail;
  using enum InputRepresentation;
  return {
      {kGenericAudioClassification, kScoreAndExplanation, kSpectrogramImage},
      {kDysarthriaSpecific, kScoreAndExplanation, kSpectrogramImage},
      {kGenericAudioClassification, kScoreOnly, kSpectrogramImage},
      {kGenericAudioClassification, kScoreAndExplanation, kRawAudio},
  };
}

std::string PromptVariant::id() const { return fmt::format("{}.k{}", axes.id(), k); }

void PromptVariant::validate() const {
  if (k < 1) fail(ErrorCode::kInvalidArgument, fmt::format("shot count must be >= 1, got {}", k));
}

std::shared_ptr<const Attachment> Attachment::make(AttachmentKind kind, std::vector<std::uint8_t> bytes) {
  auto a = std::make_shared<Attachment>();
  a->kind = kind;
  a->sha256 = sha256_hex(bytes);
  a->bytes = std::move(bytes);
  return a;
}

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates templates = make_builtin();
  return templates;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorCode::kConfigError, fmt::format("template directory '{}' not found", dir.string()));
  }
  PromptTemplates t = builtin();
  for (const auto& [name, field] : kTemplateFields) {
    const auto path = dir / (std::string(name) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    t.*field = text.str();
  }
  return t;
}

void PromptTemplates::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, field] : kTemplateFields) {
    std::ofstream out(dir / (std::string(name) + ".txt"), std::ios::binary | std::ios::trunc);
    out << this->*field;
  }
}

std::string PromptTemplates::version() const {
  Sha256 h;
  for (const auto& [name, field] : kTemplateFields) {
    h.update(name).update(std::string_view("\0", 1)).update(this->*field).update(std::string_view("\0", 1));
  }
  return h.hex_digest();
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const auto close = text.find('}', open);
    if (close == std::string_view::npos) {
      fail(ErrorCode::kInvalidArgument, "unterminated placeholder in template");
    }
    const std::string name(text.substr(open + 1, close - open - 1));
    const auto it = values.find(name);
    if (it == values.end()) {
      fail(ErrorCode::kInvalidArgument, fmt::format("unknown template placeholder '{{{}}}'", name));
    }
    out.append(it->second);
    pos = close + 1;
  }
  return out;
}

std::string build_system_prompt(const PromptVariant& variant, const PromptTemplates& t) {
  variant.validate();
  const auto& body = variant.axes.framing == TaskFraming::kDysarthriaSpecific ? t.system_dysarthria
                                                                              : t.system_generic;
  return render_template(
      body, {{"k", std::to_string(variant.k)},
             {"class0_name", t.class0_name},
             {"class1_name", t.class1_name},
             {"symptom_list", t.symptom_list},
             {"score_instruction", score_instruction(t, variant.axes.detail)},
             {"input_description", variant.axes.input == InputRepresentation::kRawAudio
                                       ? t.input_description_audio
                                       : t.input_description_image}});
}

PromptBundle build_bundle(const FoldPlan& fold, const PromptVariant& variant,
                          const UtteranceRecord& test_utterance, const AttachmentLookup& attachments,
                          const PromptTemplates& t) {
  variant.validate();
  if (fold.k != variant.k) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("fold planned for k={} used with variant k={}", fold.k, variant.k));
  }
  const auto kind = variant.axes.input == InputRepresentation::kRawAudio ? AttachmentKind::kWavAudio
                                                                         : AttachmentKind::kPngImage;
  auto fetch = [&](const UtteranceRecord& u) {
    auto a = attachments(u, variant.axes.input);
    if (!a || a->kind != kind) {
      fail(ErrorCode::kMissingAttachment,
           fmt::format("no {} attachment for utterance '{}'", to_string(variant.axes.input),
                       u.utterance_id));
    }
    return a;
  };

  PromptBundle bundle;
  bundle.variant = variant;
  bundle.test_utterance_id = test_utterance.utterance_id;
  bundle.system_text = build_system_prompt(variant, t);
  for (const auto cohort : {Cohort::kControl, Cohort::kPathological}) {
    const auto refs = fold.references_of(cohort);
    const int class_index = cohort == Cohort::kControl ? 0 : 1;
    const auto& class_name = cohort == Cohort::kControl ? t.class0_name : t.class1_name;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      Exemplar e;
      e.cohort = cohort;
      e.label_text = render_template(t.reference_label, {{"index", std::to_string(i + 1)},
                                                         {"k", std::to_string(variant.k)},
                                                         {"class_index", std::to_string(class_index)},
                                                         {"class_name", class_name}});
      e.attachment = fetch(refs[i]->utterance);
      bundle.exemplars.push_back(std::move(e));
    }
  }
  bundle.test_attachment = fetch(test_utterance);
  bundle.test_instruction =
      render_template(t.test_instruction, {{"score_instruction", score_instruction(t, variant.axes.detail)}});
  return bundle;
}

PromptBundle with_reprompt(const PromptBundle& bundle, std::string_view previous_reply,
                           const PromptTemplates& t) {
  PromptBundle out = bundle;
  out.follow_ups.push_back({std::string(previous_reply), t.reprompt});
  return out;
}

nlohmann::json bundle_to_json(const PromptBundle& bundle) {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", nlohmann::json::array({text_part(bundle.system_text)})}});
  for (const auto& e : bundle.exemplars) {
    messages.push_back({{"role", "user"},
                        {"content", nlohmann::json::array({text_part(e.label_text), attachment_part(*e.attachment)})}});
  }
  nlohmann::json test = nlohmann::json::array({text_part(bundle.test_instruction)});
  if (bundle.test_attachment) test.push_back(attachment_part(*bundle.test_attachment));
  messages.push_back({{"role", "user"}, {"content", std::move(test)}});
  for (const auto& f : bundle.follow_ups) {
    messages.push_back({{"role", "assistant"}, {"content", nlohmann::json::array({text_part(f.assistant_text)})}});
    messages.push_back({{"role", "user"}, {"content", nlohmann::json::array({text_part(f.user_text)})}});
  }
  return {{"variant", bundle.variant.id()}, {"messages", std::move(messages)}};
}

}  // namespace pathoicl
