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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pathoicl/corpus.hpp"
#include "pathoicl/fold_planner.hpp"

namespace pathoicl {

enum class TaskFraming { kGenericAudioClassification, kDysarthriaSpecific };
enum class ResponseDetail { kScoreAndExplanation, kScoreOnly };
enum class InputRepresentation { kSpectrogramImage, kRawAudio };

std::string_view to_string(TaskFraming v) noexcept;
std::string_view to_string(ResponseDetail v) noexcept;
std::string_view to_string(InputRepresentation v) noexcept;
std::optional<TaskFraming> parse_task_framing(std::string_view text) noexcept;
std::optional<ResponseDetail> parse_response_detail(std::string_view text) noexcept;
std::optional<InputRepresentation> parse_input_representation(std::string_view text) noexcept;

/// The three prompt axes an experiment row varies, without the shot count.
struct VariantAxes {
  TaskFraming framing = TaskFraming::kGenericAudioClassification;
  ResponseDetail detail = ResponseDetail::kScoreAndExplanation;
  InputRepresentation input = InputRepresentation::kSpectrogramImage;

  /// e.g. "generic.detailed.image"
  std::string id() const;
  friend auto operator<=>(const VariantAxes&, const VariantAxes&) = default;
};

/// The four rows of the ablation table, main setting first.
std::vector<VariantAxes> standard_variants();

struct PromptVariant {
  VariantAxes axes;
  int k = 1;

  /// e.g. "generic.detailed.image.k3"
  std::string id() const;
  void validate() const;
  friend auto operator<=>(const PromptVariant&, const PromptVariant&) = default;
};

enum class AttachmentKind { kPngImage, kWavAudio };

struct Attachment {
  AttachmentKind kind = AttachmentKind::kPngImage;
  std::vector<std::uint8_t> bytes;
  std::string sha256;

  std::string_view mime() const noexcept {
    return kind == AttachmentKind::kPngImage ? "image/png" : "audio/wav";
  }
  static std::shared_ptr<const Attachment> make(AttachmentKind kind, std::vector<std::uint8_t> bytes);
};

using AttachmentPtr = std::shared_ptr<const Attachment>;

struct Exemplar {
  std::string label_text;
  AttachmentPtr attachment;
  Cohort cohort = Cohort::kControl;
};

/// A follow-up exchange appended after the first answer (re-prompting).
struct FollowUp {
  std::string assistant_text;
  std::string user_text;
};

/// Everything sent for one test utterance, in order: system text, labeled
/// exemplars grouped by class (class 0 first), then the test query.
struct PromptBundle {
  std::string system_text;
  std::vector<Exemplar> exemplars;
  AttachmentPtr test_attachment;
  std::string test_instruction;
  std::vector<FollowUp> follow_ups;
  PromptVariant variant;
  /// Bookkeeping only; never placed in any message.
  std::string test_utterance_id;
  /// Draw index of an otherwise identical request (the repeat). Enters the
  /// request hash, never a message.
  int sample = 0;

  std::size_t attachment_count() const { return exemplars.size() + (test_attachment ? 1 : 0); }
};

/// Prompt wording, loaded from text files with {placeholder} fields.
struct PromptTemplates {
  std::string system_generic;
  std::string system_dysarthria;
  std::string symptom_list;
  std::string score_instruction_detailed;
  std::string score_instruction_score_only;
  std::string input_description_image;
  std::string input_description_audio;
  std::string reference_label;
  std::string test_instruction;
  std::string reprompt;
  std::string class0_name;
  std::string class1_name;

  /// Copies compiled in from core/templates.
  static const PromptTemplates& builtin();
  /// Reads <name>.txt files; names missing from the directory keep their
  /// built-in wording.
  static PromptTemplates load(const std::filesystem::path& dir);
  void write(const std::filesystem::path& dir) const;
  /// Digest over all template texts, recorded with every run.
  std::string version() const;
};

/// Substitutes {name} fields. Unknown or unterminated placeholders throw
/// InvalidArgument.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

std::string build_system_prompt(const PromptVariant& variant,
                                const PromptTemplates& templates = PromptTemplates::builtin());

/// Returns the attachment for an utterance in the given representation, or
/// nullptr when it has not been produced.
using AttachmentLookup = std::function<AttachmentPtr(const UtteranceRecord&, InputRepresentation)>;

/// Throws MissingAttachment.
PromptBundle build_bundle(const FoldPlan& fold, const PromptVariant& variant,
                          const UtteranceRecord& test_utterance, const AttachmentLookup& attachments,
                          const PromptTemplates& templates = PromptTemplates::builtin());

/// Copy of the bundle with one more exchange asking for the score only.
PromptBundle with_reprompt(const PromptBundle& bundle, std::string_view previous_reply,
                           const PromptTemplates& templates = PromptTemplates::builtin());

/// Provider-neutral chat schema: system/user/assistant messages whose parts
/// are text or attachments referenced by digest.
nlohmann::json bundle_to_json(const PromptBundle& bundle);

}  // namespace pathoicl
