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

#include <sstream>

#include "fixtures.hpp"
#include "pathoicl/audio.hpp"
#include "pathoicl/corpus.hpp"
#include "pathoicl/error.hpp"

using namespace pathoicl;
using pathoicl::testing::TempDir;

namespace {

constexpr const char* kHeader = "speaker_id\tcohort\tgender\tutterance_id\tcategory\tword_id\tchannel\taudio_path\n";

Corpus parse(const std::string& text, const std::filesystem::path& base = "/data") {
  std::istringstream in(text);
  return parse_manifest(in, "m.tsv", base);
}

ErrorCode code_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("manifest rows resolve relative paths and sort records") {
  const auto corpus = parse(std::string(kHeader) +
                            "M01\tpathological\tm\tM01_B1_D1\tD\tB1_D1\t1\taudio/M01_B1_D1.wav\n"
                            "CF02\tcontrol\tf\tCF02_B1_CW1\tCW\tB1_CW1\t2\t/abs/x.wav\n");
  REQUIRE(corpus.speakers().size() == 2);
  CHECK(corpus.speakers()[0].speaker_id == "CF02");
  CHECK(corpus.count(Cohort::kControl) == 1);
  const auto* u = corpus.find_utterance("M01_B1_D1");
  REQUIRE(u != nullptr);
  CHECK(u->audio_path == std::filesystem::path("/data/audio/M01_B1_D1.wav"));
  CHECK(u->category == Category::kD);
  CHECK(corpus.find_utterance("CF02_B1_CW1")->channel == 2);
}

TEST_CASE("comma-delimited manifests are accepted") {
  const auto corpus = parse(
      "speaker_id,cohort,gender,utterance_id,category,word_id,channel,audio_path\n"
      "F03,pathological,f,u1,L,B1_LA,1,a.wav\n");
  CHECK(corpus.utterances().size() == 1);
}

TEST_CASE("manifest errors carry stable codes") {
  CHECK(code_of("speaker,cohort\n") == ErrorCode::kMalformedManifest);
  CHECK(code_of("") == ErrorCode::kMalformedManifest);
  CHECK(code_of(std::string(kHeader) + "M01\tsick\tm\tu\tD\tw\t1\ta.wav\n") == ErrorCode::kMalformedManifest);
  CHECK(code_of(std::string(kHeader) + "M01\tpathological\tm\tu\tXX\tw\t1\ta.wav\n") ==
        ErrorCode::kMalformedManifest);
  CHECK(code_of(std::string(kHeader) + "M01\tpathological\tm\tu\tD\tw\t0\ta.wav\n") ==
        ErrorCode::kMalformedManifest);
  CHECK(code_of(std::string(kHeader) + "M01\tpathological\tm\tu\tD\tw\t1\ta.wav\n"
                                       "M01\tpathological\tm\tu\tD\tw\t1\tb.wav\n") == ErrorCode::kDuplicateKey);
  CHECK(code_of(std::string(kHeader) + "M01\t\t\tu\tD\tw\t1\ta.wav\n") == ErrorCode::kDanglingReference);
  CHECK(code_of(std::string(kHeader) + "M01\tpathological\tm\tu1\tD\tw\t1\ta.wav\n"
                                       "M01\tcontrol\tm\tu2\tD\tw\t1\tb.wav\n") == ErrorCode::kMalformedManifest);
}

TEST_CASE("malformed rows report file and line") {
  try {
    parse(std::string(kHeader) + "M01\tpathological\tm\tu\tD\tw\t1\ta.wav\nM02\tpathological\n");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("m.tsv:3") != std::string::npos);
  }
}

TEST_CASE("rows without cohort refer to a speaker defined elsewhere") {
  const auto corpus = parse(std::string(kHeader) + "M01\t\t\tu2\tD\tw2\t1\tb.wav\n"
                                                   "M01\tpathological\tm\tu1\tD\tw1\t1\ta.wav\n");
  CHECK(corpus.utterances_of("M01").size() == 2);
}

TEST_CASE("format_manifest round-trips") {
  const auto corpus = testing::synthetic_corpus(testing::ten_speaker_spec());
  const auto again = parse(format_manifest(corpus));
  CHECK(again.speakers() == corpus.speakers());
  CHECK(again.utterances() == corpus.utterances());
}

TEST_CASE("UA-Speech directory scan") {
  TempDir tmp("scan");
  const AudioClip clip{std::vector<double>(800, 0.1), 16000};
  for (const char* name : {"CF02_B1_CW12_M5.wav", "CF02_B1_CW12_M6.wav", "M07_B2_UW45_M5.wav", "M07_B1_LA_M5.wav",
                           "M07_B1_D3_M5.wav", "notes.wav", "F03_X1_CW1_M5.wav"}) {
    write_file(tmp / name, encode_wav_pcm16(clip));
  }
  SUBCASE("all microphones") {
    const auto corpus = scan_uaspeech_directory(tmp.path());
    CHECK(corpus.speakers().size() == 2);
    CHECK(corpus.utterances().size() == 5);
    CHECK(corpus.speaker("CF02").cohort == Cohort::kControl);
    CHECK(corpus.speaker("CF02").gender == Gender::kFemale);
    CHECK(corpus.speaker("M07").cohort == Cohort::kPathological);
    CHECK(corpus.find_utterance("CF02_B1_CW12_M6")->word_id == "B1_CW12_M6");
  }
  SUBCASE("one microphone") {
    ScanOptions options;
    options.microphone = 5;
    const auto corpus = scan_uaspeech_directory(tmp.path(), options);
    CHECK(corpus.utterances().size() == 4);
    CHECK(corpus.find_utterance("M07_B2_UW45_M5")->category == Category::kUW);
    CHECK(corpus.find_utterance("M07_B1_LA_M5")->category == Category::kL);
    CHECK(corpus.find_utterance("CF02_B1_CW12_M5")->word_id == "B1_CW12");
  }
}
