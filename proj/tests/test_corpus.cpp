// Copyright 2026 The voxtag Authors
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


#include <fstream>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "voxtag/corpus.hpp"
#include "voxtag/error.hpp"

using namespace voxtag;

TEST_CASE("manifest: round trip and relative audio paths") {
  voxtag::testing::TempDir dir("corpus");
  std::vector<Utterance> utts(2);
  utts[0] = {"u0", "wav/u0.wav", perturb::SpeakerGender::F, "i am tired", "io sono stanca", {}};
  utts[1] = {"u1", "wav/u1.wav", perturb::SpeakerGender::M, "i am ready", "io sono pronto", {}};
  write_manifest(utts, dir / "manifest.tsv");
  const auto back = read_manifest(dir / "manifest.tsv");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].id == utts[i].id);
    CHECK(back[i].wav_path == utts[i].wav_path);
    CHECK(back[i].gender == utts[i].gender);
    CHECK(back[i].source_text == utts[i].source_text);
    CHECK(back[i].target_text == utts[i].target_text);
  }
  std::filesystem::create_directories(dir / "wav");
  const auto w = audio::synth_harmonic(150.0, {}, 0.1);
  audio::write_wav(w, dir / "wav/u0.wav");
  CHECK(back[0].load_audio(dir.path()).size() == w.size());
  CHECK_THROWS_AS(back[1].load_audio(dir.path()), Error);

  utts[0].target_text = "bad\ttext";
  CHECK_THROWS_AS(write_manifest(utts, dir / "bad.tsv"), Error);
}

TEST_CASE("manifest: malformed lines") {
  voxtag::testing::TempDir dir("corpus");
  std::ofstream(dir / "m.tsv") << "u0\twav/u0.wav\tF\tonly four\n";
  try {
    read_manifest(dir / "m.tsv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MalformedHeader);
  }
  std::ofstream(dir / "g.tsv") << "u0\twav/u0.wav\tX\ta\tb\n";
  CHECK_THROWS_AS(read_manifest(dir / "g.tsv"), Error);
}

TEST_CASE("eval TSV: round trip, swapping and validation") {
  voxtag::testing::TempDir dir("corpus");
  GenderEvalEntry e{"u0", {"io", "sono", "stanca"}, {"io", "sono", "stanco"}, {{"stanca", "stanco"}}};
  write_eval_tsv({e}, dir / "eval.tsv");
  const auto back = read_eval_tsv(dir / "eval.tsv");
  REQUIRE(back.size() == 1);
  CHECK(back[0].reference == e.reference);
  CHECK(back[0].wrong_reference == e.wrong_reference);
  REQUIRE(back[0].term_pairs.size() == 1);
  CHECK(back[0].term_pairs[0].correct == "stanca");

  const auto s = e.swapped();
  CHECK(s.reference == e.wrong_reference);
  CHECK(s.term_pairs[0].correct == "stanco");
  CHECK(s.term_pairs[0].wrong == "stanca");

  GenderEvalEntry empty{"u1", {"a"}, {"a"}, {}};
  CHECK_THROWS_AS(empty.validate(), Error);
  GenderEvalEntry same{"u2", {"a"}, {"a"}, {{"a", "a"}}};
  CHECK_THROWS_AS(same.validate(), Error);

  std::ofstream(dir / "bad.tsv") << "u0\tio\tio\tstanca-stanco\n";
  try {
    read_eval_tsv(dir / "bad.tsv");
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::MalformedHeader);
  }
}
