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


#include <algorithm>
#include <iterator>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "voxtag/dsp.hpp"
#include "voxtag/error.hpp"
#include "voxtag/synthdata.hpp"

using namespace voxtag;
using perturb::SpeakerGender;

namespace {

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  return {std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
}

synth::Corpus corpus_of(std::size_t n, std::uint64_t seed) {
  synth::SynthSpec spec;
  spec.n_utterances = n;
  spec.seed = seed;
  return synth::generate_corpus(spec);
}

}  // namespace

TEST_CASE("generate_corpus: gender split is binomial") {
  const auto c = corpus_of(1000, 1);
  REQUIRE(c.utterances.size() == 1000);
  REQUIRE(c.entries.size() == 1000);
  const auto n_f = std::count_if(c.utterances.begin(), c.utterances.end(),
                                 [](const Utterance& u) { return u.gender == SpeakerGender::F; });
  CHECK(std::abs(n_f - 300) <= 30);
}

TEST_CASE("generate_corpus: targets, entries and references") {
  const auto c = corpus_of(120, 2);
  const auto g = synth::Grammar::standard();
  std::set<std::string> gendered_forms;
  for (const auto& e : g.gendered) {
    gendered_forms.insert(e.feminine);
    gendered_forms.insert(e.masculine);
  }
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    const auto& u = c.utterances[i];
    const auto& e = c.entries[i];
    CHECK(e.id == u.id);
    CHECK_NOTHROW(e.validate());
    const auto target = words(u.target_text);
    CHECK(target == e.reference);
    CHECK(words(u.source_text).size() == target.size());
    CHECK((target.size() >= 5 && target.size() <= 12));
    const auto n_gendered = std::count_if(target.begin(), target.end(),
                                          [&](const std::string& w) { return gendered_forms.count(w) > 0; });
    CHECK((n_gendered >= 1 && n_gendered <= 3));
    CHECK(e.term_pairs.size() == static_cast<std::size_t>(n_gendered));

    // References differ exactly at the gendered slots, by an aligned F/M pair.
    REQUIRE(e.wrong_reference.size() == e.reference.size());
    std::size_t pair = 0;
    for (std::size_t k = 0; k < target.size(); ++k) {
      if (gendered_forms.count(target[k])) {
        REQUIRE(pair < e.term_pairs.size());
        CHECK(e.term_pairs[pair].correct == target[k]);
        CHECK(e.term_pairs[pair].wrong == e.wrong_reference[k]);
        const auto it = std::find_if(g.gendered.begin(), g.gendered.end(), [&](const synth::GrammarEntry& ge) {
          return ge.form(u.gender) == target[k];
        });
        REQUIRE(it != g.gendered.end());
        CHECK(it->form(perturb::opposite(u.gender)) == e.wrong_reference[k]);
        ++pair;
      } else {
        CHECK(e.wrong_reference[k] == target[k]);
      }
    }
  }
}

TEST_CASE("generate_corpus: f0 ranges and the 170 Hz classifier") {
  const auto c = corpus_of(150, 3);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    const auto& u = c.utterances[i];
    const double median = dsp::voiced_median(dsp::estimate_f0_contour(*u.audio));
    if (u.gender == SpeakerGender::F) {
      CHECK((median >= 199.0 && median <= 301.0));
      CHECK((c.f0[i] >= 199.0 && c.f0[i] <= 301.0));
    } else {
      CHECK((c.f0[i] >= 80.0 && c.f0[i] <= 200.0));
    }
    CHECK(median == doctest::Approx(c.f0[i]).epsilon(0.03));
    agree += (median > 170.0) == (u.gender == SpeakerGender::F);
  }
  CHECK(agree == c.utterances.size());
}

TEST_CASE("generate_corpus: deterministic under seed") {
  const auto a = corpus_of(10, 4);
  const auto b = corpus_of(10, 4);
  const auto other = corpus_of(10, 5);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(a.utterances[i].target_text == b.utterances[i].target_text);
    CHECK(a.f0[i] == b.f0[i]);
    const auto x = a.utterances[i].audio->samples();
    const auto y = b.utterances[i].audio->samples();
    CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
    any_difference |= a.utterances[i].target_text != other.utterances[i].target_text;
  }
  CHECK(any_difference);
}

TEST_CASE("SynthSpec: invalid specs") {
  auto code = [](const synth::SynthSpec& s) {
    try {
      s.validate();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  synth::SynthSpec s;
  CHECK_NOTHROW(s.validate());
  s.n_utterances = 0;
  CHECK(code(s) == Errc::InvalidSpec);
  s = {};
  s.gender_split = 1.0;
  CHECK(code(s) == Errc::InvalidSpec);
  s = {};
  s.grammar.gendered.clear();
  CHECK(code(s) == Errc::InvalidSpec);
  s = {};
  s.grammar.min_gendered = 4;
  CHECK(code(s) == Errc::InvalidSpec);
  s = {};
  s.f0_masculine = {300.0, 20.0};
  CHECK(code(s) == Errc::InvalidSpec);
  s = {};
  s.grammar.neutral.push_back({"tired", "x", "x"});
  CHECK(code(s) == Errc::InvalidSpec);
}

TEST_CASE("write_corpus: manifest, eval TSV and wav files") {
  voxtag::testing::TempDir dir("synth");
  const auto c = corpus_of(6, 6);
  synth::write_corpus(c, dir.path());
  const auto m = read_manifest(dir / "manifest.tsv");
  const auto e = read_eval_tsv(dir / "eval.tsv");
  REQUIRE(m.size() == 6);
  REQUIRE(e.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(m[i].id == c.utterances[i].id);
    CHECK(m[i].gender == c.utterances[i].gender);
    CHECK(m[i].target_text == c.utterances[i].target_text);
    const auto w = m[i].load_audio(dir.path());
    CHECK(w.size() == c.utterances[i].audio->size());
    CHECK(e[i].reference == c.entries[i].reference);
    CHECK(e[i].wrong_reference == c.entries[i].wrong_reference);
    REQUIRE(e[i].term_pairs.size() == c.entries[i].term_pairs.size());
  }
}
