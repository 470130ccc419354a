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
#include <cmath>
#include <string>
#include <map>
#include <vector>

#include "doctest.h"
#include "metric_cases.hpp"
#include "model_fixtures.hpp"
#include "json.hpp"
#include "voxtag/error.hpp"
#include "voxtag/eval.hpp"

using namespace voxtag;
using eval::Tokens;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Io;
}

}  // namespace

TEST_CASE("gender_accuracy: hand-counted cases") {
  for (const auto& c : voxtag::testing::accuracy_cases()) {
    CAPTURE(c.name);
    const auto r = eval::gender_accuracy(c.hypotheses, c.entries);
    CHECK(r.total_terms == c.total);
    CHECK(r.found == c.found);
    CHECK(r.correct == c.correct);
    if (c.found == 0) {
      CHECK_FALSE(r.accuracy.has_value());
    } else {
      REQUIRE(r.accuracy.has_value());
      CHECK(*r.accuracy == static_cast<double>(c.correct) / static_cast<double>(c.found));
    }
    CHECK(r.coverage == static_cast<double>(c.found) / static_cast<double>(c.total));
  }
  const auto first = voxtag::testing::accuracy_cases().front();
  const auto r = eval::gender_accuracy(first.hypotheses, first.entries);
  CHECK(std::abs(*r.accuracy - 0.6667) < 5e-5);
  CHECK(r.coverage == 0.75);
}

TEST_CASE("gender_accuracy: missing hypothesis") {
  const std::vector<GenderEvalEntry> entries{voxtag::testing::entry("x", {{"stanca", "stanco"}})};
  CHECK(code_of([&] { eval::gender_accuracy({}, entries); }) == Errc::MissingHypothesis);
}

TEST_CASE("gender_accuracy: invariant under permutations of the hypothesis") {
  Rng rng(3);
  for (const auto& c : voxtag::testing::accuracy_cases()) {
    const auto base = eval::gender_accuracy(c.hypotheses, c.entries);
    for (int t = 0; t < 5; ++t) {
      auto shuffled = c.hypotheses;
      for (auto& [id, h] : shuffled) {
        h.push_back("filler");
        std::shuffle(h.begin(), h.end(), rng);
      }
      const auto r = eval::gender_accuracy(shuffled, c.entries);
      CHECK(r.found == base.found);
      CHECK(r.correct == base.correct);
    }
  }
}

TEST_CASE("corpus_bleu: hand-computed two-sentence case") {
  const voxtag::testing::BleuCase c;
  const double bleu = eval::corpus_bleu(c.hypotheses, c.references);
  CHECK(std::abs(bleu - voxtag::testing::BleuCase::by_hand()) <= 1e-6);
  CHECK(std::abs(bleu - voxtag::testing::kSacrebleuReference) <= 1e-6);
}

TEST_CASE("corpus_bleu: identity, no overlap and errors") {
  const std::vector<Tokens> h{{"a", "b", "c", "d", "e"}, {"io", "sono", "qui"}};
  CHECK(eval::corpus_bleu(h, h) == doctest::Approx(100.0).epsilon(1e-12));
  const std::vector<Tokens> one{{"x"}};
  CHECK(eval::corpus_bleu(one, one) == 0.0);
  // With exponential smoothing a zero-overlap score is 100 * prod_n
  // (2^n * total_n)^(-1/4); it drops below 1 once the corpus has 20 or more
  // hypothesis tokens.
  const std::vector<Tokens> short_hyp{{"x", "y", "z", "w"}};
  const std::vector<Tokens> ref{{"a", "b", "c", "d"}};
  const double short_none = eval::corpus_bleu(short_hyp, ref);
  CHECK(short_none > 0.0);
  CHECK(short_none == doctest::Approx(100.0 * std::pow(8.0 * 12.0 * 16.0 * 16.0, -0.25)).epsilon(1e-12));
  std::vector<Tokens> hyp(2), refs(2);
  for (int s = 0; s < 2; ++s) {
    for (int k = 0; k < 12; ++k) {
      hyp[s].push_back("h" + std::to_string(k));
      refs[s].push_back("r" + std::to_string(k));
    }
  }
  const double none = eval::corpus_bleu(hyp, refs);
  CHECK(none > 0.0);
  CHECK(none < 1.0);
  CHECK(code_of([&] { eval::corpus_bleu(h, ref); }) == Errc::LengthMismatch);
  const std::vector<Tokens> empty_ref{{}};
  CHECK(code_of([&] { eval::corpus_bleu(one, empty_ref); }) == Errc::InvalidArgument);
}

TEST_CASE("corpus_bleu: replacing a matching unigram never raises the score") {
  Rng rng(12);
  const std::vector<std::string> pool{"a", "b", "c", "d", "e", "f"};
  for (int t = 0; t < 100; ++t) {
    Tokens ref(4 + rng() % 6);
    for (auto& w : ref) w = pool[rng() % pool.size()];
    Tokens hyp = ref;
    for (std::size_t k = 0; k < hyp.size(); ++k) {
      if (rng() % 3 == 0) hyp[k] = pool[rng() % pool.size()];
    }
    const std::size_t pos = rng() % hyp.size();
    if (std::find(ref.begin(), ref.end(), hyp[pos]) == ref.end()) continue;
    Tokens worse = hyp;
    worse[pos] = "zzz";
    const std::vector<Tokens> r{ref}, a{hyp}, b{worse};
    CHECK(eval::corpus_bleu(b, r) <= eval::corpus_bleu(a, r) + 1e-12);
  }
}

TEST_CASE("tag inversion protocol: oracle and anti-oracle hypotheses") {
  // An oracle follows the tag, so inverted runs reproduce the swapped
  // reference; an anti-oracle follows the voice and ignores the tag.
  std::vector<GenderEvalEntry> entries{
      voxtag::testing::entry("f1", {{"stanca", "stanco"}, {"pronta", "pronto"}}),
      voxtag::testing::entry("m1", {{"nato", "nata"}})};
  std::vector<GenderEvalEntry> swapped;
  for (const auto& e : entries) swapped.push_back(e.swapped());
  std::map<std::string, Tokens> matched, oracle_inverted, anti_inverted;
  for (const auto& e : entries) matched[e.id] = e.reference;
  for (const auto& e : swapped) oracle_inverted[e.id] = e.reference;
  anti_inverted = matched;
  CHECK(*eval::gender_accuracy(matched, entries).accuracy == 1.0);
  CHECK(*eval::gender_accuracy(oracle_inverted, swapped).accuracy == 1.0);
  CHECK(*eval::gender_accuracy(anti_inverted, swapped).accuracy == 0.0);
  CHECK(swapped[0].swapped().term_pairs[0].correct == "stanca");
}

TEST_CASE("tag_inversion_eval: modes, buckets and report") {
  Rng rng(2);
  const model::Seq2Seq multi(voxtag::testing::micro_config(), voxtag::testing::micro_vocab(), 3);
  auto unaware_cfg = voxtag::testing::micro_config();
  unaware_cfg.mode = model::Mode::GenderUnaware;
  const model::Seq2Seq unaware(unaware_cfg, voxtag::testing::micro_vocab(), 3);

  std::vector<Utterance> utts(3);
  utts[0].id = "a";
  utts[0].gender = perturb::SpeakerGender::F;
  utts[1].id = "b";
  utts[1].gender = perturb::SpeakerGender::M;
  utts[2].id = "c";
  utts[2].gender = perturb::SpeakerGender::F;
  const std::vector<dsp::FeatureMatrix> feats{voxtag::testing::random_features(12, rng),
                                              voxtag::testing::random_features(8, rng),
                                              voxtag::testing::random_features(10, rng)};
  const std::vector<GenderEvalEntry> entries{voxtag::testing::entry("a", {{"stanca", "stanco"}}),
                                             voxtag::testing::entry("b", {{"stanco", "stanca"}}),
                                             voxtag::testing::entry("c", {{"stanca", "stanco"}})};

  CHECK(code_of([&] { eval::tag_inversion_eval(unaware, utts, feats, entries); }) == Errc::WrongMode);
  const auto r = eval::tag_inversion_eval(multi, utts, feats, entries);
  REQUIRE(r.buckets.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.buckets[i].bucket == eval::kBuckets[i]);
  CHECK(r.at(eval::Bucket::F).utterances == 2);
  CHECK(r.at(eval::Bucket::MTagF).utterances == 1);
  const auto again = eval::tag_inversion_eval(multi, utts, feats, entries);
  CHECK(eval::to_json(r) == eval::to_json(again));

  const auto m = eval::matched_eval(unaware, utts, feats, entries);
  CHECK(m.buckets.size() == 2);
  CHECK_THROWS_AS(m.at(eval::Bucket::FTagM), Error);

  const auto j = nlohmann::json::parse(eval::to_json(r));
  CHECK(j["buckets"].contains("1F-Tag M"));
  CHECK(j["buckets"]["1F"]["utterances"] == 2);

  const std::vector<GenderEvalEntry> partial{entries[0]};
  CHECK(code_of([&] { eval::tag_inversion_eval(multi, utts, feats, partial); }) == Errc::MissingHypothesis);
}
