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


// Hand-counted gender accuracy cases and a hand-computed BLEU example,
// shared by the eval tests and the acceptance runner.

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "voxtag/corpus.hpp"
#include "voxtag/eval.hpp"

namespace voxtag::testing {

struct AccuracyCase {
  std::string name;
  std::map<std::string, eval::Tokens> hypotheses;
  std::vector<GenderEvalEntry> entries;
  std::size_t total = 0;
  std::size_t found = 0;
  std::size_t correct = 0;
};

inline GenderEvalEntry entry(std::string id, std::vector<TermPair> pairs) {
  GenderEvalEntry e;
  e.id = std::move(id);
  for (const auto& p : pairs) {
    e.reference.push_back(p.correct);
    e.wrong_reference.push_back(p.wrong);
  }
  e.term_pairs = std::move(pairs);
  return e;
}

inline AccuracyCase single(std::string name, eval::Tokens hyp, std::vector<TermPair> pairs,
                           std::size_t found, std::size_t correct) {
  const std::size_t total = pairs.size();
  return {std::move(name), {{"c", std::move(hyp)}}, {entry("c", std::move(pairs))}, total, found, correct};
}

inline std::vector<AccuracyCase> accuracy_cases() {
  std::vector<AccuracyCase> cases{
      single("two correct, one wrong, one missing",
             {"io", "sono", "stanca", "e", "pronta", "ma", "nato", "qui"},
             {{"stanca", "stanco"}, {"pronta", "pronto"}, {"nata", "nato"}, {"sola", "solo"}}, 3, 2),
      single("hypothesis equals reference", {"io", "sono", "stanca"}, {{"stanca", "stanco"}}, 1, 1),
      single("neither form", {"io", "sono", "qui"}, {{"stanca", "stanco"}}, 0, 0),
      single("case-insensitive", {"STANCA"}, {{"stanca", "stanco"}}, 1, 1),
      single("wrong form only", {"stanco"}, {{"stanca", "stanco"}}, 1, 0),
      single("both forms present", {"stanca", "stanco"}, {{"stanca", "stanco"}}, 1, 1),
      single("whole tokens only", {"stancabile", "stancoso"}, {{"stanca", "stanco"}}, 0, 0),
      single("repeated pair", {"stanca"}, {{"stanca", "stanco"}, {"stanca", "stanco"}}, 2, 2),
      single("empty hypothesis", {}, {{"nata", "nato"}, {"sola", "solo"}}, 0, 0),
      single("all wrong of three", {"contento", "sicuro"},
             {{"contenta", "contento"}, {"sicura", "sicuro"}, {"calma", "calmo"}}, 2, 0),
      single("both pairs correct among noise", {"calma", "calmo", "sola"}, {{"calma", "calmo"}, {"sola", "solo"}},
             2, 2),
      single("masculine speaker, mixed case", {"Nata", "e", "Nato"}, {{"nato", "nata"}}, 1, 1),
      single("two of three", {"andato", "arrivata", "occupata"},
             {{"andata", "andato"}, {"arrivata", "arrivato"}, {"occupata", "occupato"}}, 3, 2),
      single("no overlap with three pairs", {"x", "y", "z"},
             {{"pronta", "pronto"}, {"nata", "nato"}, {"sola", "solo"}}, 0, 0),
      single("repeated wrong form", {"convinto", "convinto", "convinto"}, {{"convinta", "convinto"}}, 1, 0),
      single("one of two found", {"dispiaciuta"}, {{"dispiaciuta", "dispiaciuto"}, {"sicura", "sicuro"}}, 1, 1),
      single("punctuation breaks the token", {"sicuro,", "stanca"}, {{"sicura", "sicuro"}, {"stanca", "stanco"}},
             1, 1),
      single("correct before wrong in order", {"pronto", "pronta"}, {{"pronto", "pronta"}}, 1, 1),
      single("masculine pair answered feminine", {"sola"}, {{"solo", "sola"}}, 1, 0),
  };
  AccuracyCase multi{"two entries pooled", {{"a", {"stanco"}}, {"b", {"nata", "sola"}}},
                     {entry("a", {{"stanca", "stanco"}}), entry("b", {{"nata", "nato"}, {"sola", "solo"}})},
                     3, 3, 2};
  cases.push_back(std::move(multi));
  return cases;
}

/// Two sentences whose clipped n-gram counts are 8/9, 5/7, 2/5 and 0/3 (the
/// last smoothed to 1/(2*3)), with hypothesis length 9 against reference
/// length 10.
struct BleuCase {
  std::vector<eval::Tokens> hypotheses{{"the", "cat", "sat", "on", "the", "mat"}, {"a", "dog", "runs"}};
  std::vector<eval::Tokens> references{{"the", "cat", "is", "on", "the", "mat"}, {"a", "dog", "runs", "fast"}};

  static double by_hand() {
    const double p = (8.0 / 9.0) * (5.0 / 7.0) * (2.0 / 5.0) * (1.0 / 6.0);
    return 100.0 * std::exp(1.0 - 10.0 / 9.0) * std::pow(p, 0.25);
  }
};

/// The same case scored by sacrebleu 2.x (tokenize="none", smooth_method="exp").
inline constexpr double kSacrebleuReference = 40.58841603380763;

}  // namespace voxtag::testing
