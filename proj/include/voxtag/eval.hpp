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

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxtag/corpus.hpp"
#include "voxtag/dsp.hpp"
#include "voxtag/model.hpp"

namespace voxtag::eval {

using Tokens = std::vector<std::string>;

struct GenderAccuracyReport {
  std::size_t total_terms = 0;
  std::size_t found = 0;
  std::size_t correct = 0;
  /// correct / found; absent when nothing was found.
  std::optional<double> accuracy;
  /// found / total_terms.
  double coverage = 0.0;
};

/// Per term pair: the correct form anywhere in the hypothesis counts as found
/// and correct, else the wrong form counts as found. Matching is whole-token
/// and case-insensitive. Throws MissingHypothesis.
GenderAccuracyReport gender_accuracy(const std::map<std::string, Tokens>& hypotheses,
                                     std::span<const GenderEvalEntry> entries);

/// Up to 4-gram BLEU on whitespace tokens with exponential smoothing for
/// zero n-gram matches, in [0, 100]. Throws LengthMismatch, InvalidArgument
/// for an empty reference.
double corpus_bleu(std::span<const Tokens> hypotheses, std::span<const Tokens> references);

enum class Bucket { F, M, FTagM, MTagF };

inline constexpr Bucket kBuckets[] = {Bucket::F, Bucket::M, Bucket::FTagM, Bucket::MTagF};

/// "1F", "1M", "1F-Tag M", "1M-Tag F".
std::string_view to_string(Bucket b) noexcept;

struct BucketReport {
  Bucket bucket = Bucket::F;
  GenderAccuracyReport accuracy;
  /// Against the reference the tag asks for.
  double bleu = 0.0;
  std::size_t utterances = 0;
};

struct TagInversionReport {
  std::vector<BucketReport> buckets;  ///< in kBuckets order, evaluated ones only
  /// Matched-tag hypotheses against the references.
  double bleu = 0.0;

  const BucketReport& at(Bucket b) const;
};

/// Greedy-decodes every utterance with its speaker's tag and with the
/// opposite tag. Inverted runs are scored against the swapped entry (the
/// tag defines correctness). Throws WrongMode unless the model is
/// multi-gender, MissingHypothesis when an utterance has no entry.
TagInversionReport tag_inversion_eval(const model::Seq2Seq& m, std::span<const Utterance> corpus,
                                      std::span<const dsp::FeatureMatrix> features,
                                      std::span<const GenderEvalEntry> entries);

/// Greedy-decodes every utterance from the model's own start token and
/// reports the 1F and 1M buckets only. For gender-unaware and specialized
/// models. Throws MissingHypothesis when an utterance has no entry.
TagInversionReport matched_eval(const model::Seq2Seq& m, std::span<const Utterance> corpus,
                                std::span<const dsp::FeatureMatrix> features,
                                std::span<const GenderEvalEntry> entries);

/// Pretty-printed JSON with per-bucket accuracy, coverage, term counts and BLEU.
std::string to_json(const TagInversionReport& r);

}  // namespace voxtag::eval
