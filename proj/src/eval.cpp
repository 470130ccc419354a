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

#include "voxtag/eval.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <set>

#include "json.hpp"
#include "voxtag/error.hpp"

namespace voxtag::eval {

namespace {

constexpr std::size_t kMaxOrder = 4;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    ++out[std::vector<std::string>(t.begin() + static_cast<long>(i),
                                   t.begin() + static_cast<long>(i + n))];
  }
  return out;
}

nlohmann::ordered_json accuracy_json(const GenderAccuracyReport& r) {
  nlohmann::ordered_json j;
  j["total_terms"] = r.total_terms;
  j["found"] = r.found;
  j["correct"] = r.correct;
  j["accuracy"] = r.accuracy ? nlohmann::ordered_json(*r.accuracy) : nullptr;
  j["coverage"] = r.coverage;
  return j;
}

}  // namespace

GenderAccuracyReport gender_accuracy(const std::map<std::string, Tokens>& hypotheses,
                                     std::span<const GenderEvalEntry> entries) {
  GenderAccuracyReport r;
  for (const auto& e : entries) {
    const auto it = hypotheses.find(e.id);
    if (it == hypotheses.end()) throw Error(Errc::MissingHypothesis, "no hypothesis for '" + e.id + "'");
    std::set<std::string, std::less<>> hyp;
    for (const auto& t : it->second) hyp.insert(lower(t));
    for (const auto& pair : e.term_pairs) {
      ++r.total_terms;
      if (hyp.contains(lower(pair.correct))) {
        ++r.found;
        ++r.correct;
      } else if (hyp.contains(lower(pair.wrong))) {
        ++r.found;
      }
    }
  }
  if (r.found > 0) r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.found);
  if (r.total_terms > 0) {
    r.coverage = static_cast<double>(r.found) / static_cast<double>(r.total_terms);
  }
  return r;
}

double corpus_bleu(std::span<const Tokens> hypotheses, std::span<const Tokens> references) {
  if (hypotheses.size() != references.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(hypotheses.size()) + " hypotheses vs " +
                                          std::to_string(references.size()) + " references");
  }
  std::array<std::size_t, kMaxOrder> matches{};
  std::array<std::size_t, kMaxOrder> totals{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const Tokens& h = hypotheses[s];
    const Tokens& ref = references[s];
    if (ref.empty()) throw Error(Errc::InvalidArgument, "reference " + std::to_string(s) + " is empty");
    hyp_len += h.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      const auto hc = ngram_counts(h, n);
      const auto rc = ngram_counts(ref, n);
      for (const auto& [gram, count] : hc) {
        const auto it = rc.find(gram);
        if (it != rc.end()) matches[n - 1] += std::min(count, it->second);
      }
      if (h.size() >= n) totals[n - 1] += h.size() - n + 1;
    }
  }
  if (hyp_len == 0) return 0.0;

  double log_sum = 0.0;
  double smooth = 1.0;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    if (totals[n] == 0) return 0.0;
    double p;
    if (matches[n] == 0) {
      smooth *= 2.0;
      p = 1.0 / (smooth * static_cast<double>(totals[n]));
    } else {
      p = static_cast<double>(matches[n]) / static_cast<double>(totals[n]);
    }
    log_sum += std::log(p);
  }
  const double bp = hyp_len < ref_len
                        ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
                        : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(kMaxOrder));
}

std::string_view to_string(Bucket b) noexcept {
  switch (b) {
    case Bucket::F: return "1F";
    case Bucket::M: return "1M";
    case Bucket::FTagM: return "1F-Tag M";
    case Bucket::MTagF: return "1M-Tag F";
  }
  return "?";
}

const BucketReport& TagInversionReport::at(Bucket b) const {
  for (const auto& r : buckets) {
    if (r.bucket == b) return r;
  }
  throw Error(Errc::InvalidArgument, "bucket missing from report");
}

namespace {

TagInversionReport decode_and_score(const model::Seq2Seq& m, std::span<const Utterance> corpus,
                                    std::span<const dsp::FeatureMatrix> features,
                                    std::span<const GenderEvalEntry> entries, bool with_inverted) {
  if (features.size() != corpus.size()) {
    throw Error(Errc::ShapeMismatch, "one feature matrix per utterance expected");
  }
  std::map<std::string, const GenderEvalEntry*> by_id;
  for (const auto& e : entries) by_id[e.id] = &e;

  struct Acc {
    std::map<std::string, Tokens> hyps;
    std::vector<GenderEvalEntry> entries;
    std::vector<Tokens> hyp_list;
    std::vector<Tokens> ref_list;
  };
  std::map<Bucket, Acc> acc;
  std::vector<Tokens> matched_hyps;
  std::vector<Tokens> matched_refs;

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Utterance& u = corpus[i];
    const auto it = by_id.find(u.id);
    if (it == by_id.end()) throw Error(Errc::MissingHypothesis, "no eval entry for '" + u.id + "'");
    const GenderEvalEntry& entry = *it->second;
    const bool female = u.gender == perturb::SpeakerGender::F;
    const ad::Tensor enc = m.encode(features[i]);
    for (bool inverted : {false, true}) {
      if (inverted && !with_inverted) break;
      const auto tag_gender = female != inverted ? perturb::SpeakerGender::F : perturb::SpeakerGender::M;
      const auto ids = m.greedy_decode(enc, model::start_token(m.config().mode, tag_gender));
      Tokens hyp = model::split_whitespace(m.vocab().decode(ids));
      const Bucket b = inverted ? (female ? Bucket::FTagM : Bucket::MTagF)
                                : (female ? Bucket::F : Bucket::M);
      GenderEvalEntry scored = inverted ? entry.swapped() : entry;
      Acc& a = acc[b];
      a.hyps[u.id] = hyp;
      a.hyp_list.push_back(hyp);
      a.ref_list.push_back(scored.reference);
      a.entries.push_back(std::move(scored));
      if (!inverted) {
        matched_hyps.push_back(std::move(hyp));
        matched_refs.push_back(entry.reference);
      }
    }
  }

  TagInversionReport r;
  for (Bucket b : kBuckets) {
    if (!with_inverted && (b == Bucket::FTagM || b == Bucket::MTagF)) continue;
    BucketReport br;
    br.bucket = b;
    const auto it = acc.find(b);
    if (it != acc.end()) {
      br.accuracy = gender_accuracy(it->second.hyps, it->second.entries);
      br.bleu = corpus_bleu(it->second.hyp_list, it->second.ref_list);
      br.utterances = it->second.entries.size();
    }
    r.buckets.push_back(br);
  }
  if (!matched_hyps.empty()) r.bleu = corpus_bleu(matched_hyps, matched_refs);
  return r;
}

}  // namespace

TagInversionReport tag_inversion_eval(const model::Seq2Seq& m, std::span<const Utterance> corpus,
                                      std::span<const dsp::FeatureMatrix> features,
                                      std::span<const GenderEvalEntry> entries) {
  if (m.config().mode != model::Mode::MultiGender) {
    throw Error(Errc::WrongMode, "tag inversion needs a multi_gender model, got " +
                                     std::string(model::to_string(m.config().mode)));
  }
  return decode_and_score(m, corpus, features, entries, true);
}

TagInversionReport matched_eval(const model::Seq2Seq& m, std::span<const Utterance> corpus,
                                std::span<const dsp::FeatureMatrix> features,
                                std::span<const GenderEvalEntry> entries) {
  return decode_and_score(m, corpus, features, entries, false);
}

std::string to_json(const TagInversionReport& r) {
  nlohmann::ordered_json j;
  j["bleu"] = r.bleu;
  nlohmann::ordered_json buckets = nlohmann::ordered_json::object();
  for (const auto& b : r.buckets) {
    nlohmann::ordered_json bj = accuracy_json(b.accuracy);
    bj["bleu"] = b.bleu;
    bj["utterances"] = b.utterances;
    buckets[std::string(to_string(b.bucket))] = bj;
  }
  j["buckets"] = buckets;
  return j.dump(2) + "\n";
}

}  // namespace voxtag::eval
