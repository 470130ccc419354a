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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxtag/audio.hpp"
#include "voxtag/corpus.hpp"
#include "voxtag/perturb.hpp"

namespace voxtag::synth {

/// A source word and its target realization. Gendered entries have distinct
/// feminine and masculine forms; neutral ones repeat the same form.
struct GrammarEntry {
  std::string source;
  std::string feminine;
  std::string masculine;

  bool gendered() const noexcept { return feminine != masculine; }
  const std::string& form(perturb::SpeakerGender g) const noexcept {
    return g == perturb::SpeakerGender::F ? feminine : masculine;
  }
};

struct Grammar {
  std::vector<GrammarEntry> neutral;
  std::vector<GrammarEntry> gendered;
  std::size_t min_length = 5;
  std::size_t max_length = 12;
  std::size_t min_gendered = 1;
  std::size_t max_gendered = 3;

  /// About 50 target tokens with Italian-like gender agreement.
  static Grammar standard();
  /// Throws InvalidSpec.
  void validate() const;
};

struct SynthSpec {
  std::size_t n_utterances = 200;
  double gender_split = 0.3;  ///< proportion of F speakers
  Grammar grammar = Grammar::standard();
  perturb::NormalTarget f0_feminine{250.0, 17.0};
  perturb::NormalTarget f0_masculine{140.0, 20.0};
  /// Draws are truncated at 3 sigma and kept at least 3% away from this
  /// threshold, on the speaker's side, so the f0 median separates genders.
  double gender_threshold_hz = 170.0;
  std::vector<audio::FormantPeak> formants_feminine{{800.0, 1.0}, {1150.0, 0.6}};
  std::vector<audio::FormantPeak> formants_masculine{{650.0, 1.0}, {950.0, 0.6}};
  int sample_rate = audio::kDefaultSampleRate;
  std::uint64_t seed = 0;

  /// Throws InvalidSpec.
  void validate() const;
};

struct Corpus {
  std::vector<Utterance> utterances;  ///< audio held in memory
  std::vector<GenderEvalEntry> entries;
  std::vector<double> f0;  ///< generating f0 per utterance
};

/// Each source word becomes a voiced vowel at the speaker's f0 and formants
/// followed by a noise burst whose two bands identify the word. Targets
/// realize gendered slots in the speaker's gender. Deterministic under seed.
Corpus generate_corpus(const SynthSpec& spec);

/// Writes `dir`/wav/<id>.wav, `dir`/manifest.tsv and `dir`/eval.tsv. The
/// manifest's wav paths are relative to `dir`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace voxtag::synth
