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

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "voxtag/audio.hpp"
#include "voxtag/perturb.hpp"

// Data records shared by the generator, the trainer and the evaluator, and
// their TSV files.
namespace voxtag {

struct Utterance {
  std::string id;
  std::string wav_path;
  perturb::SpeakerGender gender = perturb::SpeakerGender::M;
  std::string source_text;
  std::string target_text;
  /// Loaded or generated samples; empty until needed.
  std::optional<audio::Waveform> audio;

  /// `audio` if present, else read_wav(wav_path) resolved against `base`.
  audio::Waveform load_audio(const std::filesystem::path& base = {}) const;
};

struct TermPair {
  std::string correct;
  std::string wrong;
};

struct GenderEvalEntry {
  std::string id;
  std::vector<std::string> reference;
  std::vector<std::string> wrong_reference;
  std::vector<TermPair> term_pairs;

  /// Throws InvalidArgument when term_pairs is empty or a pair is degenerate.
  void validate() const;
  /// Same entry scored from the opposite gender's point of view.
  GenderEvalEntry swapped() const;
};

/// Tab-separated, one utterance per line: id, wav_path, gender, source, target.
void write_manifest(const std::vector<Utterance>& utts, const std::filesystem::path& path);
/// Relative wav paths are kept as written; pass the manifest's directory to
/// Utterance::load_audio. Throws MalformedHeader on a bad line.
std::vector<Utterance> read_manifest(const std::filesystem::path& path);

/// Tab-separated: id, reference, wrong_reference, "correct|wrong;..." pairs.
void write_eval_tsv(const std::vector<GenderEvalEntry>& entries, const std::filesystem::path& path);
std::vector<GenderEvalEntry> read_eval_tsv(const std::filesystem::path& path);

}  // namespace voxtag
