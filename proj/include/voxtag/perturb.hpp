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
#include <optional>
#include <string_view>

#include "voxtag/audio.hpp"
#include "voxtag/dsp.hpp"
#include "voxtag/rng.hpp"

namespace voxtag::perturb {

enum class SpeakerGender { F, M };

constexpr SpeakerGender opposite(SpeakerGender g) noexcept {
  return g == SpeakerGender::F ? SpeakerGender::M : SpeakerGender::F;
}
std::string_view to_string(SpeakerGender g) noexcept;
/// Accepts "F"/"M" (case-insensitive); throws InvalidArgument otherwise.
SpeakerGender parse_gender(std::string_view s);

struct NormalTarget {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Settings of the "Opposite" manipulation.
struct PerturbConfig {
  double p = 0.5;
  NormalTarget feminine{250.0, 17.0};
  NormalTarget masculine{140.0, 20.0};
  double formant_up = 1.2;
  double formant_down = 0.8;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument when an invariant is broken.
  void validate() const;
};

/// Draw from the target gender's normal, redrawn until within 3 sigma.
double sample_target_median(SpeakerGender target_gender, const PerturbConfig& cfg, Rng& rng);

/// target / source. Throws ZeroSourceMedian when source <= 0.
double compute_alpha(double source_median, double target_median);

/// Scales f0 by `alpha` (TD-PSOLA) and the spectral envelope by
/// `formant_scale`. The envelope stage re-imposes the input's envelope,
/// read at f / formant_scale, on the pitch-shifted harmonics. Unvoiced
/// stretches pass through unchanged. Output has the input's length.
/// Throws OutOfRangeFactor for alpha outside [0.25, 4] or formant_scale
/// outside [0.5, 2], AllUnvoiced when no pitch marks can be placed.
audio::Waveform pitch_formant_shift(const audio::Waveform& w, double alpha, double formant_scale);
/// Same, reusing a contour already estimated on `w` with the default geometry.
audio::Waveform pitch_formant_shift(const audio::Waveform& w, const dsp::F0Contour& contour,
                                    double alpha, double formant_scale);

struct Manipulation {
  audio::Waveform audio;
  bool manipulated = false;
  double alpha = 1.0;
  double formant_scale = 1.0;
  double target_median = 0.0;
};

/// One Bernoulli(p) decision per call. When it fires, the voice is moved to
/// the opposite gender's f0 distribution and formants are scaled up (M->F) or
/// down (F->M); otherwise the input is returned untouched.
Manipulation apply_opposite(const audio::Waveform& w, SpeakerGender speaker_gender,
                            const PerturbConfig& cfg, Rng& rng);

/// Stream for utterance `utterance_index` in `epoch` under `cfg.seed`.
Rng perturb_stream(const PerturbConfig& cfg, std::uint64_t utterance_index, std::uint64_t epoch);

}  // namespace voxtag::perturb
