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
#include <filesystem>
#include <span>
#include <vector>

#include "voxtag/audio.hpp"

namespace voxtag::dsp {

/// Per-frame f0 track; 0.0 marks an unvoiced frame.
struct F0Contour {
  std::vector<double> frame_hz;
  std::size_t hop = 0;
  std::size_t frame_len = 0;
  int sample_rate = audio::kDefaultSampleRate;

  std::size_t voiced_count() const noexcept;
  /// Centre sample of frame `i`.
  double frame_center(std::size_t i) const noexcept {
    return static_cast<double>(i * hop) + 0.5 * static_cast<double>(frame_len);
  }
};

struct PitchOptions {
  double min_hz = 50.0;
  double max_hz = 500.0;
  double voicing_threshold = 0.3;
  double rms_gate = 1e-4;
  /// Score penalty per octave of lag above the shortest lag. Among peaks of
  /// near-equal height the shorter lag wins, so period multiples lose.
  double octave_cost = 0.01;
};

/// Two periods of the lowest trackable f0.
std::size_t default_pitch_frame_len(int sample_rate, const PitchOptions& opts = {});
/// 10 ms.
std::size_t default_pitch_hop(int sample_rate);

/// Normalized autocorrelation pitch tracker with parabolic peak refinement.
/// Throws TooShort when the waveform is shorter than one frame and
/// InvalidArgument when the frame cannot hold two periods of `min_hz`.
F0Contour estimate_f0_contour(const audio::Waveform& w, std::size_t frame_len, std::size_t hop,
                              const PitchOptions& opts = {});
F0Contour estimate_f0_contour(const audio::Waveform& w, const PitchOptions& opts = {});

/// Median over voiced frames; mean of the two central values for even
/// counts. Throws AllUnvoiced.
double voiced_median(const F0Contour& contour);
double voiced_median(std::span<const double> frame_hz);

inline constexpr std::size_t kMelBins = 80;

/// T x 80 log-mel energies, row-major.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::vector<double> values;
  bool normalized = false;

  static constexpr std::size_t cols() noexcept { return kMelBins; }
  std::span<const double> row(std::size_t t) const {
    return {values.data() + t * kMelBins, kMelBins};
  }
  std::span<double> row(std::size_t t) { return {values.data() + t * kMelBins, kMelBins}; }
  double at(std::size_t t, std::size_t c) const { return values[t * kMelBins + c]; }
};

struct MelOptions {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  double low_hz = 20.0;
  double log_floor = 1e-10;
};

/// 25 ms Hann windows every 10 ms, power spectrum, 80 triangular mel
/// filters from 20 Hz to Nyquist, natural log. Optionally applies
/// per-utterance CMVN. Throws TooShort below one window.
FeatureMatrix logmel_features(const audio::Waveform& w, bool apply_cmvn,
                              const MelOptions& opts = {});

/// Per-utterance, per-coefficient standardization. Columns with (near) zero
/// variance are only mean-centred.
FeatureMatrix cmvn(FeatureMatrix m);

/// Corpus-level CMVN statistics, accumulated over many utterances.
class CmvnStats {
 public:
  void accumulate(const FeatureMatrix& m);
  std::size_t count() const noexcept { return count_; }
  std::vector<double> mean() const;
  std::vector<double> stddev() const;
  FeatureMatrix apply(FeatureMatrix m) const;

  /// Restores previously computed statistics.
  static CmvnStats from_moments(std::vector<double> mean, std::vector<double> stddev);

 private:
  std::vector<double> sum_ = std::vector<double>(kMelBins, 0.0);
  std::vector<double> sum_sq_ = std::vector<double>(kMelBins, 0.0);
  std::size_t count_ = 0;
};

/// Little-endian "VXFT", u32 T, u32 80, then T*80 float32 row-major.
void write_features(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_features(const std::filesystem::path& path);

/// Frequency of the spectral-envelope maximum within [lo_hz, hi_hz].
///
/// Harmonic amplitudes are measured on a long-window averaged spectrum,
/// and a parabola through the log-amplitudes of the strongest harmonic and
/// its neighbours locates the envelope peak between harmonics. Needs voiced
/// input; throws AllUnvoiced otherwise.
double envelope_peak_hz(const audio::Waveform& w, double lo_hz, double hi_hz);

}  // namespace voxtag::dsp
