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

namespace voxtag::audio {

inline constexpr int kDefaultSampleRate = 16000;

/// Mono PCM audio. Samples are finite reals, nominally in [-1, 1].
/// Immutable once built; processing functions return new waveforms.
class Waveform {
 public:
  Waveform() = default;
  /// Throws InvalidArgument for a non-positive rate or non-finite samples.
  Waveform(std::vector<double> samples, int sample_rate);

  std::span<const double> samples() const noexcept { return samples_; }
  int sample_rate() const noexcept { return sample_rate_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double duration() const noexcept {
    return sample_rate_ > 0 ? static_cast<double>(samples_.size()) / sample_rate_ : 0.0;
  }
  double peak() const noexcept;
  double rms() const noexcept;

 private:
  std::vector<double> samples_;
  int sample_rate_ = kDefaultSampleRate;
};

/// Reads a RIFF/WAVE file holding 16-bit PCM mono. Samples are divided by 32768.
Waveform read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono. Values are clipped to [-1, 1] and mapped with
/// round(x * 32767) so 1.0 lands on 32767.
void write_wav(const Waveform& w, const std::filesystem::path& path);

struct FormantPeak {
  double hz = 0.0;
  double gain = 1.0;
};

/// Sum of cosine harmonics of `f0` up to Nyquist. Each harmonic is weighted by
/// a spectral envelope made of resonance curves gain / (1 + ((f - F) / bw)^2),
/// bw being the half-width at half maximum, centred on the formant peaks;
/// with no peaks the envelope is flat. Output is
/// peak-normalized to 0.9. Throws InvalidF0 outside [50, 500] Hz.
Waveform synth_harmonic(double f0, std::span<const FormantPeak> formant_peaks, double duration,
                        int sample_rate = kDefaultSampleRate, double bandwidth_hz = 150.0);

/// Envelope used by synth_harmonic, exposed for tests and perturbation checks.
double formant_envelope(double hz, std::span<const FormantPeak> formant_peaks,
                        double bandwidth_hz = 150.0);

}  // namespace voxtag::audio
