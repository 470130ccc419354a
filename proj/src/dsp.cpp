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

#include "voxtag/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "binio.hpp"
#include "fft.hpp"
#include "voxtag/error.hpp"

namespace voxtag::dsp {

namespace {

constexpr double kPitchLowpassHz = 2000.0;

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Vertex offset in (-0.5, 0.5) of a parabola through three equally spaced points.
// Hamming-windowed sinc low-pass, zero-phase (centred taps).
std::vector<double> lowpass(std::span<const double> x, int sample_rate, double cutoff_hz) {
  const double fc = cutoff_hz / sample_rate;
  const long half = std::lround(3.3 / (2.0 * fc) / 2.0) | 1;
  std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
  double sum = 0.0;
  for (long k = -half; k <= half; ++k) {
    const double t = static_cast<double>(k);
    const double sinc = k == 0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * t) / (std::numbers::pi * t);
    const double win = 0.54 + 0.46 * std::cos(std::numbers::pi * t / static_cast<double>(half));
    taps[static_cast<std::size_t>(k + half)] = sinc * win;
    sum += sinc * win;
  }
  for (double& t : taps) t /= sum;
  const auto n = static_cast<long>(x.size());
  std::vector<double> y(x.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    const long lo = std::max(-half, -i);
    const long hi = std::min(half, n - 1 - i);
    for (long k = lo; k <= hi; ++k) {
      acc += taps[static_cast<std::size_t>(k + half)] * x[static_cast<std::size_t>(i + k)];
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

double parabolic_offset(double left, double centre, double right) {
  const double denom = left - 2.0 * centre + right;
  if (denom == 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

// Per-frame pitch from normalized autocorrelation. Returns 0 for unvoiced.
double frame_pitch(std::span<const double> frame, int sample_rate, std::size_t lag_min,
                   std::size_t lag_max, const PitchOptions& opts, std::vector<double>& scratch,
                   std::vector<double>& prefix_sq) {
  const std::size_t n = frame.size();
  double mean = 0.0;
  for (double s : frame) mean += s;
  mean /= static_cast<double>(n);
  scratch.resize(n);
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    scratch[i] = frame[i] - mean;
    energy += scratch[i] * scratch[i];
  }
  if (std::sqrt(energy / static_cast<double>(n)) < opts.rms_gate) return 0.0;

  prefix_sq.assign(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix_sq[i + 1] = prefix_sq[i] + scratch[i] * scratch[i];

  // r[j] holds the correlation at lag lag_min - 1 + j.
  const std::size_t first = lag_min - 1;
  const std::size_t last = lag_max + 1;
  std::vector<double> r(last - first + 1, 0.0);
  for (std::size_t lag = first; lag <= last; ++lag) {
    const std::size_t len = n - lag;
    double cross = 0.0;
    const double* a = scratch.data();
    const double* b = scratch.data() + lag;
    for (std::size_t i = 0; i < len; ++i) cross += a[i] * b[i];
    const double e0 = prefix_sq[len];
    const double e1 = prefix_sq[n] - prefix_sq[lag];
    const double denom = std::sqrt(e0 * e1);
    r[lag - first] = denom > 0.0 ? cross / denom : 0.0;
  }

  double best = -1.0;
  for (std::size_t lag = lag_min; lag <= lag_max; ++lag) best = std::max(best, r[lag - first]);
  if (best < opts.voicing_threshold) return 0.0;

  // Parabolic refinement of every local maximum, then the best
  // octave-penalized score.
  double best_score = -1e300;
  double best_value = 0.0;
  double best_lag = 0.0;
  for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
    const double left = r[lag - first - 1];
    const double centre = r[lag - first];
    const double right = r[lag - first + 1];
    if (centre < left || centre < right || centre <= 0.0) continue;
    const double delta = parabolic_offset(left, centre, right);
    const double value = centre - 0.25 * (left - right) * delta;
    const double refined = static_cast<double>(lag) + delta;
    const double score =
        value - opts.octave_cost * std::log2(refined / static_cast<double>(lag_min));
    if (score > best_score) {
      best_score = score;
      best_value = value;
      best_lag = refined;
    }
  }
  if (best_lag <= 0.0 || best_value < opts.voicing_threshold) return 0.0;
  // Refinement may step slightly past the range ends; 1% is kept and clamped.
  const double hz = sample_rate / best_lag;
  if (hz < 0.99 * opts.min_hz || hz > 1.01 * opts.max_hz) return 0.0;
  return std::clamp(hz, opts.min_hz, opts.max_hz);
}

struct MelFilterbank {
  std::size_t fft_size;
  // Per filter: first bin and weights.
  std::vector<std::size_t> start;
  std::vector<std::vector<double>> weights;
};

MelFilterbank make_filterbank(int sample_rate, std::size_t fft_size, double low_hz) {
  MelFilterbank fb{fft_size, {}, {}};
  const double nyquist = 0.5 * sample_rate;
  const double mel_lo = hz_to_mel(low_hz);
  const double mel_hi = hz_to_mel(nyquist);
  std::vector<double> edges(kMelBins + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(kMelBins + 1));
  }
  const std::size_t bins = fft_size / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size);
  for (std::size_t m = 0; m < kMelBins; ++m) {
    const double lo = edges[m];
    const double centre = edges[m + 1];
    const double hi = edges[m + 2];
    std::size_t first = bins;
    std::vector<double> w;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double v = 0.0;
      if (f > lo && f <= centre) {
        v = (f - lo) / (centre - lo);
      } else if (f > centre && f < hi) {
        v = (hi - f) / (hi - centre);
      }
      if (v > 0.0) {
        if (first == bins) first = k;
        w.resize(k - first + 1, 0.0);
        w[k - first] = v;
      }
    }
    fb.start.push_back(first == bins ? 0 : first);
    fb.weights.push_back(std::move(w));
  }
  return fb;
}

}  // namespace

std::size_t F0Contour::voiced_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(frame_hz.begin(), frame_hz.end(), [](double v) { return v > 0.0; }));
}

std::size_t default_pitch_frame_len(int sample_rate, const PitchOptions& opts) {
  return static_cast<std::size_t>(std::ceil(2.0 * sample_rate / opts.min_hz));
}

std::size_t default_pitch_hop(int sample_rate) {
  return static_cast<std::size_t>(std::lround(0.01 * sample_rate));
}

F0Contour estimate_f0_contour(const audio::Waveform& w, std::size_t frame_len, std::size_t hop,
                              const PitchOptions& opts) {
  const int sr = w.sample_rate();
  if (hop == 0) throw Error(Errc::InvalidArgument, "hop must be positive");
  if (static_cast<double>(frame_len) < 2.0 * sr / opts.min_hz - 1e-9) {
    throw Error(Errc::InvalidArgument, "frame must span two periods of the lowest f0");
  }
  if (w.size() < frame_len) throw Error(Errc::TooShort, "waveform shorter than one frame");

  const auto lag_min = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::floor(sr / opts.max_hz)));
  const auto lag_max = static_cast<std::size_t>(std::ceil(sr / opts.min_hz));

  F0Contour contour;
  contour.hop = hop;
  contour.frame_len = frame_len;
  contour.sample_rate = sr;
  const std::size_t frames = (w.size() - frame_len) / hop + 1;
  contour.frame_hz.resize(frames);
  std::vector<double> scratch;
  std::vector<double> prefix_sq;
  // Band-limiting broadens the autocorrelation peaks, so parabolic
  // refinement stays accurate for sharp pulse-like waveforms.
  const std::vector<double> filtered = lowpass(w.samples(), sr, kPitchLowpassHz);
  const std::span<const double> samples = filtered;
  for (std::size_t f = 0; f < frames; ++f) {
    contour.frame_hz[f] = frame_pitch(samples.subspan(f * hop, frame_len), sr, lag_min,
                                      std::min(lag_max, frame_len - 2), opts, scratch, prefix_sq);
  }
  return contour;
}

F0Contour estimate_f0_contour(const audio::Waveform& w, const PitchOptions& opts) {
  return estimate_f0_contour(w, default_pitch_frame_len(w.sample_rate(), opts),
                             default_pitch_hop(w.sample_rate()), opts);
}

double voiced_median(std::span<const double> frame_hz) {
  std::vector<double> voiced;
  for (double v : frame_hz) {
    if (v > 0.0) voiced.push_back(v);
  }
  if (voiced.empty()) throw Error(Errc::AllUnvoiced, "no voiced frames");
  std::sort(voiced.begin(), voiced.end());
  const std::size_t n = voiced.size();
  if (n % 2 == 1) return voiced[n / 2];
  return 0.5 * (voiced[n / 2 - 1] + voiced[n / 2]);
}

double voiced_median(const F0Contour& contour) { return voiced_median(contour.frame_hz); }

FeatureMatrix logmel_features(const audio::Waveform& w, bool apply_cmvn, const MelOptions& opts) {
  const int sr = w.sample_rate();
  const auto win = static_cast<std::size_t>(std::lround(opts.window_ms * 1e-3 * sr));
  const auto hop = static_cast<std::size_t>(std::lround(opts.hop_ms * 1e-3 * sr));
  if (w.size() < win) throw Error(Errc::TooShort, "waveform shorter than one analysis window");

  const std::size_t fft_size = next_pow2(win);
  const MelFilterbank fb = make_filterbank(sr, fft_size, opts.low_hz);
  const std::vector<double> window = hann(win);
  detail::RealFft fft(fft_size);
  std::vector<double> frame(fft_size, 0.0);
  std::vector<std::complex<double>> spec(fft.bins());
  std::vector<double> power(fft.bins());

  FeatureMatrix out;
  out.frames = (w.size() - win) / hop + 1;
  out.values.resize(out.frames * kMelBins);
  const auto samples = w.samples();
  for (std::size_t t = 0; t < out.frames; ++t) {
    for (std::size_t i = 0; i < win; ++i) frame[i] = samples[t * hop + i] * window[i];
    fft.forward(frame, spec);
    for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(spec[k]);
    auto row = out.row(t);
    for (std::size_t m = 0; m < kMelBins; ++m) {
      double e = 0.0;
      const auto& wts = fb.weights[m];
      for (std::size_t j = 0; j < wts.size(); ++j) e += wts[j] * power[fb.start[m] + j];
      row[m] = std::log(std::max(e, opts.log_floor));
    }
  }
  return apply_cmvn ? cmvn(std::move(out)) : out;
}

FeatureMatrix cmvn(FeatureMatrix m) {
  if (m.frames == 0) return m;
  const auto n = static_cast<double>(m.frames);
  for (std::size_t c = 0; c < kMelBins; ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < m.frames; ++t) mean += m.at(t, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t t = 0; t < m.frames; ++t) {
      const double d = m.at(t, c) - mean;
      var += d * d;
    }
    var /= n;
    const double scale = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
    for (std::size_t t = 0; t < m.frames; ++t) {
      m.values[t * kMelBins + c] = (m.values[t * kMelBins + c] - mean) * scale;
    }
  }
  m.normalized = true;
  return m;
}

void CmvnStats::accumulate(const FeatureMatrix& m) {
  for (std::size_t t = 0; t < m.frames; ++t) {
    const auto row = m.row(t);
    for (std::size_t c = 0; c < kMelBins; ++c) {
      sum_[c] += row[c];
      sum_sq_[c] += row[c] * row[c];
    }
  }
  count_ += m.frames;
}

std::vector<double> CmvnStats::mean() const {
  std::vector<double> out(kMelBins, 0.0);
  if (count_ == 0) return out;
  for (std::size_t c = 0; c < kMelBins; ++c) out[c] = sum_[c] / static_cast<double>(count_);
  return out;
}

std::vector<double> CmvnStats::stddev() const {
  std::vector<double> out(kMelBins, 1.0);
  if (count_ == 0) return out;
  const auto mu = mean();
  for (std::size_t c = 0; c < kMelBins; ++c) {
    const double var = std::max(0.0, sum_sq_[c] / static_cast<double>(count_) - mu[c] * mu[c]);
    out[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return out;
}

CmvnStats CmvnStats::from_moments(std::vector<double> mean, std::vector<double> stddev) {
  if (mean.size() != kMelBins || stddev.size() != kMelBins) {
    throw Error(Errc::ShapeMismatch, "CMVN statistics need 80 coefficients");
  }
  CmvnStats s;
  s.count_ = 1;
  for (std::size_t c = 0; c < kMelBins; ++c) {
    s.sum_[c] = mean[c];
    s.sum_sq_[c] = stddev[c] * stddev[c] + mean[c] * mean[c];
  }
  return s;
}

FeatureMatrix CmvnStats::apply(FeatureMatrix m) const {
  const auto mu = mean();
  const auto sd = stddev();
  for (std::size_t t = 0; t < m.frames; ++t) {
    auto row = m.row(t);
    for (std::size_t c = 0; c < kMelBins; ++c) row[c] = (row[c] - mu[c]) / sd[c];
  }
  m.normalized = true;
  return m;
}

void write_features(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open for writing: " + path.string());
  out.write("VXFT", 4);
  detail::put_u32(out, static_cast<std::uint32_t>(m.frames));
  detail::put_u32(out, static_cast<std::uint32_t>(kMelBins));
  for (double v : m.values) detail::put_f32(out, static_cast<float>(v));
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "VXFT", 4) != 0) {
    throw Error(Errc::MalformedHeader, "bad feature magic in " + path.string());
  }
  FeatureMatrix m;
  m.frames = detail::get_u32(in);
  if (detail::get_u32(in) != kMelBins) throw Error(Errc::MalformedHeader, "expected 80 coefficients");
  m.values.resize(m.frames * kMelBins);
  for (double& v : m.values) v = detail::get_f32(in);
  return m;
}

double envelope_peak_hz(const audio::Waveform& w, double lo_hz, double hi_hz) {
  const double f0 = voiced_median(estimate_f0_contour(w));
  const int sr = w.sample_rate();
  const std::size_t n = std::min<std::size_t>(4096, next_pow2(w.size()) / 2);
  if (w.size() < n || n < 512) throw Error(Errc::TooShort, "need a longer signal");

  detail::RealFft fft(n);
  const std::vector<double> window = hann(n);
  std::vector<double> frame(n);
  std::vector<std::complex<double>> spec(fft.bins());
  std::vector<double> power(fft.bins(), 0.0);
  const auto samples = w.samples();
  std::size_t count = 0;
  for (std::size_t start = 0; start + n <= w.size(); start += n / 2, ++count) {
    for (std::size_t i = 0; i < n; ++i) frame[i] = samples[start + i] * window[i];
    fft.forward(frame, spec);
    for (std::size_t k = 0; k < power.size(); ++k) power[k] += std::norm(spec[k]);
  }
  std::vector<double> log_mag(power.size());
  for (std::size_t k = 0; k < power.size(); ++k) {
    log_mag[k] = 0.5 * std::log(std::max(power[k] / static_cast<double>(count), 1e-300));
  }

  const double bin_hz = static_cast<double>(sr) / static_cast<double>(n);
  struct Harmonic {
    double hz;
    double log_amp;
  };
  std::vector<Harmonic> harmonics;
  for (int h = 1; h * f0 < 0.5 * sr - f0; ++h) {
    const double centre = h * f0;
    const auto lo = static_cast<std::size_t>(std::max(1.0, std::floor((centre - f0 / 3) / bin_hz)));
    const auto hi = std::min(power.size() - 2,
                             static_cast<std::size_t>(std::ceil((centre + f0 / 3) / bin_hz)));
    std::size_t best = lo;
    for (std::size_t k = lo; k <= hi; ++k) {
      if (log_mag[k] > log_mag[best]) best = k;
    }
    const double d = parabolic_offset(log_mag[best - 1], log_mag[best], log_mag[best + 1]);
    const double amp = log_mag[best] - 0.25 * (log_mag[best - 1] - log_mag[best + 1]) * d;
    harmonics.push_back({(static_cast<double>(best) + d) * bin_hz, amp});
  }

  std::size_t top = harmonics.size();
  for (std::size_t i = 0; i < harmonics.size(); ++i) {
    if (harmonics[i].hz < lo_hz || harmonics[i].hz > hi_hz) continue;
    if (top == harmonics.size() || harmonics[i].log_amp > harmonics[top].log_amp) top = i;
  }
  if (top == harmonics.size()) throw Error(Errc::InvalidArgument, "no harmonic in range");
  if (top == 0 || top + 1 >= harmonics.size()) return harmonics[top].hz;

  // Vertex of the parabola through three (frequency, log-amplitude) points.
  const auto& a = harmonics[top - 1];
  const auto& b = harmonics[top];
  const auto& c = harmonics[top + 1];
  const double d1 = (b.log_amp - a.log_amp) / (b.hz - a.hz);
  const double d2 = (c.log_amp - b.log_amp) / (c.hz - b.hz);
  const double curvature = (d2 - d1) / (c.hz - a.hz);
  if (curvature >= 0.0) return b.hz;
  const double vertex = 0.5 * (a.hz + b.hz) - d1 / (2.0 * curvature);
  return std::clamp(vertex, a.hz, c.hz);
}

}  // namespace voxtag::dsp
