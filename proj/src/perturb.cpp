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

#include "voxtag/perturb.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "fft.hpp"
#include "voxtag/error.hpp"

namespace voxtag::perturb {

namespace {

// f0 at sample `t`, linearly interpolated between voiced frame centres.
// Zero when the nearest frame is unvoiced.
double local_f0(const dsp::F0Contour& c, double t) {
  const auto& hz = c.frame_hz;
  if (hz.empty()) return 0.0;
  const double pos = (t - 0.5 * static_cast<double>(c.frame_len)) / static_cast<double>(c.hop);
  if (pos <= 0.0) return hz.front();
  const auto last = static_cast<double>(hz.size() - 1);
  if (pos >= last) return hz.back();
  const auto i0 = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i0);
  const double a = hz[i0];
  const double b = hz[i0 + 1];
  if (a > 0.0 && b > 0.0) return a + frac * (b - a);
  return frac < 0.5 ? a : b;
}

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

// Quadratic (three-point Lagrange) interpolation of harmonic log-amplitudes
// at fractional harmonic number `u`; `log_amp[h - 1]` belongs to harmonic h.
double interpolate_harmonics(const std::vector<double>& log_amp, double u) {
  const auto count = static_cast<double>(log_amp.size());
  if (u <= 1.0) return log_amp.front();
  if (u >= count) return log_amp.back();
  if (log_amp.size() < 3) {
    const auto i = static_cast<std::size_t>(std::floor(u)) - 1;
    const double frac = u - std::floor(u);
    return log_amp[i] + frac * (log_amp[std::min(i + 1, log_amp.size() - 1)] - log_amp[i]);
  }
  const double j = std::clamp(std::round(u), 2.0, count - 1.0);
  const auto idx = static_cast<std::size_t>(j) - 1;
  const double a = log_amp[idx - 1];
  const double b = log_amp[idx];
  const double c = log_amp[idx + 1];
  const double t = u - j;
  const double v = b + 0.5 * t * (c - a) + 0.5 * t * t * (a - 2.0 * b + c);
  // A concave fit may rise above its samples (that is the point: the peak
  // sits between harmonics); a convex one must not dip far below them.
  const double lo = std::min({a, b, c});
  const double hi = std::max({a, b, c}) + 1.0;
  return std::clamp(v, lo, hi);
}

// Log-amplitude of each harmonic of `f0` below Nyquist, from the largest bin
// of the harmonic's region with parabolic refinement.
std::vector<double> measure_harmonics(const std::vector<std::complex<double>>& spec, double f0,
                                      double bin_hz) {
  const std::size_t bins = spec.size();
  const double nyquist = bin_hz * static_cast<double>(bins - 1);
  const auto count = static_cast<std::size_t>(std::max(0.0, std::floor((nyquist - 0.5 * f0) / f0)));
  std::vector<double> log_amp(count);
  for (std::size_t h = 1; h <= count; ++h) {
    const auto lo = std::min(bins - 1, static_cast<std::size_t>(std::lround(
                                           (static_cast<double>(h) - 0.5) * f0 / bin_hz)));
    const auto hi = std::min(bins, static_cast<std::size_t>(std::lround(
                                       (static_cast<double>(h) + 0.5) * f0 / bin_hz)));
    double best = 0.0;
    std::size_t best_k = lo;
    for (std::size_t k = lo; k < hi; ++k) {
      if (std::abs(spec[k]) > best) {
        best = std::abs(spec[k]);
        best_k = k;
      }
    }
    double peak = std::log(std::max(best, 1e-12));
    if (best_k > 0 && best_k + 1 < bins) {
      const double l = std::log(std::max(std::abs(spec[best_k - 1]), 1e-12));
      const double r = std::log(std::max(std::abs(spec[best_k + 1]), 1e-12));
      const double denom = l - 2.0 * peak + r;
      if (denom < 0.0) {
        const double d = std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
        peak -= 0.25 * (l - r) * d;
      }
    }
    log_amp[h - 1] = peak;
  }
  return log_amp;
}

// Voiced frame: log-gain per output harmonic h (of out_f0) that moves it
// onto the source envelope read at h * out_f0 / scale. The source envelope
// is the source frame's harmonic samples, interpolated.
std::vector<double> voiced_log_gains(const std::vector<std::complex<double>>& source,
                                     double source_f0,
                                     const std::vector<std::complex<double>>& out, double out_f0,
                                     double bin_hz, double scale) {
  const std::vector<double> envelope = measure_harmonics(source, source_f0, bin_hz);
  std::vector<double> gain = measure_harmonics(out, out_f0, bin_hz);
  if (envelope.size() < 2) return {};
  for (std::size_t h = 1; h <= gain.size(); ++h) {
    const double u = static_cast<double>(h) * out_f0 / (scale * source_f0);
    gain[h - 1] = interpolate_harmonics(envelope, u) - gain[h - 1];
  }
  return gain;
}

void apply_harmonic_gains(std::vector<std::complex<double>>& out, double out_f0, double bin_hz,
                          std::span<const double> log_gain) {
  if (log_gain.empty()) return;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double h = std::round(static_cast<double>(k) * bin_hz / out_f0);
    const auto idx =
        static_cast<std::size_t>(std::clamp(h, 1.0, static_cast<double>(log_gain.size()))) - 1;
    out[k] *= std::exp(std::clamp(log_gain[idx], -8.0, 8.0));
  }
}

// Short-time envelope transfer from `source` onto `shifted` (its
// pitch-shifted version), stretching the envelope by `scale` on the way.
std::vector<double> transfer_envelope(std::span<const double> source,
                                      std::span<const double> shifted, int sr,
                                      const dsp::F0Contour& contour, double alpha, double scale) {
  const std::size_t n_fft = next_pow2(static_cast<std::size_t>(0.064 * sr));
  const std::size_t hop = n_fft / 4;
  const std::size_t pad = n_fft;
  const std::size_t total = source.size() + 2 * pad;
  std::vector<double> padded_src(total, 0.0);
  std::vector<double> padded_out(total, 0.0);
  std::copy(source.begin(), source.end(), padded_src.begin() + static_cast<std::ptrdiff_t>(pad));
  std::copy(shifted.begin(), shifted.end(), padded_out.begin() + static_cast<std::ptrdiff_t>(pad));

  detail::RealFft fft(n_fft);
  const std::vector<double> win = hann(n_fft);
  const double bin_hz = static_cast<double>(sr) / static_cast<double>(n_fft);
  std::vector<double> frame(n_fft);
  std::vector<std::complex<double>> src_spec(fft.bins());
  std::vector<std::complex<double>> spec(fft.bins());
  std::vector<double> out(total, 0.0);
  std::vector<double> weight(total, 0.0);

  // Gains are computed for every frame first and then averaged over
  // neighbouring voiced frames; independent per-frame gains modulate the
  // output at the hop rate.
  const std::size_t n_frames = (total - n_fft) / hop + 1;
  std::vector<double> frame_f0(n_frames);
  std::vector<std::vector<double>> log_gains(n_frames);
  for (std::size_t j = 0; j < n_frames; ++j) {
    const std::size_t start = j * hop;
    const double centre =
        static_cast<double>(start) + 0.5 * static_cast<double>(n_fft) - static_cast<double>(pad);
    frame_f0[j] = local_f0(contour, centre);
    if (frame_f0[j] <= 0.0) continue;
    for (std::size_t i = 0; i < n_fft; ++i) frame[i] = padded_src[start + i] * win[i];
    fft.forward(frame, src_spec);
    for (std::size_t i = 0; i < n_fft; ++i) frame[i] = padded_out[start + i] * win[i];
    fft.forward(frame, spec);
    log_gains[j] = voiced_log_gains(src_spec, frame_f0[j], spec, alpha * frame_f0[j], bin_hz, scale);
  }

  constexpr std::size_t kSmooth = 2;
  std::vector<double> smoothed;
  for (std::size_t j = 0; j < n_frames; ++j) {
    const std::size_t start = j * hop;
    for (std::size_t i = 0; i < n_fft; ++i) frame[i] = padded_out[start + i] * win[i];
    fft.forward(frame, spec);
    if (frame_f0[j] > 0.0) {
      smoothed.assign(log_gains[j].size(), 0.0);
      std::vector<double> count(smoothed.size(), 0.0);
      for (std::size_t m = j >= kSmooth ? j - kSmooth : 0; m <= std::min(n_frames - 1, j + kSmooth);
           ++m) {
        if (frame_f0[m] <= 0.0 || std::abs(frame_f0[m] / frame_f0[j] - 1.0) > 0.05) continue;
        for (std::size_t h = 0; h < std::min(smoothed.size(), log_gains[m].size()); ++h) {
          smoothed[h] += log_gains[m][h];
          count[h] += 1.0;
        }
      }
      for (std::size_t h = 0; h < smoothed.size(); ++h) smoothed[h] /= std::max(count[h], 1.0);
      apply_harmonic_gains(spec, alpha * frame_f0[j], bin_hz, smoothed);
    }
    fft.inverse(spec, frame);
    for (std::size_t i = 0; i < n_fft; ++i) {
      out[start + i] += frame[i] / static_cast<double>(n_fft) * win[i];
      weight[start + i] += win[i] * win[i];
    }
  }

  std::vector<double> y(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    const double wsum = weight[pad + i];
    y[i] = wsum > 1e-8 ? out[pad + i] / wsum : 0.0;
  }
  return y;
}

struct PitchMark {
  double pos;
  double period;
  bool voiced;
};

long argmax_in(std::span<const double> x, long lo, long hi) {
  lo = std::max(lo, 0L);
  hi = std::min(hi, static_cast<long>(x.size()) - 1);
  long best = lo;
  for (long i = lo; i <= hi; ++i) {
    if (x[static_cast<std::size_t>(i)] > x[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

// Sub-sample position of the maximum at `i`.
double refine_peak(std::span<const double> x, long i) {
  if (i <= 0 || i + 1 >= static_cast<long>(x.size())) return static_cast<double>(i);
  const double l = x[static_cast<std::size_t>(i - 1)];
  const double c = x[static_cast<std::size_t>(i)];
  const double r = x[static_cast<std::size_t>(i + 1)];
  const double denom = l - 2.0 * c + r;
  if (denom >= 0.0) return static_cast<double>(i);
  return static_cast<double>(i) + std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
}

// Voiced marks sit on waveform maxima one local period apart; unvoiced
// stretches get evenly spaced marks that are copied through unchanged.
std::vector<PitchMark> place_marks(std::span<const double> x, int sr,
                                   const dsp::F0Contour& contour, long unvoiced_step) {
  std::vector<PitchMark> marks;
  const auto n = static_cast<long>(x.size());
  long pos = 0;
  while (pos < n) {
    const double f0 = local_f0(contour, static_cast<double>(pos));
    if (f0 <= 0.0) {
      marks.push_back({static_cast<double>(pos), static_cast<double>(unvoiced_step), false});
      pos += unvoiced_step;
      continue;
    }
    const double period = sr / f0;
    if (marks.empty() || !marks.back().voiced) {
      pos = argmax_in(x, pos, pos + static_cast<long>(std::ceil(period)) - 1);
    }
    marks.push_back({refine_peak(x, pos), period, true});
    const double predicted = marks.back().pos + period;
    const long slack = std::max(1L, std::lround(period / 8.0));
    const long centre = std::lround(predicted);
    if (centre >= n) break;
    const long prev = pos;
    pos = argmax_in(x, centre - slack, centre + slack);
    if (pos <= prev) pos = prev + 1;
  }
  return marks;
}

// Catmull-Rom interpolation of x at fractional index t; zero outside.
double sample_at(std::span<const double> x, double t) {
  const auto n = static_cast<long>(x.size());
  const long i = static_cast<long>(std::floor(t));
  const double f = t - static_cast<double>(i);
  auto get = [&](long j) { return j >= 0 && j < n ? x[static_cast<std::size_t>(j)] : 0.0; };
  const double p0 = get(i - 1), p1 = get(i), p2 = get(i + 1), p3 = get(i + 2);
  return p1 + 0.5 * f *
                  (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
}

// Hann grain of half-length `half` centred on `from` in x, added at `to`.
void add_grain(std::span<const double> x, double from, std::vector<double>& out, double to,
               double half, double gain) {
  const auto n = static_cast<long>(out.size());
  const long lo = std::max(0L, static_cast<long>(std::ceil(to - half)));
  const long hi = std::min(n - 1, static_cast<long>(std::floor(to + half)));
  for (long dst = lo; dst <= hi; ++dst) {
    const double off = static_cast<double>(dst) - to;
    if (std::abs(off) >= half) continue;
    const double w = 0.5 + 0.5 * std::cos(std::numbers::pi * off / half);
    out[static_cast<std::size_t>(dst)] += gain * w * sample_at(x, from + off);
  }
}

std::vector<double> psola(std::span<const double> x, int sr, const dsp::F0Contour& contour,
                          double alpha) {
  const long step = std::max(1L, std::lround(0.01 * sr));
  const auto marks = place_marks(x, sr, contour, step);
  std::vector<double> out(x.size(), 0.0);
  if (marks.empty()) return out;

  const double voiced_gain = 1.0 / std::sqrt(alpha);
  const auto n = static_cast<double>(x.size());
  double ts = marks.front().pos;
  std::size_t k = 0;
  while (ts < n) {
    while (k + 1 < marks.size() && std::abs(marks[k + 1].pos - ts) <= std::abs(marks[k].pos - ts)) {
      ++k;
    }
    const PitchMark& m = marks[k];
    if (m.voiced) {
      add_grain(x, m.pos, out, ts, std::max(2.0, m.period), voiced_gain);
      ts += m.period / alpha;
    } else {
      add_grain(x, m.pos, out, m.pos, static_cast<double>(step), 1.0);
      if (k + 1 == marks.size()) break;
      ts = marks[++k].pos;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(SpeakerGender g) noexcept { return g == SpeakerGender::F ? "F" : "M"; }

SpeakerGender parse_gender(std::string_view s) {
  if (s.size() == 1) {
    const auto c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    if (c == 'F') return SpeakerGender::F;
    if (c == 'M') return SpeakerGender::M;
  }
  throw Error(Errc::InvalidArgument, "gender must be F or M, got '" + std::string(s) + "'");
}

void PerturbConfig::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::InvalidArgument, "p must lie in [0, 1]");
  if (!(feminine.stddev > 0.0 && masculine.stddev > 0.0)) {
    throw Error(Errc::InvalidArgument, "target standard deviations must be positive");
  }
  if (!(formant_up > 1.0 && formant_down < 1.0 && formant_down > 0.0)) {
    throw Error(Errc::InvalidArgument, "need formant_up > 1 > formant_down > 0");
  }
}

double sample_target_median(SpeakerGender target_gender, const PerturbConfig& cfg, Rng& rng) {
  const NormalTarget& t = target_gender == SpeakerGender::F ? cfg.feminine : cfg.masculine;
  std::normal_distribution<double> normal(t.mean, t.stddev);
  for (;;) {
    const double v = normal(rng);
    if (std::abs(v - t.mean) <= 3.0 * t.stddev) return v;
  }
}

double compute_alpha(double source_median, double target_median) {
  if (!(source_median > 0.0)) throw Error(Errc::ZeroSourceMedian, "source median must be positive");
  return target_median / source_median;
}

audio::Waveform pitch_formant_shift(const audio::Waveform& w, const dsp::F0Contour& contour,
                                    double alpha, double formant_scale) {
  if (!(alpha >= 0.25 && alpha <= 4.0)) {
    throw Error(Errc::OutOfRangeFactor, "alpha must lie in [0.25, 4]");
  }
  if (!(formant_scale >= 0.5 && formant_scale <= 2.0)) {
    throw Error(Errc::OutOfRangeFactor, "formant scale must lie in [0.5, 2]");
  }
  if (contour.voiced_count() == 0) throw Error(Errc::AllUnvoiced, "no pitch marks");

  const int sr = w.sample_rate();
  const std::vector<double> pitched = psola(w.samples(), sr, contour, alpha);
  std::vector<double> shifted =
      transfer_envelope(w.samples(), pitched, sr, contour, alpha, formant_scale);

  double peak = 0.0;
  for (double s : shifted) peak = std::max(peak, std::abs(s));
  if (peak > 0.99) {
    for (double& s : shifted) s *= 0.99 / peak;
  }
  return audio::Waveform(std::move(shifted), sr);
}

audio::Waveform pitch_formant_shift(const audio::Waveform& w, double alpha, double formant_scale) {
  return pitch_formant_shift(w, dsp::estimate_f0_contour(w), alpha, formant_scale);
}

Manipulation apply_opposite(const audio::Waveform& w, SpeakerGender speaker_gender,
                            const PerturbConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) >= cfg.p) return {w, false, 1.0, 1.0, 0.0};

  const dsp::F0Contour contour = dsp::estimate_f0_contour(w);
  const double source = dsp::voiced_median(contour);
  const double target = sample_target_median(opposite(speaker_gender), cfg, rng);
  const double alpha = compute_alpha(source, target);
  const double formant =
      speaker_gender == SpeakerGender::M ? cfg.formant_up : cfg.formant_down;
  return {pitch_formant_shift(w, contour, alpha, formant), true, alpha, formant, target};
}

Rng perturb_stream(const PerturbConfig& cfg, std::uint64_t utterance_index, std::uint64_t epoch) {
  return substream({cfg.seed, utterance_index, epoch, 0x70657274ULL});
}

}  // namespace voxtag::perturb
