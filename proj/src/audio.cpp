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

#include "voxtag/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "voxtag/error.hpp"

namespace voxtag::audio {

namespace {

constexpr double kEnvelopeFloor = 1e-4;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

}  // namespace

Waveform::Waveform(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw Error(Errc::InvalidArgument, "sample rate must be positive");
  for (double s : samples_) {
    if (!std::isfinite(s)) throw Error(Errc::InvalidArgument, "non-finite sample");
  }
}

double Waveform::peak() const noexcept {
  double m = 0.0;
  for (double s : samples_) m = std::max(m, std::abs(s));
  return m;
}

double Waveform::rms() const noexcept {
  if (samples_.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples_) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples_.size()));
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(Errc::MalformedHeader, "not a RIFF/WAVE file: " + path.string());
  }

  bool have_fmt = false;
  int sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw Error(Errc::MalformedHeader, "truncated chunk");

    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw Error(Errc::MalformedHeader, "fmt chunk too small");
      const std::uint16_t format = read_u16(bytes.data() + body);
      const std::uint16_t channels = read_u16(bytes.data() + body + 2);
      sample_rate = static_cast<int>(read_u32(bytes.data() + body + 4));
      const std::uint16_t bits = read_u16(bytes.data() + body + 14);
      if (format != 1) throw Error(Errc::UnsupportedEncoding, "only PCM (format 1) is supported");
      if (channels != 1) throw Error(Errc::UnsupportedEncoding, "only mono is supported");
      if (bits != 16) throw Error(Errc::UnsupportedEncoding, "only 16-bit samples are supported");
      if (sample_rate <= 0) throw Error(Errc::MalformedHeader, "zero sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(Errc::MalformedHeader, "data chunk before fmt chunk");
      const std::size_t n = len / 2;
      std::vector<double> samples(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        samples[i] = static_cast<double>(v) / 32768.0;
      }
      return Waveform(std::move(samples), sample_rate);
    }
    pos = body + len + (len & 1u);
  }
  throw Error(Errc::MalformedHeader, "missing fmt or data chunk");
}

void write_wav(const Waveform& w, const std::filesystem::path& path) {
  const auto n = static_cast<std::uint32_t>(w.size());
  const std::uint32_t data_bytes = n * 2;
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate()) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double s : w.samples()) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    const long q = std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::Io, "cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(Errc::Io, "write failed: " + path.string());
}

double formant_envelope(double hz, std::span<const FormantPeak> formant_peaks,
                        double bandwidth_hz) {
  if (formant_peaks.empty()) return 1.0;
  double env = 0.0;
  double max_gain = 0.0;
  for (const auto& peak : formant_peaks) {
    const double z = (hz - peak.hz) / bandwidth_hz;
    env += peak.gain / (1.0 + z * z);
    max_gain = std::max(max_gain, peak.gain);
  }
  return env + kEnvelopeFloor * max_gain;
}

Waveform synth_harmonic(double f0, std::span<const FormantPeak> formant_peaks, double duration,
                        int sample_rate, double bandwidth_hz) {
  if (!(f0 >= 50.0 && f0 <= 500.0)) throw Error(Errc::InvalidF0, "f0 must lie in [50, 500] Hz");
  if (!(duration > 0.0)) throw Error(Errc::InvalidArgument, "duration must be positive");
  if (sample_rate <= 0) throw Error(Errc::InvalidArgument, "sample rate must be positive");

  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  const double nyquist = 0.5 * sample_rate;
  std::vector<double> samples(n, 0.0);
  for (int k = 1; k * f0 < nyquist; ++k) {
    const double hz = k * f0;
    const double amp = formant_envelope(hz, formant_peaks, bandwidth_hz);
    const double step = 2.0 * std::numbers::pi * hz / sample_rate;
    for (std::size_t i = 0; i < n; ++i) samples[i] += amp * std::cos(step * static_cast<double>(i));
  }

  double peak = 0.0;
  for (double s : samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    for (double& s : samples) s *= 0.9 / peak;
  }
  return Waveform(std::move(samples), sample_rate);
}

}  // namespace voxtag::audio
