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

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "voxtag/audio.hpp"
#include "voxtag/dsp.hpp"
#include "voxtag/error.hpp"

using namespace voxtag;
using voxtag::testing::TempDir;

namespace {

// Samples of the data chunk of a canonical 44-byte-header file.
std::vector<std::int16_t> raw_samples(const std::filesystem::path& p) {
  const auto bytes = voxtag::testing::read_bytes(p);
  REQUIRE(bytes.size() >= 44);
  REQUIRE(std::memcmp(bytes.data() + 36, "data", 4) == 0);
  std::vector<std::int16_t> out((bytes.size() - 44) / 2);
  std::memcpy(out.data(), bytes.data() + 44, out.size() * 2);
  return out;
}

void write_raw(const std::filesystem::path& p, std::uint16_t format, std::uint16_t channels,
               std::uint16_t bits, const std::vector<std::int16_t>& data) {
  auto u32 = [](std::ofstream& o, std::uint32_t v) { o.write(reinterpret_cast<char*>(&v), 4); };
  auto u16 = [](std::ofstream& o, std::uint16_t v) { o.write(reinterpret_cast<char*>(&v), 2); };
  std::ofstream o(p, std::ios::binary);
  const auto bytes = static_cast<std::uint32_t>(data.size() * 2);
  o.write("RIFF", 4);
  u32(o, 36 + bytes);
  o.write("WAVEfmt ", 8);
  u32(o, 16);
  u16(o, format);
  u16(o, channels);
  u32(o, 16000);
  u32(o, 16000 * channels * bits / 8);
  u16(o, static_cast<std::uint16_t>(channels * bits / 8));
  u16(o, bits);
  o.write("data", 4);
  u32(o, bytes);
  o.write(reinterpret_cast<const char*>(data.data()), bytes);
}

// Hann-windowed DFT magnitude at bin k of the first n samples, computed
// directly rather than through the library FFT.
double dft_magnitude(std::span<const double> x, std::size_t n, std::size_t k) {
  double re = 0.0;
  double im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
    const double ph = -2.0 * std::numbers::pi * static_cast<double>(k * i) / n;
    re += w * x[i] * std::cos(ph);
    im += w * x[i] * std::sin(ph);
  }
  return std::hypot(re, im);
}

}  // namespace

TEST_CASE("wav: silence round-trips") {
  TempDir dir("audio");
  const audio::Waveform w(std::vector<double>(16000, 0.0), 16000);
  audio::write_wav(w, dir / "s.wav");
  for (auto v : raw_samples(dir / "s.wav")) CHECK(v == 0);
  const auto r = audio::read_wav(dir / "s.wav");
  CHECK(r.size() == 16000);
  CHECK(r.sample_rate() == 16000);
  for (double s : r.samples()) CHECK(s == 0.0);
}

TEST_CASE("wav: stored 32767 reads as 32767/32768") {
  TempDir dir("audio");
  write_raw(dir / "m.wav", 1, 1, 16, {32767, -32768, 0});
  const auto r = audio::read_wav(dir / "m.wav");
  CHECK(r.samples()[0] == 32767.0 / 32768.0);
  CHECK(r.samples()[1] == -1.0);
  CHECK(r.samples()[2] == 0.0);
}

TEST_CASE("wav: amplitude 1.0 clips to 32767 and beyond-range values clip") {
  TempDir dir("audio");
  audio::write_wav(audio::Waveform({1.0, 1.5, -1.0, -3.0}, 16000), dir / "c.wav");
  const auto raw = raw_samples(dir / "c.wav");
  CHECK(raw[0] == 32767);
  CHECK(raw[1] == 32767);
  CHECK(raw[2] == -32768);
  CHECK(raw[3] == -32768);
}

TEST_CASE("wav: round trip of random signals stays within 1/32768") {
  TempDir dir("audio");
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(1000 + trial * 37);
    for (auto& s : x) s = u(rng);
    const audio::Waveform w(x, 8000 + trial);
    audio::write_wav(w, dir / "r.wav");
    const auto r = audio::read_wav(dir / "r.wav");
    REQUIRE(r.size() == x.size());
    CHECK(r.sample_rate() == 8000 + trial);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(r.samples()[i] - x[i]));
    CHECK(worst <= 1.0 / 32768.0);
  }
}

TEST_CASE("wav: malformed and unsupported files are rejected") {
  TempDir dir("audio");
  {
    std::ofstream o(dir / "junk.wav", std::ios::binary);
    o << "this is not audio at all, not even close";
  }
  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  CHECK(code_of([&] { audio::read_wav(dir / "missing.wav"); }) == Errc::Io);
  CHECK(code_of([&] { audio::read_wav(dir / "junk.wav"); }) == Errc::MalformedHeader);
  write_raw(dir / "stereo.wav", 1, 2, 16, {0, 0, 0, 0});
  CHECK(code_of([&] { audio::read_wav(dir / "stereo.wav"); }) == Errc::UnsupportedEncoding);
  write_raw(dir / "float.wav", 3, 1, 16, {0, 0});
  CHECK(code_of([&] { audio::read_wav(dir / "float.wav"); }) == Errc::UnsupportedEncoding);
}

TEST_CASE("synth_harmonic: length, peak and f0 bounds") {
  const auto w = audio::synth_harmonic(120.0, {}, 1.0, 16000);
  CHECK(w.size() == 16000);
  CHECK(w.peak() == doctest::Approx(0.9).epsilon(1e-12));
  CHECK_THROWS_AS(audio::synth_harmonic(40.0, {}, 1.0), Error);
  CHECK_THROWS_AS(audio::synth_harmonic(600.0, {}, 1.0), Error);
}

TEST_CASE("synth_harmonic: estimated median f0 matches the generator") {
  for (double f0 : {120.0, 200.0, 250.0}) {
    const auto w = audio::synth_harmonic(f0, {}, 1.0);
    CHECK(dsp::voiced_median(dsp::estimate_f0_contour(w)) == doctest::Approx(f0).epsilon(2.0 / f0));
  }
}

TEST_CASE("synth_harmonic: formant peak at 700 Hz lands within one 512-point bin") {
  const audio::FormantPeak peak{700.0, 1.0};
  const auto w = audio::synth_harmonic(120.0, std::span(&peak, 1), 1.0);
  const std::size_t n = 512;
  const double bin_hz = 16000.0 / n;
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = static_cast<std::size_t>(300 / bin_hz); k <= 1500 / bin_hz; ++k) {
    const double m = dft_magnitude(w.samples().subspan(4000), n, k);
    if (m > best_mag) {
      best_mag = m;
      best = k;
    }
  }
  CHECK(std::abs(static_cast<double>(best) * bin_hz - 700.0) <= bin_hz);
}

TEST_CASE("synth_harmonic: autocorrelation peaks at the period") {
  const auto w = audio::synth_harmonic(200.0, {}, 0.5);
  const auto x = w.samples();
  auto r = [&](std::size_t lag) {
    double num = 0.0, e0 = 0.0, e1 = 0.0;
    for (std::size_t i = 0; i + lag < x.size(); ++i) {
      num += x[i] * x[i + lag];
      e0 += x[i] * x[i];
      e1 += x[i + lag] * x[i + lag];
    }
    return num / std::sqrt(e0 * e1);
  };
  double global = -2.0;
  for (std::size_t lag = 40; lag <= 200; ++lag) global = std::max(global, r(lag));
  // Multiples of the period tie with it; the period is the first such peak.
  CHECK(r(80) > r(79));
  CHECK(r(80) > r(81));
  CHECK(r(80) == doctest::Approx(global).epsilon(1e-3));
  for (std::size_t lag = 40; lag < 79; ++lag) CHECK(r(lag) < 0.9 * global);
}
