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

#include "voxtag/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "voxtag/error.hpp"
#include "voxtag/rng.hpp"

namespace voxtag::synth {

namespace {

constexpr double kLeadSeconds = 0.05;
constexpr double kVowelSeconds = 0.07;
constexpr double kBurstSeconds = 0.03;
constexpr double kGapSeconds = 0.01;
constexpr double kRampSeconds = 0.005;
constexpr double kVowelPeak = 0.5;
constexpr double kBurstRms = 0.08;
constexpr double kBackgroundStd = 3e-5;
constexpr double kThresholdMargin = 0.03;

constexpr std::size_t kBands = 10;
constexpr double kFirstBandHz = 2000.0;
constexpr double kBandStepHz = 550.0;
constexpr double kBandHalfWidthHz = 150.0;
constexpr int kPartialsPerBand = 16;

// Word `index` is marked by the index-th pair (a < b) of noise bands.
std::pair<std::size_t, std::size_t> band_pair(std::size_t index) {
  for (std::size_t a = 0; a < kBands; ++a) {
    for (std::size_t b = a + 1; b < kBands; ++b) {
      if (index-- == 0) return {a, b};
    }
  }
  throw Error(Errc::InvalidSpec, "grammar has more source words than band pairs");
}

double ramp(double t, double len) {
  if (t <= 0.0 || t >= len) return 0.0;
  const double r = std::min({1.0, t / kRampSeconds, (len - t) / kRampSeconds});
  return 0.5 - 0.5 * std::cos(std::numbers::pi * r);
}

// Normal draw restricted to the 3-sigma range and to [lo, hi].
double draw_truncated(const perturb::NormalTarget& t, double lo, double hi, Rng& rng) {
  lo = std::max(lo, t.mean - 3.0 * t.stddev);
  hi = std::min(hi, t.mean + 3.0 * t.stddev);
  std::normal_distribution<double> n(t.mean, t.stddev);
  for (;;) {
    const double v = n(rng);
    if (v >= lo && v <= hi) return v;
  }
}

void add_burst(std::vector<double>& x, std::size_t start, std::size_t len, int sr,
               std::pair<std::size_t, std::size_t> bands, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> burst(len, 0.0);
  for (std::size_t band : {bands.first, bands.second}) {
    const double centre = kFirstBandHz + kBandStepHz * static_cast<double>(band);
    for (int k = 0; k < kPartialsPerBand; ++k) {
      const double hz = centre + kBandHalfWidthHz * (2.0 * unit(rng) - 1.0);
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      const double step = 2.0 * std::numbers::pi * hz / sr;
      for (std::size_t i = 0; i < len; ++i) burst[i] += std::cos(phase + step * static_cast<double>(i));
    }
  }
  double energy = 0.0;
  for (double v : burst) energy += v * v;
  const double gain = kBurstRms / std::sqrt(energy / static_cast<double>(len));
  const double dur = static_cast<double>(len) / sr;
  for (std::size_t i = 0; i < len && start + i < x.size(); ++i) {
    x[start + i] += gain * burst[i] * ramp(static_cast<double>(i) / sr, dur);
  }
}

}  // namespace

Grammar Grammar::standard() {
  Grammar g;
  const std::vector<std::pair<const char*, const char*>> neutral{
      {"i", "io"},          {"you", "tu"},        {"we", "noi"},          {"today", "oggi"},
      {"yesterday", "ieri"}, {"here", "qui"},      {"there", "li"},        {"very", "molto"},
      {"always", "sempre"}, {"never", "mai"},     {"now", "ora"},         {"home", "casa"},
      {"work", "lavoro"},   {"school", "scuola"}, {"city", "citta"},      {"book", "libro"},
      {"water", "acqua"},   {"night", "notte"},   {"morning", "mattina"}, {"and", "e"},
      {"but", "ma"},        {"with", "con"},      {"without", "senza"},   {"again", "ancora"},
      {"often", "spesso"},  {"late", "tardi"},    {"early", "presto"},    {"too", "anche"},
      {"still", "gia"},     {"not", "non"}};
  const std::vector<std::tuple<const char*, const char*, const char*>> gendered{
      {"tired", "stanca", "stanco"},       {"happy", "contenta", "contento"},
      {"ready", "pronta", "pronto"},       {"born", "nata", "nato"},
      {"sure", "sicura", "sicuro"},        {"alone", "sola", "solo"},
      {"arrived", "arrivata", "arrivato"}, {"busy", "occupata", "occupato"},
      {"sorry", "dispiaciuta", "dispiaciuto"}, {"convinced", "convinta", "convinto"},
      {"calm", "calma", "calmo"},          {"gone", "andata", "andato"}};
  for (const auto& [s, t] : neutral) g.neutral.push_back({s, t, t});
  for (const auto& [s, f, m] : gendered) g.gendered.push_back({s, f, m});
  return g;
}

void Grammar::validate() const {
  if (neutral.empty() || gendered.empty()) {
    throw Error(Errc::InvalidSpec, "grammar needs neutral and gendered words");
  }
  if (min_length == 0 || min_length > max_length) throw Error(Errc::InvalidSpec, "bad length range");
  if (min_gendered == 0 || min_gendered > max_gendered || min_gendered > min_length) {
    throw Error(Errc::InvalidSpec, "bad gendered-slot range");
  }
  if (max_gendered > gendered.size()) {
    throw Error(Errc::InvalidSpec, "more gendered slots than gendered words");
  }
  std::set<std::string> sources;
  for (const auto* list : {&neutral, &gendered}) {
    for (const auto& e : *list) {
      if (e.source.empty() || e.feminine.empty() || e.masculine.empty()) {
        throw Error(Errc::InvalidSpec, "empty grammar form");
      }
      if (!sources.insert(e.source).second) {
        throw Error(Errc::InvalidSpec, "duplicate source word '" + e.source + "'");
      }
    }
  }
  for (const auto& e : neutral) {
    if (e.gendered()) throw Error(Errc::InvalidSpec, "neutral word '" + e.source + "' has two forms");
  }
  for (const auto& e : gendered) {
    if (!e.gendered()) throw Error(Errc::InvalidSpec, "gendered word '" + e.source + "' has one form");
  }
  if (sources.size() > kBands * (kBands - 1) / 2) {
    throw Error(Errc::InvalidSpec, "grammar has more source words than band pairs");
  }
}

void SynthSpec::validate() const {
  if (n_utterances == 0) throw Error(Errc::InvalidSpec, "n_utterances must be positive");
  if (!(gender_split > 0.0 && gender_split < 1.0)) {
    throw Error(Errc::InvalidSpec, "gender_split must lie in (0, 1)");
  }
  if (!(f0_feminine.stddev > 0.0 && f0_masculine.stddev > 0.0)) {
    throw Error(Errc::InvalidSpec, "f0 standard deviations must be positive");
  }
  for (const auto* t : {&f0_feminine, &f0_masculine}) {
    if (t->mean - 3.0 * t->stddev < 50.0 || t->mean + 3.0 * t->stddev > 500.0) {
      throw Error(Errc::InvalidSpec, "f0 distribution leaves [50, 500] Hz");
    }
  }
  if (f0_feminine.mean + 3.0 * f0_feminine.stddev <= gender_threshold_hz * (1.0 + kThresholdMargin) ||
      f0_masculine.mean - 3.0 * f0_masculine.stddev >= gender_threshold_hz * (1.0 - kThresholdMargin)) {
    throw Error(Errc::InvalidSpec, "f0 distribution lies entirely on the wrong side of the threshold");
  }
  if (sample_rate < 16000) throw Error(Errc::InvalidSpec, "sample rate must be at least 16 kHz");
  grammar.validate();
}

Corpus generate_corpus(const SynthSpec& spec) {
  spec.validate();
  const Grammar& g = spec.grammar;
  const int sr = spec.sample_rate;
  const auto secs = [sr](double s) { return static_cast<std::size_t>(std::lround(s * sr)); };
  const std::size_t lead = secs(kLeadSeconds), vowel = secs(kVowelSeconds);
  const std::size_t burst = secs(kBurstSeconds), gap = secs(kGapSeconds);
  const std::size_t word_len = vowel + burst + gap;

  Corpus corpus;
  for (std::size_t u = 0; u < spec.n_utterances; ++u) {
    Rng rng = substream({spec.seed, u, 0x73796e74});
    std::bernoulli_distribution is_female(spec.gender_split);
    const auto gender = is_female(rng) ? perturb::SpeakerGender::F : perturb::SpeakerGender::M;
    const bool female = gender == perturb::SpeakerGender::F;
    const double f0 =
        female ? draw_truncated(spec.f0_feminine, spec.gender_threshold_hz * (1.0 + kThresholdMargin),
                                std::numeric_limits<double>::infinity(), rng)
               : draw_truncated(spec.f0_masculine, 0.0,
                                spec.gender_threshold_hz * (1.0 - kThresholdMargin), rng);

    std::uniform_int_distribution<std::size_t> length_dist(g.min_length, g.max_length);
    const std::size_t len = length_dist(rng);
    std::uniform_int_distribution<std::size_t> slots_dist(g.min_gendered,
                                                          std::min(g.max_gendered, len));
    const std::size_t n_gendered = slots_dist(rng);
    std::vector<std::size_t> positions(len);
    for (std::size_t i = 0; i < len; ++i) positions[i] = i;
    std::shuffle(positions.begin(), positions.end(), rng);
    std::vector<bool> is_slot(len, false);
    for (std::size_t i = 0; i < n_gendered; ++i) is_slot[positions[i]] = true;
    std::vector<std::size_t> gendered_pick(g.gendered.size());
    for (std::size_t i = 0; i < gendered_pick.size(); ++i) gendered_pick[i] = i;
    std::shuffle(gendered_pick.begin(), gendered_pick.end(), rng);

    // Word index into neutral ++ gendered, which also selects the band pair.
    std::vector<std::size_t> words(len);
    std::uniform_int_distribution<std::size_t> neutral_dist(0, g.neutral.size() - 1);
    std::size_t next_gendered = 0;
    for (std::size_t i = 0; i < len; ++i) {
      words[i] = is_slot[i] ? g.neutral.size() + gendered_pick[next_gendered++] : neutral_dist(rng);
    }

    const std::size_t total = 2 * lead + len * word_len;
    const audio::Waveform carrier = audio::synth_harmonic(
        f0, female ? spec.formants_feminine : spec.formants_masculine,
        static_cast<double>(total) / sr, sr);
    const auto cs = carrier.samples();
    std::vector<double> x(total, 0.0);
    std::normal_distribution<double> background(0.0, kBackgroundStd);
    for (double& v : x) v = background(rng);
    const double vowel_dur = static_cast<double>(vowel) / sr;
    for (std::size_t w = 0; w < len; ++w) {
      const std::size_t start = lead + w * word_len;
      for (std::size_t i = 0; i < vowel; ++i) {
        x[start + i] += kVowelPeak / 0.9 * cs[start + i] * ramp(static_cast<double>(i) / sr, vowel_dur);
      }
      add_burst(x, start + vowel, burst, sr, band_pair(words[w]), rng);
    }

    std::vector<std::string> source, reference, wrong;
    GenderEvalEntry entry;
    for (std::size_t w : words) {
      const GrammarEntry& e =
          w < g.neutral.size() ? g.neutral[w] : g.gendered[w - g.neutral.size()];
      source.push_back(e.source);
      reference.push_back(e.form(gender));
      wrong.push_back(e.form(perturb::opposite(gender)));
      if (e.gendered()) entry.term_pairs.push_back({e.form(gender), e.form(perturb::opposite(gender))});
    }
    char id[32];
    std::snprintf(id, sizeof id, "utt%05zu", u);
    auto join = [](const std::vector<std::string>& ws) {
      std::string s;
      for (const auto& w : ws) s += (s.empty() ? "" : " ") + w;
      return s;
    };

    Utterance utt;
    utt.id = id;
    utt.wav_path = "wav/" + utt.id + ".wav";
    utt.gender = gender;
    utt.source_text = join(source);
    utt.target_text = join(reference);
    utt.audio = audio::Waveform(std::move(x), sr);
    entry.id = utt.id;
    entry.reference = std::move(reference);
    entry.wrong_reference = std::move(wrong);
    corpus.utterances.push_back(std::move(utt));
    corpus.entries.push_back(std::move(entry));
    corpus.f0.push_back(f0);
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "wav");
  for (const auto& u : corpus.utterances) {
    if (!u.audio) throw Error(Errc::InvalidArgument, "utterance " + u.id + " has no audio");
    audio::write_wav(*u.audio, dir / u.wav_path);
  }
  write_manifest(corpus.utterances, dir / "manifest.tsv");
  write_eval_tsv(corpus.entries, dir / "eval.tsv");
}

}  // namespace voxtag::synth
