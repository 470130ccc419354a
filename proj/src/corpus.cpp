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

#include "voxtag/corpus.hpp"

#include <fstream>
#include <sstream>

#include "voxtag/error.hpp"

namespace voxtag {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& ws) {
  std::string out;
  for (const auto& w : ws) out += (out.empty() ? "" : " ") + w;
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

void check_field(const std::string& s, const char* what) {
  if (s.find_first_of("\t\n") != std::string::npos) {
    throw Error(Errc::InvalidArgument, std::string(what) + " contains a tab or newline");
  }
}

}  // namespace

audio::Waveform Utterance::load_audio(const std::filesystem::path& base) const {
  if (audio) return *audio;
  std::filesystem::path p(wav_path);
  if (p.is_relative() && !base.empty()) p = base / p;
  return audio::read_wav(p);
}

void GenderEvalEntry::validate() const {
  if (term_pairs.empty()) throw Error(Errc::InvalidArgument, "entry " + id + " has no term pairs");
  for (const auto& t : term_pairs) {
    if (t.correct.empty() || t.wrong.empty() || t.correct == t.wrong) {
      throw Error(Errc::InvalidArgument, "entry " + id + " has a degenerate term pair");
    }
  }
}

GenderEvalEntry GenderEvalEntry::swapped() const {
  GenderEvalEntry e{id, wrong_reference, reference, {}};
  for (const auto& t : term_pairs) e.term_pairs.push_back({t.wrong, t.correct});
  return e;
}

void write_manifest(const std::vector<Utterance>& utts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open for writing: " + path.string());
  for (const auto& u : utts) {
    check_field(u.id, "id");
    check_field(u.wav_path, "wav_path");
    check_field(u.source_text, "source_text");
    check_field(u.target_text, "target_text");
    out << u.id << '\t' << u.wav_path << '\t' << perturb::to_string(u.gender) << '\t'
        << u.source_text << '\t' << u.target_text << '\n';
  }
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

std::vector<Utterance> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<Utterance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 5) {
      throw Error(Errc::MalformedHeader, path.string() + ":" + std::to_string(lineno) +
                                             ": expected 5 tab-separated fields");
    }
    Utterance u;
    u.id = f[0];
    u.wav_path = f[1];
    u.gender = perturb::parse_gender(f[2]);
    u.source_text = f[3];
    u.target_text = f[4];
    out.push_back(std::move(u));
  }
  return out;
}

void write_eval_tsv(const std::vector<GenderEvalEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open for writing: " + path.string());
  for (const auto& e : entries) {
    e.validate();
    out << e.id << '\t' << join(e.reference) << '\t' << join(e.wrong_reference) << '\t';
    for (std::size_t i = 0; i < e.term_pairs.size(); ++i) {
      out << (i ? ";" : "") << e.term_pairs[i].correct << '|' << e.term_pairs[i].wrong;
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

std::vector<GenderEvalEntry> read_eval_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<GenderEvalEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto f = split(line, '\t');
    if (f.size() != 4) throw Error(Errc::MalformedHeader, where + ": expected 4 fields");
    GenderEvalEntry e{f[0], words(f[1]), words(f[2]), {}};
    for (const auto& pair : split(f[3], ';')) {
      const auto bar = pair.find('|');
      if (bar == std::string::npos) throw Error(Errc::MalformedHeader, where + ": bad term pair");
      e.term_pairs.push_back({pair.substr(0, bar), pair.substr(bar + 1)});
    }
    try {
      e.validate();
    } catch (const Error& err) {
      throw Error(Errc::MalformedHeader, where + ": " + err.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace voxtag
