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


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "voxtag/audio.hpp"
#include "voxtag/autodiff.hpp"
#include "voxtag/corpus.hpp"
#include "voxtag/dsp.hpp"
#include "voxtag/error.hpp"
#include "voxtag/eval.hpp"
#include "voxtag/model.hpp"
#include "voxtag/perturb.hpp"
#include "voxtag/synthdata.hpp"
#include "voxtag/train.hpp"

namespace py = pybind11;
using namespace voxtag;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

audio::Waveform to_waveform(const Array& samples, int sample_rate) {
  if (samples.ndim() != 1) throw Error(Errc::ShapeMismatch, "samples must be one-dimensional");
  return {std::vector<double>(samples.data(), samples.data() + samples.size()), sample_rate};
}

Array to_array(std::span<const double> v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<audio::FormantPeak> to_peaks(const std::vector<std::pair<double, double>>& peaks) {
  std::vector<audio::FormantPeak> out;
  for (const auto& [hz, gain] : peaks) out.push_back({hz, gain});
  return out;
}

GenderEvalEntry to_entry(const py::dict& d) {
  GenderEvalEntry e;
  e.id = d["id"].cast<std::string>();
  e.reference = d["reference"].cast<std::vector<std::string>>();
  e.wrong_reference = d.contains("wrong_reference") ? d["wrong_reference"].cast<std::vector<std::string>>()
                                                     : std::vector<std::string>{};
  for (const auto& [c, w] : d["term_pairs"].cast<std::vector<std::pair<std::string, std::string>>>()) {
    e.term_pairs.push_back({c, w});
  }
  return e;
}

py::dict accuracy_dict(const eval::GenderAccuracyReport& r) {
  py::dict d;
  d["total_terms"] = r.total_terms;
  d["found"] = r.found;
  d["correct"] = r.correct;
  d["accuracy"] = r.accuracy ? py::cast(*r.accuracy) : py::none();
  d["coverage"] = r.coverage;
  return d;
}

std::vector<dsp::FeatureMatrix> corpus_features(const std::vector<Utterance>& utts, const std::filesystem::path& dir) {
  return train::compute_features(utts, dir);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gender-tagged speech translation toolkit";
  py::register_exception<Error>(m, "VoxtagError", PyExc_RuntimeError);

  m.def(
      "synth_harmonic",
      [](double f0, const std::vector<std::pair<double, double>>& formants, double duration, int sample_rate) {
        const auto peaks = to_peaks(formants);
        return to_array(audio::synth_harmonic(f0, peaks, duration, sample_rate).samples());
      },
      py::arg("f0"), py::arg("formants") = std::vector<std::pair<double, double>>{}, py::arg("duration") = 1.0,
      py::arg("sample_rate") = audio::kDefaultSampleRate,
      "Harmonic tone at f0 with a spectral envelope through (hz, gain) formant peaks.");
  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        const auto w = audio::read_wav(path);
        return py::make_tuple(to_array(w.samples()), w.sample_rate());
      },
      py::arg("path"), "Returns (samples, sample_rate).");
  m.def(
      "write_wav",
      [](const std::filesystem::path& path, const Array& samples, int sample_rate) {
        audio::write_wav(to_waveform(samples, sample_rate), path);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = audio::kDefaultSampleRate);

  m.def(
      "f0_contour",
      [](const Array& samples, int sample_rate) {
        return to_array(dsp::estimate_f0_contour(to_waveform(samples, sample_rate)).frame_hz);
      },
      py::arg("samples"), py::arg("sample_rate") = audio::kDefaultSampleRate, "Per-frame f0 in Hz, 0 when unvoiced.");
  m.def(
      "voiced_median", [](const Array& frame_hz) { return dsp::voiced_median(std::span(frame_hz.data(), frame_hz.size())); },
      py::arg("frame_hz"));
  m.def(
      "logmel_features",
      [](const Array& samples, int sample_rate, bool cmvn) {
        const auto f = dsp::logmel_features(to_waveform(samples, sample_rate), cmvn);
        Array out({static_cast<py::ssize_t>(f.frames), static_cast<py::ssize_t>(dsp::kMelBins)});
        std::copy(f.values.begin(), f.values.end(), out.mutable_data());
        return out;
      },
      py::arg("samples"), py::arg("sample_rate") = audio::kDefaultSampleRate, py::arg("cmvn") = true,
      "frames x 80 log-mel matrix.");
  m.def(
      "envelope_peak_hz",
      [](const Array& samples, int sample_rate, double lo_hz, double hi_hz) {
        return dsp::envelope_peak_hz(to_waveform(samples, sample_rate), lo_hz, hi_hz);
      },
      py::arg("samples"), py::arg("sample_rate") = audio::kDefaultSampleRate, py::arg("lo_hz") = 300.0,
      py::arg("hi_hz") = 1500.0);

  m.def("compute_alpha", &perturb::compute_alpha, py::arg("source_median"), py::arg("target_median"));
  m.def(
      "pitch_formant_shift",
      [](const Array& samples, double alpha, double formant_scale, int sample_rate) {
        return to_array(perturb::pitch_formant_shift(to_waveform(samples, sample_rate), alpha, formant_scale).samples());
      },
      py::arg("samples"), py::arg("alpha"), py::arg("formant_scale") = 1.0,
      py::arg("sample_rate") = audio::kDefaultSampleRate);
  m.def(
      "apply_opposite",
      [](const Array& samples, const std::string& gender, double p, std::uint64_t seed, std::uint64_t utterance_index,
         std::uint64_t epoch, int sample_rate) {
        perturb::PerturbConfig cfg;
        cfg.p = p;
        cfg.seed = seed;
        cfg.validate();
        Rng rng = perturb::perturb_stream(cfg, utterance_index, epoch);
        const auto r = perturb::apply_opposite(to_waveform(samples, sample_rate), perturb::parse_gender(gender), cfg, rng);
        py::dict d;
        d["audio"] = to_array(r.audio.samples());
        d["manipulated"] = r.manipulated;
        d["alpha"] = r.alpha;
        d["formant_scale"] = r.formant_scale;
        d["target_median"] = r.target_median;
        return d;
      },
      py::arg("samples"), py::arg("gender"), py::arg("p") = 0.5, py::arg("seed") = 0, py::arg("utterance_index") = 0,
      py::arg("epoch") = 0, py::arg("sample_rate") = audio::kDefaultSampleRate,
      "Opposite-gender manipulation with the (seed, utterance, epoch) random stream.");

  m.def(
      "lambda_at",
      [](std::int64_t step, std::int64_t total_updates, double gamma, std::optional<double> fixed) {
        ad::LambdaSchedule s;
        s.gamma = gamma;
        s.total_updates = total_updates;
        s.fixed_lambda = fixed;
        return ad::lambda_at(s, step);
      },
      py::arg("step"), py::arg("total_updates"), py::arg("gamma") = 10.0, py::arg("fixed") = py::none());
  m.def(
      "compute_class_weights",
      [](double f_f, double f_m) {
        const auto w = model::compute_class_weights(f_f, f_m);
        return py::make_tuple(w.w_f, w.w_m);
      },
      py::arg("f_f"), py::arg("f_m"), "Returns (w_f, w_m).");
  m.def("noam_lr", &train::noam_lr, py::arg("step"), py::arg("warmup"), py::arg("lr_peak"));

  m.def(
      "gender_accuracy",
      [](const std::map<std::string, std::vector<std::string>>& hypotheses, const std::vector<py::dict>& entries) {
        std::vector<GenderEvalEntry> es;
        for (const auto& d : entries) es.push_back(to_entry(d));
        return accuracy_dict(eval::gender_accuracy(hypotheses, es));
      },
      py::arg("hypotheses"), py::arg("entries"),
      "hypotheses: id -> tokens; entries: dicts with id, reference and term_pairs [(correct, wrong)].");
  m.def(
      "corpus_bleu",
      [](const std::vector<std::vector<std::string>>& hyps, const std::vector<std::vector<std::string>>& refs) {
        return eval::corpus_bleu(hyps, refs);
      },
      py::arg("hypotheses"), py::arg("references"));

  m.def(
      "generate_corpus",
      [](const std::filesystem::path& out_dir, std::size_t n_utterances, double gender_split, std::uint64_t seed) {
        synth::SynthSpec spec;
        spec.n_utterances = n_utterances;
        spec.gender_split = gender_split;
        spec.seed = seed;
        synth::write_corpus(synth::generate_corpus(spec), out_dir);
      },
      py::arg("out_dir"), py::arg("n_utterances") = 200, py::arg("gender_split") = 0.3, py::arg("seed") = 0,
      "Writes wav/, manifest.tsv and eval.tsv under out_dir.");
  m.def(
      "evaluate",
      [](const std::filesystem::path& model_path, const std::filesystem::path& corpus_dir) {
        const auto mdl = model::load_model(model_path);
        const auto utts = read_manifest(corpus_dir / "manifest.tsv");
        const auto entries = read_eval_tsv(corpus_dir / "eval.tsv");
        const auto feats = corpus_features(utts, corpus_dir);
        const auto r = mdl.config().mode == model::Mode::MultiGender
                           ? eval::tag_inversion_eval(mdl, utts, feats, entries)
                           : eval::matched_eval(mdl, utts, feats, entries);
        return eval::to_json(r);
      },
      py::arg("model_path"), py::arg("corpus_dir"), "JSON report with per-bucket accuracy and BLEU.");
}
