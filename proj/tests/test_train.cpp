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


#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "voxtag/error.hpp"
#include "voxtag/synthdata.hpp"
#include "voxtag/train.hpp"

using namespace voxtag;
using perturb::SpeakerGender;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Io;
}

std::vector<Utterance> small_corpus(std::size_t n, std::uint64_t seed) {
  synth::SynthSpec spec;
  spec.n_utterances = n;
  spec.seed = seed;
  return synth::generate_corpus(spec).utterances;
}

model::ModelConfig small_model(model::Mode mode) {
  model::ModelConfig c;
  c.hidden_dim = 16;
  c.ff_dim = 32;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.disc_hidden = 8;
  c.mode = mode;
  return c;
}

train::TrainConfig short_run(std::int64_t updates, std::uint64_t seed) {
  train::TrainConfig t;
  t.total_updates = updates;
  t.warmup_updates = std::max<std::int64_t>(1, updates / 10);
  t.batch_size = 4;
  t.average_last = 2;
  t.seed = seed;
  return t;
}

bool same_checkpoint(const ad::Checkpoint& a, const ad::Checkpoint& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].shape != b[i].shape || a[i].values != b[i].values) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("noam_lr: ramp and decay") {
  CHECK(train::noam_lr(200, 200, 2e-3) == 2e-3);
  CHECK(train::noam_lr(100, 200, 2e-3) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(train::noam_lr(800, 200, 2e-3) == doctest::Approx(1e-3).epsilon(1e-15));
  double prev = 0.0;
  for (std::int64_t s = 1; s <= 200; ++s) {
    const double lr = train::noam_lr(s, 200, 2e-3);
    CHECK(lr > prev);
    prev = lr;
  }
  for (std::int64_t s = 201; s <= 2000; ++s) {
    const double lr = train::noam_lr(s, 200, 2e-3);
    CHECK(lr < prev);
    prev = lr;
  }
  CHECK(code_of([] { train::noam_lr(0, 200, 2e-3); }) == Errc::InvalidArgument);
  CHECK(code_of([] { train::noam_lr(1, 0, 2e-3); }) == Errc::InvalidArgument);
}

TEST_CASE("Adam: first step moves each weight by lr against the gradient sign") {
  auto w = ad::Tensor::parameter({3}, {1.0, -2.0, 0.5});
  train::Adam opt({w}, 0.9, 0.98, 1e-9);
  ad::backward(ad::sum(ad::mul(w, ad::Tensor::constant({3}, {2.0, -0.5, 0.0}))));
  opt.step(0.1);
  CHECK(w.values()[0] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(w.values()[1] == doctest::Approx(-1.9).epsilon(1e-9));
  CHECK(w.values()[2] == 0.5);
  CHECK(opt.steps_taken() == 1);
  for (double g : w.grad()) CHECK(g == 0.0);
}

TEST_CASE("Adam: minimizes a quadratic") {
  auto w = ad::Tensor::parameter({2}, {3.0, -4.0});
  train::Adam opt({w}, 0.9, 0.98, 1e-9);
  for (int i = 0; i < 500; ++i) {
    ad::backward(ad::sum(ad::mul(w, w)));
    opt.step(0.05);
  }
  CHECK(std::abs(w.values()[0]) < 1e-2);
  CHECK(std::abs(w.values()[1]) < 1e-2);
}

TEST_CASE("TrainConfig: invariants") {
  train::TrainConfig t;
  CHECK_NOTHROW(t.validate());
  CHECK(t.checkpoint_interval() == 200);
  t.warmup_updates = 3000;
  CHECK(code_of([&] { t.validate(); }) == Errc::InvalidArgument);
  t = {};
  t.average_last = 11;
  CHECK(code_of([&] { t.validate(); }) == Errc::InvalidArgument);
  t = {};
  t.batch_size = 0;
  CHECK(code_of([&] { t.validate(); }) == Errc::InvalidArgument);
  CHECK(train::parse_strategy("fine_tune") == train::Strategy::FineTune);
  CHECK(train::to_string(train::Strategy::Scratch) == "scratch");
  CHECK_THROWS_AS(train::parse_strategy("warm"), Error);
}

TEST_CASE("average_checkpoints") {
  const ad::Checkpoint a{{"w", {2}, {0.0, 1.0}}, {"b", {1}, {4.0}}};
  SUBCASE("identical inputs") {
    const std::vector<ad::Checkpoint> seven(7, a);
    CHECK(same_checkpoint(train::average_checkpoints(seven), a));
  }
  SUBCASE("0 and 2 average to 1") {
    const std::vector<ad::Checkpoint> two{{{"x", {1}, {0.0}}}, {{"x", {1}, {2.0}}}};
    CHECK(train::average_checkpoints(two)[0].values[0] == 1.0);
  }
  SUBCASE("sum over k oracle") {
    Rng rng(5);
    std::vector<ad::Checkpoint> cks;
    for (int k = 0; k < 5; ++k) {
      cks.push_back({{"w", {3, 4}, voxtag::testing::normal_values(12, rng)},
                     {"v", {7}, voxtag::testing::normal_values(7, rng, 100.0)}});
    }
    const auto avg = train::average_checkpoints(cks);
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::size_t j = 0; j < avg[p].values.size(); ++j) {
        long double sum = 0.0L;
        for (const auto& c : cks) sum += c[p].values[j];
        CHECK(std::abs(avg[p].values[j] - static_cast<double>(sum / 5.0L)) <= 1e-12);
      }
    }
  }
  SUBCASE("errors") {
    CHECK(code_of([] { train::average_checkpoints({}); }) == Errc::EmptyList);
    const std::vector<ad::Checkpoint> bad{a, {{"w", {3}, {0, 0, 0}}, {"b", {1}, {4.0}}}};
    CHECK(code_of([&] { train::average_checkpoints(bad); }) == Errc::ShapeMismatch);
    const std::vector<ad::Checkpoint> renamed{a, {{"u", {2}, {0, 0}}, {"b", {1}, {4.0}}}};
    CHECK(code_of([&] { train::average_checkpoints(renamed); }) == Errc::ShapeMismatch);
  }
}

TEST_CASE("MetricsRecord: one JSON object per line") {
  train::MetricsRecord r;
  r.step = 12;
  r.lr = 1e-3;
  r.translation_loss = 2.5;
  auto j = nlohmann::json::parse(train::to_jsonl(r));
  CHECK(j["step"] == 12);
  CHECK(j["translation_loss"] == 2.5);
  CHECK(j["disc_loss"].is_null());
  CHECK(j["lambda"].is_null());
  r.disc_loss = 0.7;
  r.lambda = 0.5;
  const auto line = train::to_jsonl(r);
  CHECK(line.find('\n') == std::string::npos);
  j = nlohmann::json::parse(line);
  CHECK(j["disc_loss"] == 0.7);
  CHECK(j["lambda"] == 0.5);
}

TEST_CASE("train_loop: preconditions") {
  const auto corpus = small_corpus(12, 1);
  auto cfg = short_run(4, 1);
  cfg.strategy = train::Strategy::FineTune;
  CHECK(code_of([&] { train::train_loop(corpus, small_model(model::Mode::MultiGender), cfg); }) ==
        Errc::Precondition);
  CHECK(code_of([&] { train::train_loop(corpus, small_model(model::Mode::SpecializedF), short_run(4, 1)); }) ==
        Errc::Precondition);
  auto grl = short_run(4, 1);
  grl.use_grl = true;
  std::vector<Utterance> only_m;
  for (const auto& u : corpus) {
    if (u.gender == SpeakerGender::M) only_m.push_back(u);
  }
  CHECK(code_of([&] { train::train_loop(only_m, small_model(model::Mode::SpecializedM), grl); }) ==
        Errc::InvalidArgument);
  CHECK(code_of([&] { train::train_loop({}, small_model(model::Mode::MultiGender), short_run(4, 1)); }) ==
        Errc::EmptyList);
}

TEST_CASE("train_loop: same seed, identical checkpoints and metrics") {
  const auto corpus = small_corpus(16, 2);
  auto cfg = short_run(20, 7);
  cfg.use_grl = true;
  perturb::PerturbConfig p;
  p.p = 0.5;
  cfg.perturb = p;
  const auto mcfg = small_model(model::Mode::MultiGender);
  const auto a = train::train_loop(corpus, mcfg, cfg);
  const auto b = train::train_loop(corpus, mcfg, cfg);
  REQUIRE(a.checkpoints.size() == 10);
  REQUIRE(a.checkpoints.size() == b.checkpoints.size());
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
    CHECK(same_checkpoint(a.checkpoints[i], b.checkpoints[i]));
  }
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(train::to_jsonl(a.metrics[i]) == train::to_jsonl(b.metrics[i]));
    CHECK(a.metrics[i].lambda == 0.5);
    CHECK(a.metrics[i].disc_loss.has_value());
  }
  CHECK(a.validation.front().step == 0);
  CHECK(a.checkpoint_steps.back() == 20);

  auto other = cfg;
  other.seed = 8;
  CHECK_FALSE(same_checkpoint(train::train_loop(corpus, mcfg, other).checkpoints.back(), a.checkpoints.back()));
}

TEST_CASE("train_loop: fine-tuning starts from the initial model's predictions") {
  const auto corpus = small_corpus(20, 3);
  const auto init = train::train_loop(corpus, small_model(model::Mode::GenderUnaware), short_run(10, 3)).model;
  auto cfg = short_run(10, 4);
  cfg.strategy = train::Strategy::FineTune;
  const auto ft = train::train_loop(corpus, small_model(model::Mode::MultiGender), cfg, &init);

  std::vector<Utterance> val;
  for (std::size_t i : ft.validation_indices) val.push_back(corpus[i]);
  const auto features = train::compute_features(val);
  REQUIRE_FALSE(ft.validation.empty());
  CHECK(ft.validation.front().step == 0);
  CHECK(ft.validation.front().translation_loss == train::translation_loss(init, val, features));
  CHECK(ft.model.vocab().size() == init.vocab().size());
}

TEST_CASE("train_loop: held-out loss halves on a small synthetic corpus") {
  const auto corpus = small_corpus(200, 11);
  model::ModelConfig mcfg;
  mcfg.mode = model::Mode::MultiGender;
  train::TrainConfig cfg;
  cfg.seed = 11;
  const auto r = train::train_loop(corpus, mcfg, cfg);
  REQUIRE(r.validation.size() == 11);
  const double initial = r.validation.front().translation_loss;
  CHECK(r.validation.back().translation_loss < 0.5 * initial);
  for (const auto& v : r.validation) CHECK(std::isfinite(v.translation_loss));
  // Decreasing over the first quarter.
  CHECK(r.validation[2].translation_loss < initial);
  CHECK(r.validation[1].translation_loss < initial);
}

TEST_CASE("perturbed_features: manipulated sets change from epoch to epoch") {
  std::vector<Utterance> utts;
  for (int i = 0; i < 200; ++i) {
    Utterance u;
    u.id = "u" + std::to_string(i);
    u.gender = i % 3 == 0 ? SpeakerGender::F : SpeakerGender::M;
    u.audio = audio::synth_harmonic(u.gender == SpeakerGender::F ? 240.0 : 130.0, {}, 0.05);
    utts.push_back(std::move(u));
  }
  perturb::PerturbConfig cfg;
  cfg.p = 0.5;
  cfg.seed = 21;
  std::vector<std::vector<bool>> sets;
  for (std::uint64_t e = 0; e < 4; ++e) sets.push_back(train::perturbed_features(utts, cfg, e).manipulated);
  // P(two epochs agree) = 0.5^200 + 0.5^200; the Hamming distance is Binomial(200, 0.5).
  for (std::size_t a = 0; a < sets.size(); ++a) {
    const double rate = static_cast<double>(std::count(sets[a].begin(), sets[a].end(), true)) / 200.0;
    CHECK(std::abs(rate - 0.5) < 0.15);
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      std::size_t diff = 0;
      for (std::size_t i = 0; i < 200; ++i) diff += sets[a][i] != sets[b][i];
      CHECK(diff > 60);
      CHECK(diff < 140);
    }
  }
  CHECK(train::perturbed_features(utts, cfg, 2).manipulated == sets[2]);
}

TEST_CASE("probe_discriminator: errors and the constant-encoder baseline") {
  const auto corpus = small_corpus(40, 5);
  const auto features = train::compute_features(corpus);
  std::vector<std::string> texts;
  for (const auto& u : corpus) texts.push_back(u.target_text);
  const auto zero = model::Seq2Seq::zero_initialized(small_model(model::Mode::GenderUnaware),
                                                     model::Vocabulary::from_texts(texts));

  const auto r = train::probe_discriminator(zero, corpus, features);
  CHECK(r.fit_count + r.test_count == corpus.size());
  std::size_t f_total = 0;
  for (const auto& u : corpus) f_total += u.gender == SpeakerGender::F;
  // Stratified split: the test half keeps the corpus's gender ratio, and a
  // constant input can only be assigned the majority class.
  const std::size_t n_f_test = f_total - static_cast<std::size_t>(std::llround(0.5 * static_cast<double>(f_total)));
  const double majority =
      static_cast<double>(std::max(n_f_test, r.test_count - n_f_test)) / static_cast<double>(r.test_count);
  CHECK(r.accuracy == doctest::Approx(majority).epsilon(1e-12));

  std::vector<Utterance> only_f;
  std::vector<dsp::FeatureMatrix> only_f_features;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].gender == SpeakerGender::F) {
      only_f.push_back(corpus[i]);
      only_f_features.push_back(features[i]);
    }
  }
  CHECK(code_of([&] { train::probe_discriminator(zero, only_f, only_f_features); }) == Errc::SingleClassData);
}
