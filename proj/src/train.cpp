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

#include "voxtag/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"
#include "voxtag/error.hpp"
#include "voxtag/rng.hpp"

namespace voxtag::train {

using perturb::SpeakerGender;

namespace {

constexpr double kDivergenceFactor = 10.0;

// Runs fn(i) for i in [0, n) on up to worker_threads() threads. The first
// exception is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers = std::min(worker_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> xavier(std::size_t in, std::size_t out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-a, a);
  std::vector<double> w(in * out);
  for (double& v : w) v = u(rng);
  return w;
}

std::vector<std::size_t> shuffled(std::size_t n, Rng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

std::string_view to_string(Strategy s) noexcept {
  return s == Strategy::Scratch ? "scratch" : "fine_tune";
}

Strategy parse_strategy(std::string_view s) {
  if (s == "scratch") return Strategy::Scratch;
  if (s == "fine_tune") return Strategy::FineTune;
  throw Error(Errc::InvalidArgument, "unknown strategy '" + std::string(s) + "'");
}

std::int64_t TrainConfig::checkpoint_interval() const noexcept {
  if (checkpoint_every > 0) return checkpoint_every;
  return std::max<std::int64_t>(1, total_updates / 10);
}

void TrainConfig::validate() const {
  if (total_updates < 1) throw Error(Errc::InvalidArgument, "total_updates must be positive");
  if (warmup_updates < 1 || warmup_updates > total_updates) {
    throw Error(Errc::InvalidArgument, "warmup_updates must lie in [1, total_updates]");
  }
  if (!(lr_peak > 0.0) || !std::isfinite(lr_peak)) {
    throw Error(Errc::InvalidArgument, "lr_peak must be positive");
  }
  if (batch_size == 0) throw Error(Errc::InvalidArgument, "batch_size must be positive");
  if (average_last == 0) throw Error(Errc::InvalidArgument, "average_last must be positive");
  if (checkpoint_every < 0) throw Error(Errc::InvalidArgument, "checkpoint_every must be >= 0");
  const auto saved = static_cast<std::size_t>(total_updates / checkpoint_interval());
  if (average_last > saved) {
    throw Error(Errc::InvalidArgument, "average_last exceeds the number of saved checkpoints (" +
                                           std::to_string(saved) + ")");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction <= 0.5)) {
    throw Error(Errc::InvalidArgument, "validation_fraction must lie in [0, 0.5]");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
        adam_eps > 0.0)) {
    throw Error(Errc::InvalidArgument, "Adam needs betas in [0, 1) and eps > 0");
  }
  if (grl_schedule) {
    if (grl_schedule->total_updates < 1) {
      throw Error(Errc::InvalidArgument, "grl_schedule.total_updates must be positive");
    }
    if (grl_schedule->fixed_lambda && !(*grl_schedule->fixed_lambda >= 0.0)) {
      throw Error(Errc::InvalidArgument, "fixed lambda must be >= 0");
    }
  }
  if (perturb) perturb->validate();
}

double noam_lr(std::int64_t step, std::int64_t warmup, double lr_peak) {
  if (step < 1 || warmup < 1) throw Error(Errc::InvalidArgument, "noam_lr needs step, warmup >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return lr_peak * std::min(s / w, std::sqrt(w / s));
}

Adam::Adam(std::vector<ad::Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const auto g = p.grad();
    auto w = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
    p.zero_grad();
  }
}

std::string to_jsonl(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["lr"] = r.lr;
  j["translation_loss"] = r.translation_loss;
  j["disc_loss"] = r.disc_loss ? nlohmann::ordered_json(*r.disc_loss) : nullptr;
  j["lambda"] = r.lambda ? nlohmann::ordered_json(*r.lambda) : nullptr;
  return j.dump();
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("VOXTAG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<dsp::FeatureMatrix> compute_features(std::span<const Utterance> utts,
                                                 const std::filesystem::path& base) {
  std::vector<dsp::FeatureMatrix> out(utts.size());
  parallel_for(utts.size(), [&](std::size_t i) {
    out[i] = dsp::logmel_features(utts[i].load_audio(base), false);
  });
  return out;
}

EpochFeatures perturbed_features(std::span<const Utterance> utts, const perturb::PerturbConfig& cfg,
                                 std::uint64_t epoch, const std::filesystem::path& base) {
  EpochFeatures out;
  out.features.resize(utts.size());
  std::vector<char> manipulated(utts.size(), 0);
  parallel_for(utts.size(), [&](std::size_t i) {
    const audio::Waveform w = utts[i].load_audio(base);
    Rng rng = perturb::perturb_stream(cfg, i, epoch);
    try {
      const perturb::Manipulation m = perturb::apply_opposite(w, utts[i].gender, cfg, rng);
      manipulated[i] = m.manipulated;
      out.features[i] = dsp::logmel_features(m.audio, false);
    } catch (const Error& e) {
      if (e.code() != Errc::AllUnvoiced && e.code() != Errc::ZeroSourceMedian) throw;
      out.features[i] = dsp::logmel_features(w, false);
    }
  });
  out.manipulated.assign(manipulated.begin(), manipulated.end());
  return out;
}

std::pair<std::vector<model::TokenId>, std::vector<model::TokenId>> teacher_forcing_pair(
    const model::Seq2Seq& m, const Utterance& u) {
  const std::vector<model::TokenId> target = m.vocab().encode(u.target_text);
  if (target.size() + 1 > m.config().max_target_len) {
    throw Error(Errc::InvalidArgument, "target of '" + u.id + "' exceeds max_target_len");
  }
  std::vector<model::TokenId> in;
  in.reserve(target.size() + 1);
  in.push_back(model::start_token(m.config().mode, u.gender));
  in.insert(in.end(), target.begin(), target.end());
  std::vector<model::TokenId> out = target;
  out.push_back(model::kEos);
  return {std::move(in), std::move(out)};
}

double translation_loss(const model::Seq2Seq& m, std::span<const Utterance> utts,
                        std::span<const dsp::FeatureMatrix> features) {
  if (utts.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto [in, out] = teacher_forcing_pair(m, utts[i]);
    const ad::Tensor probs = m.decode(m.encode(features[i]), in);
    total += model::label_smoothed_ce(probs, out, m.config().label_smoothing).item();
  }
  return total / static_cast<double>(utts.size());
}

TrainResult train_loop(std::span<const Utterance> corpus, const model::ModelConfig& model_cfg,
                       const TrainConfig& train_cfg, const model::Seq2Seq* init,
                       const std::filesystem::path& base, const TrainHooks& hooks) {
  model_cfg.validate();
  train_cfg.validate();
  if (corpus.empty()) throw Error(Errc::EmptyList, "training corpus is empty");
  const bool fine_tune = train_cfg.strategy == Strategy::FineTune;
  if (fine_tune && init == nullptr) {
    throw Error(Errc::Precondition, "fine_tune needs an initial checkpoint");
  }
  const model::Mode mode = model_cfg.mode;
  const bool specialized = mode == model::Mode::SpecializedF || mode == model::Mode::SpecializedM;
  if (train_cfg.use_grl && specialized) {
    throw Error(Errc::InvalidArgument, "the discriminator is unavailable in specialized modes");
  }
  if (specialized) {
    const auto want = mode == model::Mode::SpecializedF ? SpeakerGender::F : SpeakerGender::M;
    for (const auto& u : corpus) {
      if (u.gender != want) {
        throw Error(Errc::Precondition, std::string(model::to_string(mode)) +
                                            " needs a gender-filtered corpus; '" + u.id +
                                            "' is " + std::string(perturb::to_string(u.gender)));
      }
    }
  }

  // Held-out split, reported in corpus order.
  TrainResult result{model::Seq2Seq::zero_initialized(model_cfg, model::Vocabulary()), {}, {}, {},
                     {}, {}, {}};
  {
    std::size_t n_val = 0;
    if (train_cfg.validation_fraction > 0.0 && corpus.size() >= 2) {
      n_val = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::llround(train_cfg.validation_fraction *
                                                static_cast<double>(corpus.size()))),
          1, corpus.size() - 1);
    }
    auto order = shuffled(corpus.size(), substream({train_cfg.seed, 0x76616c69}));
    result.validation_indices.assign(order.begin(), order.begin() + static_cast<long>(n_val));
    result.train_indices.assign(order.begin() + static_cast<long>(n_val), order.end());
    std::sort(result.validation_indices.begin(), result.validation_indices.end());
    std::sort(result.train_indices.begin(), result.train_indices.end());
  }
  std::vector<Utterance> train_utts;
  std::vector<Utterance> val_utts;
  for (std::size_t i : result.train_indices) train_utts.push_back(corpus[i]);
  for (std::size_t i : result.validation_indices) val_utts.push_back(corpus[i]);
  parallel_for(train_utts.size(), [&](std::size_t i) {
    if (!train_utts[i].audio) train_utts[i].audio = train_utts[i].load_audio(base);
  });

  const std::vector<dsp::FeatureMatrix> clean = compute_features(train_utts);
  const std::vector<dsp::FeatureMatrix> val_features = compute_features(val_utts, base);

  if (fine_tune) {
    model::ModelConfig cfg = model_cfg;
    model::Seq2Seq m(cfg, init->vocab(), train_cfg.seed);
    m.load_checkpoint(init->to_checkpoint());
    if (mode == model::Mode::MultiGender) m.init_tags_from_bos();
    result.model = std::move(m);
  } else {
    std::vector<std::string> texts;
    texts.reserve(corpus.size());
    for (const auto& u : corpus) texts.push_back(u.target_text);
    model::Seq2Seq m(model_cfg, model::Vocabulary::from_texts(texts), train_cfg.seed);
    dsp::CmvnStats stats;
    for (const auto& f : clean) stats.accumulate(f);
    m.set_normalizer(stats);
    result.model = std::move(m);
  }
  model::Seq2Seq& m = result.model;

  std::optional<model::ClassWeights> weights;
  ad::LambdaSchedule schedule;
  if (train_cfg.use_grl) {
    const auto n_f = static_cast<double>(std::count_if(
        train_utts.begin(), train_utts.end(), [](const Utterance& u) { return u.gender == SpeakerGender::F; }));
    const auto n = static_cast<double>(train_utts.size());
    weights = model::compute_class_weights(n_f / n, (n - n_f) / n);
    if (train_cfg.grl_schedule) {
      schedule = *train_cfg.grl_schedule;
    } else {
      schedule.fixed_lambda = fine_tune ? 10.0 : 0.5;
      schedule.total_updates = train_cfg.total_updates;
    }
  }

  std::optional<perturb::PerturbConfig> pcfg = train_cfg.perturb;
  if (pcfg) pcfg->seed = train_cfg.seed;

  double initial_val = 0.0;
  auto validate_now = [&](std::int64_t step) {
    if (val_utts.empty()) return;
    const double loss = translation_loss(m, val_utts, val_features);
    result.validation.push_back({step, loss});
    if (step == 0) initial_val = loss;
    if (!std::isfinite(loss) || loss > kDivergenceFactor * initial_val) {
      throw Error(Errc::DivergedLoss, "validation loss " + std::to_string(loss) + " at step " +
                                          std::to_string(step) + " (initial " +
                                          std::to_string(initial_val) + ")");
    }
  };
  validate_now(0);

  Adam opt(m.trainable(), train_cfg.adam_beta1, train_cfg.adam_beta2, train_cfg.adam_eps);
  const std::int64_t interval = train_cfg.checkpoint_interval();
  const double inv_batch = 1.0 / static_cast<double>(train_cfg.batch_size);

  std::uint64_t epoch = 0;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::vector<dsp::FeatureMatrix> epoch_features;
  const std::vector<dsp::FeatureMatrix>* features = &clean;
  auto start_epoch = [&] {
    order = shuffled(train_utts.size(), substream({train_cfg.seed, epoch, 0x6f726472}));
    cursor = 0;
    if (pcfg) {
      epoch_features = perturbed_features(train_utts, *pcfg, epoch).features;
      features = &epoch_features;
    }
    ++epoch;
  };
  start_epoch();

  for (std::int64_t step = 1; step <= train_cfg.total_updates; ++step) {
    const double lambda =
        train_cfg.use_grl ? ad::lambda_at(schedule, std::min(step - 1, schedule.total_updates)) : 0.0;
    Rng dropout_rng = substream({train_cfg.seed, static_cast<std::uint64_t>(step), 0x64726f70});
    Rng* drop = model_cfg.dropout > 0.0 ? &dropout_rng : nullptr;
    double tl_sum = 0.0;
    double dl_sum = 0.0;
    for (std::size_t b = 0; b < train_cfg.batch_size; ++b) {
      if (cursor == order.size()) start_epoch();
      const std::size_t i = order[cursor++];
      const Utterance& u = train_utts[i];
      const auto [in, out] = teacher_forcing_pair(m, u);
      const ad::Tensor enc = m.encode((*features)[i], drop);
      const ad::Tensor tl =
          model::label_smoothed_ce(m.decode(enc, in, drop), out, model_cfg.label_smoothing);
      std::optional<ad::Tensor> dl;
      if (train_cfg.use_grl) {
        dl = model::weighted_disc_loss(m.discriminate(enc, lambda), u.gender, *weights);
        dl_sum += dl->item();
      }
      tl_sum += tl.item();
      ad::backward(ad::mul(model::combined_loss(tl, dl, model_cfg), inv_batch));
    }
    const double lr = noam_lr(step, train_cfg.warmup_updates, train_cfg.lr_peak);
    opt.step(lr);

    MetricsRecord rec;
    rec.step = step;
    rec.lr = lr;
    rec.translation_loss = tl_sum * inv_batch;
    if (train_cfg.use_grl) {
      rec.disc_loss = dl_sum * inv_batch;
      rec.lambda = lambda;
    }
    result.metrics.push_back(rec);
    if (hooks.on_update) hooks.on_update(rec);

    if (step % interval == 0) {
      result.checkpoints.push_back(m.to_checkpoint());
      result.checkpoint_steps.push_back(step);
      validate_now(step);
    }
  }
  return result;
}

ad::Checkpoint average_checkpoints(std::span<const ad::Checkpoint> ckpts) {
  if (ckpts.empty()) throw Error(Errc::EmptyList, "no checkpoints to average");
  ad::Checkpoint out = ckpts.front();
  for (std::size_t k = 1; k < ckpts.size(); ++k) {
    const auto& c = ckpts[k];
    if (c.size() != out.size()) {
      throw Error(Errc::ShapeMismatch, "checkpoints hold different numbers of arrays");
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i].name != out[i].name || c[i].shape != out[i].shape) {
        throw Error(Errc::ShapeMismatch, "array " + std::to_string(i) + " differs: '" +
                                             out[i].name + "' " + ad::shape_string(out[i].shape) +
                                             " vs '" + c[i].name + "' " +
                                             ad::shape_string(c[i].shape));
      }
      for (std::size_t j = 0; j < c[i].values.size(); ++j) out[i].values[j] += c[i].values[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(ckpts.size());
  for (auto& a : out) {
    for (double& v : a.values) v *= inv;
  }
  return out;
}

ProbeResult probe_discriminator(const model::Seq2Seq& m, std::span<const Utterance> held_out,
                                std::span<const dsp::FeatureMatrix> features,
                                const ProbeConfig& cfg) {
  if (features.size() != held_out.size()) {
    throw Error(Errc::ShapeMismatch, "one feature matrix per utterance expected");
  }
  if (!(cfg.fit_fraction > 0.0 && cfg.fit_fraction < 1.0) || cfg.steps == 0 || !(cfg.lr > 0.0)) {
    throw Error(Errc::InvalidArgument, "probe needs fit_fraction in (0, 1), steps > 0, lr > 0");
  }
  std::vector<std::size_t> by_gender[2];
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    by_gender[held_out[i].gender == SpeakerGender::F ? 0 : 1].push_back(i);
  }
  if (by_gender[0].empty() || by_gender[1].empty()) {
    throw Error(Errc::SingleClassData, "probe data must contain both genders");
  }

  // Stratified split; each gender contributes at least one fitting example.
  std::vector<std::size_t> fit;
  std::vector<std::size_t> test;
  for (int g = 0; g < 2; ++g) {
    Rng rng = substream({cfg.seed, static_cast<std::uint64_t>(g), 0x70726f62});
    auto& idx = by_gender[g];
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_fit = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.fit_fraction * static_cast<double>(idx.size()))));
    fit.insert(fit.end(), idx.begin(), idx.begin() + static_cast<long>(n_fit));
    test.insert(test.end(), idx.begin() + static_cast<long>(n_fit), idx.end());
  }
  std::sort(fit.begin(), fit.end());
  std::sort(test.begin(), test.end());
  if (test.empty()) throw Error(Errc::InvalidArgument, "probe has no utterances left to score");

  std::vector<ad::Tensor> enc(held_out.size());
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    const ad::Tensor e = m.encode(features[i]);
    enc[i] = ad::Tensor::constant(e.shape(), std::vector<double>(e.values().begin(), e.values().end()));
  }

  const std::size_t h = m.config().hidden_dim;
  const std::size_t dh = m.config().disc_hidden;
  Rng rng = substream({cfg.seed, 0x696e6974});
  ad::Tensor w1 = ad::Tensor::parameter({h, dh}, xavier(h, dh, rng));
  ad::Tensor b1 = ad::Tensor::parameter({dh}, std::vector<double>(dh, 0.0));
  ad::Tensor w2 = ad::Tensor::parameter({dh, 2}, xavier(dh, 2, rng));
  ad::Tensor b2 = ad::Tensor::parameter({2}, std::vector<double>(2, 0.0));
  auto logits = [&](const ad::Tensor& x) {
    const ad::Tensor hid = ad::relu(ad::add(ad::matmul(x, w1), b1));
    return ad::mean(ad::add(ad::matmul(hid, w2), b2), 0);
  };
  const model::ClassWeights unit{1.0, 1.0};

  Adam opt({w1, b1, w2, b2}, 0.9, 0.999, 1e-8);
  const double inv = 1.0 / static_cast<double>(fit.size());
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    for (std::size_t i : fit) {
      ad::backward(ad::mul(model::weighted_disc_loss(logits(enc[i]), held_out[i].gender, unit), inv));
    }
    opt.step(cfg.lr);
  }

  std::size_t correct = 0;
  for (std::size_t i : test) {
    const auto v = logits(enc[i]).values();
    const SpeakerGender pred = v[0] > v[1] ? SpeakerGender::F : SpeakerGender::M;
    correct += pred == held_out[i].gender;
  }
  return {static_cast<double>(correct) / static_cast<double>(test.size()), fit.size(), test.size()};
}

}  // namespace voxtag::train
