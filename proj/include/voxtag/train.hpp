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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxtag/autodiff.hpp"
#include "voxtag/corpus.hpp"
#include "voxtag/dsp.hpp"
#include "voxtag/model.hpp"
#include "voxtag/perturb.hpp"

namespace voxtag::train {

enum class Strategy { Scratch, FineTune };

std::string_view to_string(Strategy s) noexcept;
/// scratch | fine_tune.
Strategy parse_strategy(std::string_view s);

struct TrainConfig {
  Strategy strategy = Strategy::Scratch;
  bool use_grl = false;
  /// Unset: fixed lambda 0.5 from scratch, 10 when fine-tuning.
  std::optional<ad::LambdaSchedule> grl_schedule;
  /// Applied to every training utterance once per epoch. Its seed is
  /// replaced by the run seed.
  std::optional<perturb::PerturbConfig> perturb;
  double lr_peak = 2e-3;
  std::int64_t warmup_updates = 200;
  std::int64_t total_updates = 2000;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::size_t average_last = 7;
  /// 0 selects total_updates / 10.
  std::int64_t checkpoint_every = 0;
  /// Share of the corpus held out for the validation loss.
  double validation_fraction = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;

  std::int64_t checkpoint_interval() const noexcept;
  /// Throws InvalidArgument.
  void validate() const;
};

/// lr_peak * min(step / warmup, sqrt(warmup / step)). Throws
/// InvalidArgument for step < 1 or warmup < 1.
double noam_lr(std::int64_t step, std::int64_t warmup, double lr_peak);

class Adam {
 public:
  Adam(std::vector<ad::Tensor> params, double beta1, double beta2, double eps);
  /// One update from the accumulated gradients, which are then cleared.
  void step(double lr);
  std::int64_t steps_taken() const noexcept { return t_; }

 private:
  std::vector<ad::Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

struct MetricsRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  double translation_loss = 0.0;
  std::optional<double> disc_loss;
  std::optional<double> lambda;
};

/// One JSON object per line.
std::string to_jsonl(const MetricsRecord& r);

struct ValidationPoint {
  std::int64_t step = 0;
  double translation_loss = 0.0;
};

struct TrainResult {
  model::Seq2Seq model;
  std::vector<ad::Checkpoint> checkpoints;
  std::vector<std::int64_t> checkpoint_steps;
  std::vector<MetricsRecord> metrics;
  std::vector<ValidationPoint> validation;
  /// Indices into the corpus, in corpus order.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
};

/// Log-mel features of every utterance, with audio loaded relative to
/// `base`. Runs on up to worker_threads() threads.
std::vector<dsp::FeatureMatrix> compute_features(std::span<const Utterance> utts,
                                                 const std::filesystem::path& base = {});

struct EpochFeatures {
  std::vector<dsp::FeatureMatrix> features;
  std::vector<bool> manipulated;
};

/// apply_opposite on each utterance with stream (cfg.seed, index, epoch),
/// then log-mel features. Utterances without voiced frames stay unmodified.
EpochFeatures perturbed_features(std::span<const Utterance> utts, const perturb::PerturbConfig& cfg,
                                 std::uint64_t epoch, const std::filesystem::path& base = {});

/// VOXTAG_THREADS if set and positive, else the hardware concurrency.
std::size_t worker_threads();

struct TrainHooks {
  /// Called after every update.
  std::function<void(const MetricsRecord&)> on_update;
};

/// Trains a model in model_cfg.mode. Scratch builds the vocabulary from the
/// corpus targets and fits global CMVN on the training split; fine_tune
/// starts from `init` (vocabulary and normalizer included). Throws
/// Precondition for fine_tune without init or a specialized mode fed a
/// speaker of the other gender, InvalidArgument for GRL in a specialized
/// mode, DivergedLoss when the validation loss is NaN or exceeds 10x its
/// initial value.
TrainResult train_loop(std::span<const Utterance> corpus, const model::ModelConfig& model_cfg,
                       const TrainConfig& train_cfg, const model::Seq2Seq* init = nullptr,
                       const std::filesystem::path& base = {}, const TrainHooks& hooks = {});

/// Elementwise mean. Throws EmptyList, ShapeMismatch.
ad::Checkpoint average_checkpoints(std::span<const ad::Checkpoint> ckpts);

/// Mean translation loss of `m` on the utterances, teacher-forced.
double translation_loss(const model::Seq2Seq& m, std::span<const Utterance> utts,
                        std::span<const dsp::FeatureMatrix> features);

/// Decoder input (start token + target) and output (target + <eos>).
std::pair<std::vector<model::TokenId>, std::vector<model::TokenId>> teacher_forcing_pair(
    const model::Seq2Seq& m, const Utterance& u);

struct ProbeConfig {
  std::size_t steps = 300;
  double lr = 1e-2;
  /// Share of the held-out utterances the probe is fitted on; it is scored
  /// on the rest.
  double fit_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  double accuracy = 0.0;
  std::size_t fit_count = 0;
  std::size_t test_count = 0;
};

/// Fits a fresh discriminator-shaped classifier on frozen encoder outputs
/// and reports its accuracy on the unseen part. Throws SingleClassData.
ProbeResult probe_discriminator(const model::Seq2Seq& m, std::span<const Utterance> held_out,
                                std::span<const dsp::FeatureMatrix> features,
                                const ProbeConfig& cfg = {});

}  // namespace voxtag::train
