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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxtag/autodiff.hpp"
#include "voxtag/dsp.hpp"
#include "voxtag/perturb.hpp"
#include "voxtag/rng.hpp"

namespace voxtag::model {

using TokenId = std::int64_t;
using perturb::SpeakerGender;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kTagF = 3;
inline constexpr TokenId kTagM = 4;

constexpr TokenId gender_tag(SpeakerGender g) noexcept { return g == SpeakerGender::F ? kTagF : kTagM; }

/// Reserved ids 0..4 (<pad> <bos> <eos> <F> <M>), then word tokens.
class Vocabulary {
 public:
  Vocabulary();
  /// Reserved tokens plus the sorted set of whitespace tokens in `texts`.
  static Vocabulary from_texts(std::span<const std::string> texts);
  /// Reserved tokens must come first, in order. Throws InvalidArgument.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  /// Throws UnknownToken.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;

  /// Whitespace split, then id(); throws UnknownToken.
  std::vector<TokenId> encode(std::string_view text) const;
  /// Word tokens joined by single spaces; reserved ids are skipped.
  std::string decode(std::span<const TokenId> ids) const;

 private:
  struct Empty {};
  explicit Vocabulary(Empty) {}

  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> index_;
};

std::vector<std::string> split_whitespace(std::string_view text);

enum class Mode { GenderUnaware, MultiGender, SpecializedF, SpecializedM };

std::string_view to_string(Mode m) noexcept;
/// gender_unaware | multi_gender | specialized_F | specialized_M.
Mode parse_mode(std::string_view s);

struct ModelConfig {
  std::size_t feature_dim = dsp::kMelBins;
  std::size_t hidden_dim = 64;
  std::size_t ff_dim = 128;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 1;
  std::size_t disc_hidden = 64;
  std::size_t max_target_len = 48;
  double label_smoothing = 0.1;
  double disc_loss_weight = 0.5;
  double dropout = 0.0;
  Mode mode = Mode::MultiGender;

  /// Throws InvalidArgument.
  void validate() const;
};

struct ClassWeights {
  double w_f = 1.0;
  double w_m = 1.0;
  double weight(SpeakerGender g) const noexcept { return g == SpeakerGender::F ? w_f : w_m; }
};

/// w_f = 1 / (2 f_f), w_m = 1 / (2 f_m). Throws DegenerateFrequency when a
/// frequency is <= 0 and InvalidArgument when they do not sum to 1.
ClassWeights compute_class_weights(double f_f, double f_m);

/// Replaces the leading <bos> with the gender tag. Throws MissingBos.
std::vector<TokenId> apply_target_forcing(std::span<const TokenId> prefix, SpeakerGender gender);

/// First decoder input: the gender tag in multi-gender mode, <bos> otherwise.
TokenId start_token(Mode mode, SpeakerGender gender) noexcept;

/// Tag-conditioned encoder-decoder with a gradient-reversed discriminator.
class Seq2Seq {
 public:
  /// Random initialization from `seed`.
  Seq2Seq(ModelConfig cfg, Vocabulary vocab, std::uint64_t seed);
  /// Every parameter zero, normalization gains included.
  static Seq2Seq zero_initialized(ModelConfig cfg, Vocabulary vocab);

  /// Copies own their parameters.
  Seq2Seq(const Seq2Seq& other);
  Seq2Seq& operator=(const Seq2Seq& other);
  Seq2Seq(Seq2Seq&&) noexcept = default;
  Seq2Seq& operator=(Seq2Seq&&) noexcept = default;

  const ModelConfig& config() const noexcept { return cfg_; }
  ModelConfig& mutable_config() noexcept { return cfg_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }

  /// Input normalization applied by encode(); identity by default.
  void set_normalizer(const dsp::CmvnStats& stats);
  dsp::FeatureMatrix normalize(dsp::FeatureMatrix m) const;

  /// x4 mean pooling, projection, sinusoidal positions, pre-norm residual
  /// feedforward blocks and a final layer norm.
  /// Output is ceil(T/4) x hidden_dim. `dropout_rng` enables dropout.
  ad::Tensor encode(const dsp::FeatureMatrix& features, Rng* dropout_rng = nullptr) const;

  /// Teacher-forced distributions, one row per input position. Token
  /// embeddings are scaled by sqrt(hidden_dim) and added to sinusoidal
  /// positions.
  ad::Tensor decode(const ad::Tensor& enc_out, std::span<const TokenId> inputs,
                    Rng* dropout_rng = nullptr) const;

  /// Distribution of the next token after `prefix`. Throws EmptyPrefix,
  /// UnknownToken, and InvalidArgument when prefix[0] is not a start token.
  std::vector<double> decode_step(const ad::Tensor& enc_out, std::span<const TokenId> prefix) const;

  /// Greedy decoding from `start` until <eos> or max_target_len tokens.
  std::vector<TokenId> greedy_decode(const ad::Tensor& enc_out, TokenId start) const;

  /// 2 logits, ordered (F, M).
  ad::Tensor discriminate(const ad::Tensor& enc_out, double lambda) const;

  std::vector<ad::Tensor> trainable() const;
  std::size_t parameter_count() const;

  /// Trainable parameters plus the normalizer statistics.
  ad::Checkpoint to_checkpoint() const;
  /// Throws ShapeMismatch when names or shapes differ.
  void load_checkpoint(const ad::Checkpoint& ckpt);

  /// Gives the gender tags the <bos> embedding, so tagged prefixes behave
  /// exactly like <bos> prefixes of a gender-unaware model.
  void init_tags_from_bos();

 private:
  struct Linear {
    ad::Tensor w;
    ad::Tensor b;
  };
  struct Norm {
    ad::Tensor gain;
    ad::Tensor bias;
  };
  struct FeedForward {
    Norm norm;
    Linear in;
    Linear out;
  };
  struct DecoderLayer {
    Norm self_norm;
    Linear q, k, v, o;
    Norm cross_norm;
    Linear cq, ck, cv, co;
    FeedForward ff;
  };

  Seq2Seq(ModelConfig cfg, Vocabulary vocab);
  void build(Rng* rng);
  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, Rng* rng);
  Norm make_norm(const std::string& name, std::size_t dim);
  ad::Tensor make_table(const std::string& name, std::size_t rows, std::size_t cols, double std,
                        Rng* rng);
  ad::Tensor apply(const Linear& l, const ad::Tensor& x) const;
  static ad::Tensor apply(const Norm& n, const ad::Tensor& x);
  ad::Tensor feed_forward(const FeedForward& f, const ad::Tensor& x, Rng* dropout_rng) const;
  ad::Tensor dropout(const ad::Tensor& x, Rng* rng) const;

  ModelConfig cfg_;
  Vocabulary vocab_;
  std::vector<std::pair<std::string, ad::Tensor>> params_;
  std::vector<double> norm_mean_;
  std::vector<double> norm_std_;

  Linear enc_in_;
  std::vector<FeedForward> enc_blocks_;
  Norm enc_norm_;
  ad::Tensor tok_emb_;
  std::vector<DecoderLayer> dec_layers_;
  Norm dec_norm_;
  Linear out_;
  Linear disc1_;
  Linear disc2_;
};

/// -sum_v q(v) log p(v) with q(target) = 1 - smoothing and the rest spread
/// evenly; a <pad> target scores 0. Throws InvalidDistribution.
double label_smoothed_ce(std::span<const double> probs, TokenId target, double smoothing);
/// Mean over the non-pad rows of a teacher-forced distribution matrix.
ad::Tensor label_smoothed_ce(const ad::Tensor& probs, std::span<const TokenId> targets,
                             double smoothing);

/// Class-weighted cross-entropy of softmax(logits) against the label.
double weighted_disc_loss(std::span<const double> logits, SpeakerGender label,
                          const ClassWeights& weights);
ad::Tensor weighted_disc_loss(const ad::Tensor& logits, SpeakerGender label,
                              const ClassWeights& weights);

/// translation + disc_loss_weight * disc; disc omitted when absent. Throws NonFinite.
double combined_loss(double translation_loss, std::optional<double> disc_loss,
                     const ModelConfig& cfg);
ad::Tensor combined_loss(const ad::Tensor& translation_loss,
                         const std::optional<ad::Tensor>& disc_loss, const ModelConfig& cfg);

/// Key=value sidecar holding the config and vocabulary of a checkpoint.
void write_model_meta(const ModelConfig& cfg, const Vocabulary& vocab,
                      const std::filesystem::path& path);
std::pair<ModelConfig, Vocabulary> read_model_meta(const std::filesystem::path& path);
/// `ckpt_path` with ".meta" appended.
std::filesystem::path meta_path(const std::filesystem::path& ckpt_path);

/// Writes the checkpoint and its sidecar.
void save_model(const Seq2Seq& model, const std::filesystem::path& ckpt_path);
Seq2Seq load_model(const std::filesystem::path& ckpt_path);

}  // namespace voxtag::model
