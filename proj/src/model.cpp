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

#include "voxtag/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "voxtag/error.hpp"

namespace voxtag::model {

namespace {

// Fixed sine/cosine position table, len x dim.
ad::Tensor sinusoids(std::size_t len, std::size_t dim) {
  std::vector<double> v(len * dim);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(c - c % 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(i) * rate;
      v[i * dim + c] = c % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return ad::Tensor::constant({len, dim}, std::move(v));
}

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kReserved{"<pad>", "<bos>", "<eos>", "<F>", "<M>"};
  return kReserved;
}

bool is_start(TokenId id) noexcept { return id == kBos || id == kTagF || id == kTagM; }

}  // namespace

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(from_tokens(reserved_tokens())) {}

Vocabulary Vocabulary::from_texts(std::span<const std::string> texts) {
  std::set<std::string> words;
  for (const auto& t : texts) {
    for (auto& w : split_whitespace(t)) words.insert(std::move(w));
  }
  std::vector<std::string> tokens = reserved_tokens();
  for (const auto& w : words) {
    if (std::find(tokens.begin(), tokens.end(), w) == tokens.end()) tokens.push_back(w);
  }
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < reserved.size() ||
      !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    throw Error(Errc::InvalidArgument, "vocabulary must start with the reserved tokens");
  }
  Vocabulary v{Empty{}};
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (v.tokens_[i].empty()) throw Error(Errc::InvalidArgument, "empty token");
    if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
      throw Error(Errc::InvalidArgument, "duplicate token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) throw Error(Errc::UnknownToken, "unknown token '" + std::string(token) + "'");
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(Errc::UnknownToken, "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(token); }

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_whitespace(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id < static_cast<TokenId>(reserved_tokens().size())) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

std::string_view to_string(Mode m) noexcept {
  switch (m) {
    case Mode::GenderUnaware: return "gender_unaware";
    case Mode::MultiGender: return "multi_gender";
    case Mode::SpecializedF: return "specialized_F";
    case Mode::SpecializedM: return "specialized_M";
  }
  return "multi_gender";
}

Mode parse_mode(std::string_view s) {
  for (Mode m : {Mode::GenderUnaware, Mode::MultiGender, Mode::SpecializedF, Mode::SpecializedM}) {
    if (s == to_string(m)) return m;
  }
  throw Error(Errc::InvalidArgument, "unknown mode '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (feature_dim != dsp::kMelBins) throw Error(Errc::InvalidArgument, "feature_dim must be 80");
  if (hidden_dim == 0 || ff_dim == 0 || encoder_layers == 0 || decoder_layers == 0 ||
      disc_hidden == 0 || max_target_len == 0) {
    throw Error(Errc::InvalidArgument, "model dimensions must be positive");
  }
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw Error(Errc::InvalidArgument, "label_smoothing must lie in [0, 1)");
  }
  if (!std::isfinite(disc_loss_weight)) {
    throw Error(Errc::InvalidArgument, "disc_loss_weight must be finite");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::InvalidArgument, "dropout must lie in [0, 1)");
}

ClassWeights compute_class_weights(double f_f, double f_m) {
  if (!(f_f > 0.0) || !(f_m > 0.0)) {
    throw Error(Errc::DegenerateFrequency, "class frequencies must be positive");
  }
  if (std::abs(f_f + f_m - 1.0) > 1e-6) {
    throw Error(Errc::InvalidArgument, "class frequencies must sum to 1");
  }
  return {1.0 / (2.0 * f_f), 1.0 / (2.0 * f_m)};
}

std::vector<TokenId> apply_target_forcing(std::span<const TokenId> prefix, SpeakerGender gender) {
  if (prefix.empty() || prefix[0] != kBos) {
    throw Error(Errc::MissingBos, "prefix must start with <bos>");
  }
  std::vector<TokenId> out(prefix.begin(), prefix.end());
  out[0] = gender_tag(gender);
  return out;
}

TokenId start_token(Mode mode, SpeakerGender gender) noexcept {
  return mode == Mode::MultiGender ? gender_tag(gender) : kBos;
}

// ---------------------------------------------------------------------------

Seq2Seq::Seq2Seq(ModelConfig cfg, Vocabulary vocab) : cfg_(cfg), vocab_(std::move(vocab)) {
  cfg_.validate();
  norm_mean_.assign(cfg_.feature_dim, 0.0);
  norm_std_.assign(cfg_.feature_dim, 1.0);
}

Seq2Seq::Seq2Seq(ModelConfig cfg, Vocabulary vocab, std::uint64_t seed)
    : Seq2Seq(cfg, std::move(vocab)) {
  Rng rng = substream({seed, 0x696e6974});
  build(&rng);
}

Seq2Seq Seq2Seq::zero_initialized(ModelConfig cfg, Vocabulary vocab) {
  Seq2Seq m(cfg, std::move(vocab));
  m.build(nullptr);
  for (auto& [name, p] : m.params_) {
    auto v = p.mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
  }
  return m;
}

Seq2Seq::Seq2Seq(const Seq2Seq& other) : Seq2Seq(other.cfg_, other.vocab_) {
  build(nullptr);
  load_checkpoint(other.to_checkpoint());
}

Seq2Seq& Seq2Seq::operator=(const Seq2Seq& other) {
  if (this != &other) *this = Seq2Seq(other);
  return *this;
}

Seq2Seq::Linear Seq2Seq::make_linear(const std::string& name, std::size_t in, std::size_t out,
                                     Rng* rng) {
  std::vector<double> w(in * out, 0.0);
  if (rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : w) v = u(*rng);
  }
  Linear l{ad::Tensor::parameter({in, out}, std::move(w)),
           ad::Tensor::parameter({1, out}, std::vector<double>(out, 0.0))};
  params_.emplace_back(name + ".w", l.w);
  params_.emplace_back(name + ".b", l.b);
  return l;
}

Seq2Seq::Norm Seq2Seq::make_norm(const std::string& name, std::size_t dim) {
  Norm n{ad::Tensor::parameter({1, dim}, std::vector<double>(dim, 1.0)),
         ad::Tensor::parameter({1, dim}, std::vector<double>(dim, 0.0))};
  params_.emplace_back(name + ".g", n.gain);
  params_.emplace_back(name + ".b", n.bias);
  return n;
}

ad::Tensor Seq2Seq::make_table(const std::string& name, std::size_t rows, std::size_t cols,
                               double std, Rng* rng) {
  std::vector<double> w(rows * cols, 0.0);
  if (rng) {
    std::normal_distribution<double> n(0.0, std);
    for (double& v : w) v = n(*rng);
  }
  ad::Tensor t = ad::Tensor::parameter({rows, cols}, std::move(w));
  params_.emplace_back(name, t);
  return t;
}

void Seq2Seq::build(Rng* rng) {
  const std::size_t d = cfg_.hidden_dim;
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(d));
  enc_in_ = make_linear("enc.in", cfg_.feature_dim, d, rng);
  for (std::size_t i = 0; i < cfg_.encoder_layers; ++i) {
    const std::string p = "enc.block" + std::to_string(i);
    FeedForward f;
    f.norm = make_norm(p + ".norm", d);
    f.in = make_linear(p + ".ff1", d, cfg_.ff_dim, rng);
    f.out = make_linear(p + ".ff2", cfg_.ff_dim, d, rng);
    enc_blocks_.push_back(f);
  }
  enc_norm_ = make_norm("enc.norm", d);
  tok_emb_ = make_table("dec.tok", vocab_.size(), d, emb_std, rng);
  for (std::size_t i = 0; i < cfg_.decoder_layers; ++i) {
    const std::string p = "dec.layer" + std::to_string(i);
    DecoderLayer l;
    l.self_norm = make_norm(p + ".self.norm", d);
    l.q = make_linear(p + ".self.q", d, d, rng);
    l.k = make_linear(p + ".self.k", d, d, rng);
    l.v = make_linear(p + ".self.v", d, d, rng);
    l.o = make_linear(p + ".self.o", d, d, rng);
    l.cross_norm = make_norm(p + ".cross.norm", d);
    l.cq = make_linear(p + ".cross.q", d, d, rng);
    l.ck = make_linear(p + ".cross.k", d, d, rng);
    l.cv = make_linear(p + ".cross.v", d, d, rng);
    l.co = make_linear(p + ".cross.o", d, d, rng);
    l.ff.norm = make_norm(p + ".ff.norm", d);
    l.ff.in = make_linear(p + ".ff1", d, cfg_.ff_dim, rng);
    l.ff.out = make_linear(p + ".ff2", cfg_.ff_dim, d, rng);
    dec_layers_.push_back(l);
  }
  dec_norm_ = make_norm("dec.norm", d);
  out_ = make_linear("dec.out", d, vocab_.size(), rng);
  disc1_ = make_linear("disc.l1", d, cfg_.disc_hidden, rng);
  disc2_ = make_linear("disc.l2", cfg_.disc_hidden, 2, rng);
}

void Seq2Seq::set_normalizer(const dsp::CmvnStats& stats) {
  norm_mean_ = stats.mean();
  norm_std_ = stats.stddev();
}

dsp::FeatureMatrix Seq2Seq::normalize(dsp::FeatureMatrix m) const {
  return dsp::CmvnStats::from_moments(norm_mean_, norm_std_).apply(std::move(m));
}

ad::Tensor Seq2Seq::apply(const Linear& l, const ad::Tensor& x) const {
  return ad::add(ad::matmul(x, l.w), l.b);
}

ad::Tensor Seq2Seq::apply(const Norm& n, const ad::Tensor& x) {
  return ad::layer_norm(x, n.gain, n.bias);
}

ad::Tensor Seq2Seq::dropout(const ad::Tensor& x, Rng* rng) const {
  if (!rng || cfg_.dropout <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - cfg_.dropout);
  std::vector<double> mask(x.size());
  const double scale = 1.0 / (1.0 - cfg_.dropout);
  for (double& m : mask) m = keep(*rng) ? scale : 0.0;
  return ad::mul(x, ad::Tensor::constant(x.shape(), std::move(mask)));
}

ad::Tensor Seq2Seq::feed_forward(const FeedForward& f, const ad::Tensor& x, Rng* rng) const {
  return ad::add(x, dropout(apply(f.out, ad::relu(apply(f.in, apply(f.norm, x)))), rng));
}

ad::Tensor Seq2Seq::encode(const dsp::FeatureMatrix& features, Rng* dropout_rng) const {
  if (features.frames == 0 || features.values.size() != features.frames * cfg_.feature_dim) {
    throw Error(Errc::ShapeMismatch, "encoder expects T x 80 features");
  }
  const std::size_t t_in = features.frames;
  const std::size_t t_out = (t_in + 3) / 4;
  const dsp::FeatureMatrix norm = normalize(features);
  const ad::Tensor x = ad::Tensor::constant({t_in, cfg_.feature_dim}, norm.values);

  std::vector<double> pool(t_out * t_in, 0.0);
  for (std::size_t i = 0; i < t_out; ++i) {
    const std::size_t lo = 4 * i, hi = std::min(t_in, lo + 4);
    for (std::size_t j = lo; j < hi; ++j) pool[i * t_in + j] = 1.0 / static_cast<double>(hi - lo);
  }
  const ad::Tensor pooled = ad::matmul(ad::Tensor::constant({t_out, t_in}, std::move(pool)), x);

  ad::Tensor h = ad::add(apply(enc_in_, pooled), sinusoids(t_out, cfg_.hidden_dim));
  for (const auto& block : enc_blocks_) h = feed_forward(block, h, dropout_rng);
  return apply(enc_norm_, h);
}

ad::Tensor Seq2Seq::decode(const ad::Tensor& enc_out, std::span<const TokenId> inputs,
                           Rng* dropout_rng) const {
  if (inputs.empty()) throw Error(Errc::EmptyPrefix, "decoder needs at least one input token");
  for (TokenId id : inputs) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
      throw Error(Errc::UnknownToken, "token id " + std::to_string(id) + " out of range");
    }
  }
  if (enc_out.rank() != 2 || enc_out.cols() != cfg_.hidden_dim) {
    throw Error(Errc::ShapeMismatch, "encoder output must be T' x hidden_dim");
  }
  const std::size_t len = inputs.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden_dim));
  std::vector<double> mask(len * len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = i + 1; j < len; ++j) mask[i * len + j] = -1e9;
  }
  const ad::Tensor causal = ad::Tensor::constant({len, len}, std::move(mask));

  const double embed_scale = std::sqrt(static_cast<double>(cfg_.hidden_dim));
  ad::Tensor x = ad::add(ad::mul(ad::embedding(tok_emb_, inputs), embed_scale),
                         sinusoids(len, cfg_.hidden_dim));
  for (const auto& l : dec_layers_) {
    const ad::Tensor xs = apply(l.self_norm, x);
    const ad::Tensor q = apply(l.q, xs), k = apply(l.k, xs), v = apply(l.v, xs);
    const ad::Tensor att =
        ad::softmax(ad::add(ad::mul(ad::matmul(q, k, true), scale), causal));
    x = ad::add(x, dropout(apply(l.o, ad::matmul(att, v)), dropout_rng));

    const ad::Tensor cq = apply(l.cq, apply(l.cross_norm, x)), ck = apply(l.ck, enc_out), cv = apply(l.cv, enc_out);
    const ad::Tensor catt = ad::softmax(ad::mul(ad::matmul(cq, ck, true), scale));
    x = ad::add(x, dropout(apply(l.co, ad::matmul(catt, cv)), dropout_rng));

    x = feed_forward(l.ff, x, dropout_rng);
  }
  return ad::softmax(apply(out_, apply(dec_norm_, x)));
}

std::vector<double> Seq2Seq::decode_step(const ad::Tensor& enc_out,
                                         std::span<const TokenId> prefix) const {
  if (prefix.empty()) throw Error(Errc::EmptyPrefix, "prefix is empty");
  for (TokenId id : prefix) vocab_.token(id);
  if (!is_start(prefix[0])) {
    throw Error(Errc::InvalidArgument, "prefix must start with <bos>, <F> or <M>");
  }
  const ad::Tensor probs = decode(enc_out, prefix);
  const std::size_t v = vocab_.size();
  const auto all = probs.values();
  return {all.end() - static_cast<std::ptrdiff_t>(v), all.end()};
}

std::vector<TokenId> Seq2Seq::greedy_decode(const ad::Tensor& enc_out, TokenId start) const {
  std::vector<TokenId> seq{start};
  while (seq.size() <= cfg_.max_target_len) {
    const std::vector<double> p = decode_step(enc_out, seq);
    const auto best = static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin());
    if (best == kEos) break;
    seq.push_back(best);
  }
  return {seq.begin() + 1, seq.end()};
}

ad::Tensor Seq2Seq::discriminate(const ad::Tensor& enc_out, double lambda) const {
  if (enc_out.rank() != 2 || enc_out.cols() != cfg_.hidden_dim) {
    throw Error(Errc::ShapeMismatch, "encoder output must be T' x hidden_dim");
  }
  const ad::Tensor h = ad::relu(apply(disc1_, ad::grl(enc_out, lambda)));
  return ad::mean(apply(disc2_, h), 0);
}

std::vector<ad::Tensor> Seq2Seq::trainable() const {
  std::vector<ad::Tensor> out;
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

std::size_t Seq2Seq::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

ad::Checkpoint Seq2Seq::to_checkpoint() const {
  ad::Checkpoint ckpt;
  for (const auto& [name, t] : params_) {
    ckpt.push_back({name, t.shape(), {t.values().begin(), t.values().end()}});
  }
  ckpt.push_back({"norm.mean", {cfg_.feature_dim}, norm_mean_});
  ckpt.push_back({"norm.std", {cfg_.feature_dim}, norm_std_});
  return ckpt;
}

void Seq2Seq::load_checkpoint(const ad::Checkpoint& ckpt) {
  if (ckpt.size() != params_.size() + 2) {
    throw Error(Errc::ShapeMismatch, "checkpoint has " + std::to_string(ckpt.size()) +
                                         " arrays, model expects " +
                                         std::to_string(params_.size() + 2));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& [name, t] = params_[i];
    if (ckpt[i].name != name || ckpt[i].shape != t.shape()) {
      throw Error(Errc::ShapeMismatch, "checkpoint entry " + ckpt[i].name + " " +
                                           ad::shape_string(ckpt[i].shape) + " does not match " +
                                           name + " " + ad::shape_string(t.shape()));
    }
  }
  const auto& mean = ckpt[params_.size()];
  const auto& stdv = ckpt[params_.size() + 1];
  if (mean.name != "norm.mean" || stdv.name != "norm.std" ||
      mean.values.size() != cfg_.feature_dim || stdv.values.size() != cfg_.feature_dim) {
    throw Error(Errc::ShapeMismatch, "checkpoint lacks normalizer statistics");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].second.mutable_values();
    std::copy(ckpt[i].values.begin(), ckpt[i].values.end(), dst.begin());
  }
  norm_mean_ = mean.values;
  norm_std_ = stdv.values;
}

void Seq2Seq::init_tags_from_bos() {
  auto table = tok_emb_.mutable_values();
  const std::size_t d = cfg_.hidden_dim;
  for (TokenId tag : {kTagF, kTagM}) {
    std::copy_n(table.begin() + static_cast<std::ptrdiff_t>(kBos * d), d,
                table.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(tag) * d));
  }
}

// ---------------------------------------------------------------------------

namespace {

void check_distribution(std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(Errc::InvalidDistribution, "probabilities must be finite and non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw Error(Errc::InvalidDistribution, "probabilities sum to " + std::to_string(total));
  }
}

void check_smoothing(double smoothing) {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw Error(Errc::InvalidArgument, "smoothing must lie in [0, 1)");
  }
}

}  // namespace

double label_smoothed_ce(std::span<const double> probs, TokenId target, double smoothing) {
  check_distribution(probs);
  check_smoothing(smoothing);
  if (probs.size() < 2) throw Error(Errc::InvalidDistribution, "need at least two classes");
  if (target < 0 || static_cast<std::size_t>(target) >= probs.size()) {
    throw Error(Errc::UnknownToken, "target outside the distribution");
  }
  if (target == kPad) return 0.0;
  const double other = smoothing / static_cast<double>(probs.size() - 1);
  double loss = 0.0;
  for (std::size_t v = 0; v < probs.size(); ++v) {
    const double q = static_cast<TokenId>(v) == target ? 1.0 - smoothing : other;
    if (q > 0.0) loss -= q * std::log(std::max(probs[v], 1e-300));
  }
  return loss;
}

ad::Tensor label_smoothed_ce(const ad::Tensor& probs, std::span<const TokenId> targets,
                             double smoothing) {
  check_smoothing(smoothing);
  const std::size_t rows = probs.rows(), v = probs.cols();
  if (targets.size() != rows) throw Error(Errc::ShapeMismatch, "one target per row expected");
  if (v < 2) throw Error(Errc::InvalidDistribution, "need at least two classes");
  const double other = smoothing / static_cast<double>(v - 1);
  std::vector<double> q(rows * v, 0.0);
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const TokenId t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= v) throw Error(Errc::UnknownToken, "bad target");
    if (t == kPad) continue;
    ++counted;
    for (std::size_t c = 0; c < v; ++c) {
      q[r * v + c] = static_cast<TokenId>(c) == t ? 1.0 - smoothing : other;
    }
  }
  const double norm = counted ? -1.0 / static_cast<double>(counted) : 0.0;
  const ad::Tensor weighted =
      ad::mul(ad::log(probs), ad::Tensor::constant(probs.shape(), std::move(q)));
  return ad::mul(ad::sum(weighted), norm);
}

double weighted_disc_loss(std::span<const double> logits, SpeakerGender label,
                          const ClassWeights& weights) {
  if (logits.size() != 2) throw Error(Errc::ShapeMismatch, "discriminator emits 2 logits");
  const double mx = std::max(logits[0], logits[1]);
  const double lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
  const double target = label == SpeakerGender::F ? logits[0] : logits[1];
  return weights.weight(label) * (lse - target);
}

ad::Tensor weighted_disc_loss(const ad::Tensor& logits, SpeakerGender label,
                              const ClassWeights& weights) {
  if (logits.size() != 2) throw Error(Errc::ShapeMismatch, "discriminator emits 2 logits");
  std::vector<double> onehot{0.0, 0.0};
  onehot[label == SpeakerGender::F ? 0 : 1] = -weights.weight(label);
  return ad::sum(ad::mul(ad::log(ad::softmax(logits)),
                         ad::Tensor::constant(logits.shape(), std::move(onehot))));
}

double combined_loss(double translation_loss, std::optional<double> disc_loss,
                     const ModelConfig& cfg) {
  if (!std::isfinite(translation_loss) || (disc_loss && !std::isfinite(*disc_loss))) {
    throw Error(Errc::NonFinite, "loss terms must be finite");
  }
  if (!disc_loss) return translation_loss;
  return translation_loss + cfg.disc_loss_weight * *disc_loss;
}

ad::Tensor combined_loss(const ad::Tensor& translation_loss,
                         const std::optional<ad::Tensor>& disc_loss, const ModelConfig& cfg) {
  combined_loss(translation_loss.item(),
                disc_loss ? std::optional<double>(disc_loss->item()) : std::nullopt, cfg);
  if (!disc_loss) return translation_loss;
  return ad::add(translation_loss, ad::mul(*disc_loss, cfg.disc_loss_weight));
}

// ---------------------------------------------------------------------------

std::filesystem::path meta_path(const std::filesystem::path& ckpt_path) {
  std::filesystem::path p = ckpt_path;
  p += ".meta";
  return p;
}

void write_model_meta(const ModelConfig& cfg, const Vocabulary& vocab,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open for writing: " + path.string());
  std::ostringstream num;
  num.precision(17);
  num << "label_smoothing=" << cfg.label_smoothing << '\n'
      << "disc_loss_weight=" << cfg.disc_loss_weight << '\n'
      << "dropout=" << cfg.dropout << '\n';
  out << "format=voxtag-model-1\n"
      << "feature_dim=" << cfg.feature_dim << '\n'
      << "hidden_dim=" << cfg.hidden_dim << '\n'
      << "ff_dim=" << cfg.ff_dim << '\n'
      << "encoder_layers=" << cfg.encoder_layers << '\n'
      << "decoder_layers=" << cfg.decoder_layers << '\n'
      << "disc_hidden=" << cfg.disc_hidden << '\n'
      << "max_target_len=" << cfg.max_target_len << '\n'
      << num.str() << "mode=" << to_string(cfg.mode) << '\n'
      << "vocab=";
  for (std::size_t i = 0; i < vocab.size(); ++i) out << (i ? " " : "") << vocab.tokens()[i];
  out << '\n';
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

std::pair<ModelConfig, Vocabulary> read_model_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::MalformedHeader, "bad meta line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(Errc::MalformedHeader, "meta lacks '" + key + "'");
    return it->second;
  };
  if (get("format") != "voxtag-model-1") throw Error(Errc::MalformedHeader, "unknown meta format");
  auto size = [&](const std::string& key) {
    try {
      return static_cast<std::size_t>(std::stoull(get(key)));
    } catch (const std::logic_error&) {
      throw Error(Errc::MalformedHeader, "bad value for " + key);
    }
  };
  auto real = [&](const std::string& key) {
    try {
      return std::stod(get(key));
    } catch (const std::logic_error&) {
      throw Error(Errc::MalformedHeader, "bad value for " + key);
    }
  };
  ModelConfig cfg;
  cfg.feature_dim = size("feature_dim");
  cfg.hidden_dim = size("hidden_dim");
  cfg.ff_dim = size("ff_dim");
  cfg.encoder_layers = size("encoder_layers");
  cfg.decoder_layers = size("decoder_layers");
  cfg.disc_hidden = size("disc_hidden");
  cfg.max_target_len = size("max_target_len");
  cfg.label_smoothing = real("label_smoothing");
  cfg.disc_loss_weight = real("disc_loss_weight");
  cfg.dropout = real("dropout");
  cfg.mode = parse_mode(get("mode"));
  cfg.validate();
  return {cfg, Vocabulary::from_tokens(split_whitespace(get("vocab")))};
}

void save_model(const Seq2Seq& model, const std::filesystem::path& ckpt_path) {
  ad::write_checkpoint(model.to_checkpoint(), ckpt_path);
  write_model_meta(model.config(), model.vocab(), meta_path(ckpt_path));
}

Seq2Seq load_model(const std::filesystem::path& ckpt_path) {
  auto [cfg, vocab] = read_model_meta(meta_path(ckpt_path));
  Seq2Seq m = Seq2Seq::zero_initialized(cfg, std::move(vocab));
  m.load_checkpoint(ad::read_checkpoint(ckpt_path));
  return m;
}

}  // namespace voxtag::model
