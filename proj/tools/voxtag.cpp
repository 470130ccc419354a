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

// voxtag: command-line front end for the whole pipeline.
//
//   voxtag synth-data --seed 1 --out corpus
//   voxtag train --config run.json --corpus corpus --out run
//   voxtag evaluate --model run/model.vxck --corpus test --out report.json

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "voxtag/autodiff.hpp"
#include "voxtag/config.hpp"
#include "voxtag/corpus.hpp"
#include "voxtag/dsp.hpp"
#include "voxtag/error.hpp"
#include "voxtag/eval.hpp"
#include "voxtag/model.hpp"
#include "voxtag/perturb.hpp"
#include "voxtag/synthdata.hpp"
#include "voxtag/train.hpp"

namespace fs = std::filesystem;
using voxtag::Errc;
using voxtag::Error;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// A --flag bound to one RunConfig field.
struct Override {
  std::string section;
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

// Options every subcommand reading a RunConfig shares.
struct ConfigOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::deque<Override> overrides;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Seed for every random stream");
  }

  // One flag per field of `section`, named after the key, optionally prefixed.
  void add_section(CLI::App& app, const std::string& section, const std::string& prefix = "") {
    for (const auto& f : voxtag::config::list_fields(section)) {
      std::string flag = "--" + prefix + f.key;
      std::replace(flag.begin() + 2, flag.end(), '_', '-');
      Override& o = overrides.emplace_back(Override{f.section, f.key, "", nullptr});
      if (f.is_bool) {
        o.option = app.add_flag(flag + "{true}", o.value, section + "." + f.key);
      } else {
        o.option = app.add_option(flag, o.value, section + "." + f.key);
      }
    }
  }

  voxtag::config::RunConfig resolve() const {
    voxtag::config::RunConfig cfg =
        config_path.empty() ? voxtag::config::RunConfig{} : voxtag::config::load_run_config(config_path);
    for (const auto& o : overrides) {
      if (o.option->count() > 0) voxtag::config::set_field(cfg, o.section, o.key, o.value);
    }
    if (seed) cfg.seed = *seed;
    cfg.resolve();
    return cfg;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
}

std::vector<voxtag::Utterance> read_corpus(const fs::path& dir) {
  return voxtag::read_manifest(dir / "manifest.tsv");
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Subcommands. Each setup function registers its options and returns the
// action to run once parsing succeeded.

using Action = std::function<void()>;

Action setup_synth_data(CLI::App& app) {
  auto opts = std::make_shared<ConfigOptions>();
  auto out = std::make_shared<std::string>();
  opts->add_to(app);
  opts->add_section(app, "synth");
  app.add_option("--out", *out, "Output corpus directory")->required();
  return [opts, out] {
    const auto cfg = opts->resolve();
    const auto corpus = voxtag::synth::generate_corpus(cfg.synth);
    voxtag::synth::write_corpus(corpus, *out);
    std::cout << "wrote " << corpus.utterances.size() << " utterances to " << *out << "\n";
  };
}

Action setup_perturb(CLI::App& app) {
  auto opts = std::make_shared<ConfigOptions>();
  auto corpus_dir = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto epoch = std::make_shared<std::uint64_t>(0);
  opts->add_to(app);
  opts->add_section(app, "perturb");
  app.add_option("--corpus", *corpus_dir, "Corpus directory holding manifest.tsv")
      ->required()
      ->check(CLI::ExistingDirectory);
  app.add_option("--epoch", *epoch, "Epoch index of the perturbation stream");
  app.add_option("--out", *out, "Output corpus directory")->required();
  return [opts, corpus_dir, out, epoch] {
    const auto cfg = opts->resolve();
    const fs::path in_dir(*corpus_dir);
    const fs::path out_dir(*out);
    auto utts = read_corpus(in_dir);
    fs::create_directories(out_dir / "wav");
    std::ofstream log(out_dir / "perturb.tsv", std::ios::binary);
    log << "id\tgender\tmanipulated\talpha\tformant_scale\ttarget_median\n";
    std::size_t manipulated = 0;
    for (std::size_t i = 0; i < utts.size(); ++i) {
      auto& u = utts[i];
      const auto w = u.load_audio(in_dir);
      auto rng = voxtag::perturb::perturb_stream(cfg.perturb, i, *epoch);
      voxtag::perturb::Manipulation m;
      try {
        m = voxtag::perturb::apply_opposite(w, u.gender, cfg.perturb, rng);
      } catch (const Error& e) {
        if (e.code() != Errc::AllUnvoiced && e.code() != Errc::ZeroSourceMedian) throw;
        m.audio = w;
      }
      u.wav_path = "wav/" + u.id + ".wav";
      voxtag::audio::write_wav(m.audio, out_dir / u.wav_path);
      manipulated += m.manipulated ? 1 : 0;
      log << u.id << '\t' << voxtag::perturb::to_string(u.gender) << '\t' << (m.manipulated ? 1 : 0)
          << '\t' << format_fixed(m.alpha, 6) << '\t' << format_fixed(m.formant_scale, 6) << '\t'
          << format_fixed(m.target_median, 3) << '\n';
    }
    voxtag::write_manifest(utts, out_dir / "manifest.tsv");
    if (fs::exists(in_dir / "eval.tsv")) {
      voxtag::write_eval_tsv(voxtag::read_eval_tsv(in_dir / "eval.tsv"), out_dir / "eval.tsv");
    }
    std::cout << "manipulated " << manipulated << " of " << utts.size() << " utterances\n";
  };
}

Action setup_features(CLI::App& app) {
  auto corpus_dir = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto apply_cmvn = std::make_shared<bool>(false);
  app.add_option("--corpus", *corpus_dir, "Corpus directory holding manifest.tsv")
      ->required()
      ->check(CLI::ExistingDirectory);
  app.add_flag("--cmvn", *apply_cmvn, "Apply per-utterance CMVN");
  app.add_option("--out", *out, "Output directory for <id>.vxft files")->required();
  return [corpus_dir, out, apply_cmvn] {
    const fs::path in_dir(*corpus_dir);
    const auto utts = read_corpus(in_dir);
    fs::create_directories(*out);
    for (const auto& u : utts) {
      const auto f = voxtag::dsp::logmel_features(u.load_audio(in_dir), *apply_cmvn);
      voxtag::dsp::write_features(f, fs::path(*out) / (u.id + ".vxft"));
    }
    std::cout << "wrote features for " << utts.size() << " utterances\n";
  };
}

std::string step_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06lld.vxck", static_cast<long long>(step));
  return buf;
}

Action setup_train(CLI::App& app) {
  auto opts = std::make_shared<ConfigOptions>();
  auto corpus_dir = std::make_shared<std::string>();
  auto init = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  opts->add_to(app);
  opts->add_section(app, "model");
  opts->add_section(app, "train");
  opts->add_section(app, "perturb", "perturb-");
  app.add_option("--corpus", *corpus_dir, "Training corpus directory holding manifest.tsv")
      ->required()
      ->check(CLI::ExistingDirectory);
  app.add_option("--init", *init, "Checkpoint to fine-tune from")->check(CLI::ExistingFile);
  app.add_option("--out", *out, "Run directory")->required();
  return [opts, corpus_dir, init, out] {
    const auto cfg = opts->resolve();
    const fs::path in_dir(*corpus_dir);
    const fs::path out_dir(*out);
    const auto utts = read_corpus(in_dir);
    std::optional<voxtag::model::Seq2Seq> init_model;
    if (!init->empty()) init_model = voxtag::model::load_model(*init);

    fs::create_directories(out_dir / "checkpoints");
    write_text(out_dir / "config.json", voxtag::config::to_json(cfg));

    voxtag::train::TrainHooks hooks;
    const auto interval = static_cast<std::int64_t>(cfg.train.checkpoint_interval());
    hooks.on_update = [interval](const voxtag::train::MetricsRecord& r) {
      if (r.step % interval == 0) {
        std::cerr << "step " << r.step << " loss " << format_fixed(r.translation_loss, 4) << "\n";
      }
    };
    auto result = voxtag::train::train_loop(utts, cfg.model, cfg.train,
                                            init_model ? &*init_model : nullptr, in_dir, hooks);

    for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
      const fs::path p = out_dir / "checkpoints" / step_name(result.checkpoint_steps[i]);
      voxtag::ad::write_checkpoint(result.checkpoints[i], p);
      voxtag::model::write_model_meta(cfg.model, result.model.vocab(), voxtag::model::meta_path(p));
    }
    std::string metrics;
    for (const auto& r : result.metrics) metrics += voxtag::train::to_jsonl(r) + "\n";
    write_text(out_dir / "metrics.jsonl", metrics);
    std::string validation;
    for (const auto& v : result.validation) {
      nlohmann::ordered_json j;
      j["step"] = v.step;
      j["translation_loss"] = v.translation_loss;
      validation += j.dump() + "\n";
    }
    write_text(out_dir / "validation.jsonl", validation);

    const std::size_t k = cfg.train.average_last;
    const std::span<const voxtag::ad::Checkpoint> last(result.checkpoints.end() - static_cast<long>(k),
                                                       result.checkpoints.end());
    voxtag::model::Seq2Seq final_model = result.model;
    final_model.load_checkpoint(voxtag::train::average_checkpoints(last));
    voxtag::model::save_model(final_model, out_dir / "model.vxck");
    std::cout << "trained " << cfg.train.total_updates << " updates; averaged last " << k
              << " checkpoints into " << (out_dir / "model.vxck").string() << "\n";
  };
}

Action setup_average(CLI::App& app) {
  auto inputs = std::make_shared<std::vector<std::string>>();
  auto out = std::make_shared<std::string>();
  app.add_option("checkpoints", *inputs, "Checkpoints to average")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--out", *out, "Averaged checkpoint path")->required();
  return [inputs, out] {
    std::vector<voxtag::ad::Checkpoint> ckpts;
    for (const auto& p : *inputs) ckpts.push_back(voxtag::ad::read_checkpoint(p));
    const fs::path out_path(*out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    voxtag::ad::write_checkpoint(voxtag::train::average_checkpoints(ckpts), out_path);
    const fs::path meta = voxtag::model::meta_path(inputs->front());
    if (fs::exists(meta)) {
      const auto [cfg, vocab] = voxtag::model::read_model_meta(meta);
      voxtag::model::write_model_meta(cfg, vocab, voxtag::model::meta_path(out_path));
    }
    std::cout << "averaged " << ckpts.size() << " checkpoints into " << *out << "\n";
  };
}

Action setup_evaluate(CLI::App& app) {
  auto model_path = std::make_shared<std::string>();
  auto corpus_dir = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  app.add_option("--model", *model_path, "Model checkpoint")->required()->check(CLI::ExistingFile);
  app.add_option("--corpus", *corpus_dir, "Corpus directory holding manifest.tsv and eval.tsv")
      ->required()
      ->check(CLI::ExistingDirectory);
  app.add_option("--out", *out, "Report path; stdout when omitted");
  return [model_path, corpus_dir, out] {
    const auto m = voxtag::model::load_model(*model_path);
    const fs::path in_dir(*corpus_dir);
    const auto utts = read_corpus(in_dir);
    const auto entries = voxtag::read_eval_tsv(in_dir / "eval.tsv");
    const auto features = voxtag::train::compute_features(utts, in_dir);
    const auto report = m.config().mode == voxtag::model::Mode::MultiGender
                            ? voxtag::eval::tag_inversion_eval(m, utts, features, entries)
                            : voxtag::eval::matched_eval(m, utts, features, entries);
    const std::string text = voxtag::eval::to_json(report);
    if (out->empty()) {
      std::cout << text;
    } else {
      write_text(*out, text);
    }
  };
}

Action setup_probe(CLI::App& app) {
  auto model_path = std::make_shared<std::string>();
  auto corpus_dir = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto cfg = std::make_shared<voxtag::train::ProbeConfig>();
  app.add_option("--model", *model_path, "Model checkpoint")->required()->check(CLI::ExistingFile);
  app.add_option("--corpus", *corpus_dir, "Held-out corpus directory holding manifest.tsv")
      ->required()
      ->check(CLI::ExistingDirectory);
  app.add_option("--seed", cfg->seed, "Seed of the probe split and initialization");
  app.add_option("--steps", cfg->steps, "Probe training steps");
  app.add_option("--lr", cfg->lr, "Probe learning rate");
  app.add_option("--fit-fraction", cfg->fit_fraction, "Share of utterances the probe is fitted on");
  app.add_option("--out", *out, "Report path; stdout when omitted");
  return [model_path, corpus_dir, out, cfg] {
    const auto m = voxtag::model::load_model(*model_path);
    const fs::path in_dir(*corpus_dir);
    const auto utts = read_corpus(in_dir);
    const auto features = voxtag::train::compute_features(utts, in_dir);
    const auto r = voxtag::train::probe_discriminator(m, utts, features, *cfg);
    nlohmann::ordered_json j;
    j["accuracy"] = r.accuracy;
    j["fit_count"] = r.fit_count;
    j["test_count"] = r.test_count;
    const std::string text = j.dump(2) + "\n";
    if (out->empty()) {
      std::cout << text;
    } else {
      write_text(*out, text);
    }
  };
}

Action setup_schedule(CLI::App& app) {
  auto opts = std::make_shared<ConfigOptions>();
  auto gamma = std::make_shared<std::optional<double>>();
  auto total = std::make_shared<std::optional<std::int64_t>>();
  auto fixed = std::make_shared<std::optional<double>>();
  auto every = std::make_shared<std::optional<std::int64_t>>();
  auto at = std::make_shared<std::optional<std::int64_t>>();
  app.add_option("--config", opts->config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--gamma", *gamma, "Ramp steepness");
  app.add_option("--total", *total, "Total updates");
  app.add_option("--lambda", *fixed, "Fixed lambda instead of the ramp");
  app.add_option("--every", *every, "Checkpoint interval; total/10 by default");
  app.add_option("--at", *at, "Print lambda at this update only");
  return [opts, gamma, total, fixed, every, at] {
    auto cfg = opts->resolve();
    voxtag::ad::LambdaSchedule s;
    s.gamma = gamma->value_or(cfg.grl_gamma);
    s.total_updates = total->value_or(static_cast<std::int64_t>(cfg.train.total_updates));
    s.fixed_lambda = fixed->has_value() ? *fixed : cfg.grl_lambda;
    if (s.total_updates < 1) throw Error(Errc::InvalidArgument, "--total must be at least 1");
    auto print = [&](std::int64_t step) {
      std::cout << "step=" << step << " lambda=" << format_fixed(voxtag::ad::lambda_at(s, step), 6)
                << "\n";
    };
    if (at->has_value()) {
      print(**at);
      return;
    }
    const std::int64_t interval = every->value_or(std::max<std::int64_t>(1, s.total_updates / 10));
    if (interval < 1) throw Error(Errc::InvalidArgument, "--every must be at least 1");
    for (std::int64_t step = 0; step <= s.total_updates; step += interval) print(step);
  };
}

Action setup_class_weights(CLI::App& app) {
  auto f = std::make_shared<double>();
  auto m = std::make_shared<double>();
  app.add_option("--f", *f, "Frequency of feminine speakers")->required();
  app.add_option("--m", *m, "Frequency of masculine speakers")->required();
  return [f, m] {
    const auto w = voxtag::model::compute_class_weights(*f, *m);
    std::cout << "w_f=" << format_fixed(w.w_f, 4) << " w_m=" << format_fixed(w.w_m, 4) << "\n";
  };
}

struct Subcommand {
  const char* name;
  const char* help;
  Action (*setup)(CLI::App&);
};

constexpr Subcommand kSubcommands[] = {
    {"synth-data", "Generate a synthetic speech translation corpus", setup_synth_data},
    {"perturb", "Apply the opposite-gender pitch and formant manipulation", setup_perturb},
    {"features", "Extract log-mel features", setup_features},
    {"train", "Train a model", setup_train},
    {"average-ckpt", "Average checkpoints elementwise", setup_average},
    {"evaluate", "Gender accuracy and BLEU report", setup_evaluate},
    {"probe", "Fit a gender probe on frozen encoder outputs", setup_probe},
    {"schedule", "Print the gradient reversal lambda schedule", setup_schedule},
    {"class-weights", "Discriminator class weights for given frequencies", setup_class_weights},
};

int run(int argc, char** argv) {
  CLI::App app{"voxtag: gender-tagged speech translation toolkit"};
  app.require_subcommand(1);
  std::vector<std::pair<CLI::App*, Action>> actions;
  for (const auto& sc : kSubcommands) {
    CLI::App* sub = app.add_subcommand(sc.name, sc.help);
    actions.emplace_back(sub, sc.setup(*sub));
  }

  if (argc > 1 && argv[1][0] != '-') {
    const std::string name = argv[1];
    const bool known = std::any_of(std::begin(kSubcommands), std::end(kSubcommands),
                                   [&](const Subcommand& s) { return name == s.name; });
    if (!known) throw Error(Errc::UnknownSubcommand, "'" + name + "'; see --help");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  for (const auto& [sub, action] : actions) {
    if (sub->parsed()) action();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "voxtag: " << e.what() << "\n";
    return voxtag::is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "voxtag: " << e.what() << "\n";
    return kExitRuntime;
  }
}
