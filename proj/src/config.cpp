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

#include "voxtag/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "voxtag/error.hpp"

namespace voxtag::config {

namespace {

using json = nlohmann::ordered_json;

struct Field {
  std::string name;
  std::function<void(const json&, const std::string& path)> read;
  std::function<json()> write;
  bool is_bool = false;
};

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(Errc::ConfigInvalid, path + ": " + what);
}

template <typename T>
Field uint_field(std::string name, T& ref) {
  return {std::move(name),
          [&ref](const json& v, const std::string& path) {
            if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
              bad(path, "expected a non-negative integer");
            }
            ref = static_cast<T>(v.get<std::uint64_t>());
          },
          [&ref] { return json(ref); }};
}

Field real_field(std::string name, double& ref) {
  return {std::move(name),
          [&ref](const json& v, const std::string& path) {
            if (!v.is_number()) bad(path, "expected a number");
            ref = v.get<double>();
          },
          [&ref] { return json(ref); }};
}

Field bool_field(std::string name, bool& ref) {
  return {std::move(name),
          [&ref](const json& v, const std::string& path) {
            if (!v.is_boolean()) bad(path, "expected true or false");
            ref = v.get<bool>();
          },
          [&ref] { return json(ref); },
          true};
}

Field optional_real_field(std::string name, std::optional<double>& ref) {
  return {std::move(name),
          [&ref](const json& v, const std::string& path) {
            if (v.is_null()) {
              ref.reset();
            } else if (v.is_number()) {
              ref = v.get<double>();
            } else {
              bad(path, "expected a number or null");
            }
          },
          [&ref] { return ref ? json(*ref) : json(nullptr); }};
}

// String-valued enum, parsed with `parse` and printed with `print`.
template <typename E, typename Parse, typename Print>
Field enum_field(std::string name, E& ref, Parse parse, Print print) {
  return {std::move(name),
          [&ref, parse](const json& v, const std::string& path) {
            if (!v.is_string()) bad(path, "expected a string");
            try {
              ref = parse(v.get<std::string>());
            } catch (const Error& e) {
              bad(path, e.what());
            }
          },
          [&ref, print] { return json(std::string(print(ref))); }};
}

using Sections = std::vector<std::pair<std::string, std::vector<Field>>>;

Sections sections(RunConfig& c) {
  auto& m = c.model;
  auto& t = c.train;
  auto& p = c.perturb;
  auto& s = c.synth;
  auto& g = c.synth.grammar;
  return {
      {"model",
       {uint_field("hidden_dim", m.hidden_dim), uint_field("ff_dim", m.ff_dim),
        uint_field("encoder_layers", m.encoder_layers),
        uint_field("decoder_layers", m.decoder_layers), uint_field("disc_hidden", m.disc_hidden),
        uint_field("max_target_len", m.max_target_len),
        real_field("label_smoothing", m.label_smoothing),
        real_field("disc_loss_weight", m.disc_loss_weight), real_field("dropout", m.dropout),
        enum_field("mode", m.mode, model::parse_mode,
                   [](model::Mode x) { return model::to_string(x); })}},
      {"train",
       {enum_field("strategy", t.strategy, train::parse_strategy,
                   [](train::Strategy x) { return train::to_string(x); }),
        bool_field("use_grl", t.use_grl), optional_real_field("grl_lambda", c.grl_lambda),
        bool_field("grl_ramp", c.grl_ramp), real_field("grl_gamma", c.grl_gamma),
        bool_field("perturb", c.perturb_enabled), real_field("lr_peak", t.lr_peak),
        uint_field("warmup_updates", t.warmup_updates),
        uint_field("total_updates", t.total_updates), uint_field("batch_size", t.batch_size),
        uint_field("average_last", t.average_last),
        uint_field("checkpoint_every", t.checkpoint_every),
        real_field("validation_fraction", t.validation_fraction)}},
      {"perturb",
       {real_field("p", p.p), real_field("feminine_mean", p.feminine.mean),
        real_field("feminine_std", p.feminine.stddev), real_field("masculine_mean", p.masculine.mean),
        real_field("masculine_std", p.masculine.stddev), real_field("formant_up", p.formant_up),
        real_field("formant_down", p.formant_down)}},
      {"synth",
       {uint_field("n_utterances", s.n_utterances), real_field("gender_split", s.gender_split),
        real_field("feminine_mean", s.f0_feminine.mean),
        real_field("feminine_std", s.f0_feminine.stddev),
        real_field("masculine_mean", s.f0_masculine.mean),
        real_field("masculine_std", s.f0_masculine.stddev),
        real_field("gender_threshold_hz", s.gender_threshold_hz),
        uint_field("sample_rate", s.sample_rate), uint_field("min_length", g.min_length),
        uint_field("max_length", g.max_length), uint_field("min_gendered", g.min_gendered),
        uint_field("max_gendered", g.max_gendered)}},
  };
}

}  // namespace

void RunConfig::resolve() {
  train.seed = seed;
  perturb.seed = seed;
  synth.seed = seed;
  train.perturb = perturb_enabled ? std::optional(perturb) : std::nullopt;
  if (grl_ramp && grl_lambda) bad("train", "grl_lambda and grl_ramp are mutually exclusive");
  train.grl_schedule.reset();
  if (grl_ramp) {
    ad::LambdaSchedule s;
    s.gamma = grl_gamma;
    s.total_updates = train.total_updates;
    train.grl_schedule = s;
  } else if (grl_lambda) {
    ad::LambdaSchedule s;
    s.fixed_lambda = *grl_lambda;
    s.total_updates = train.total_updates;
    train.grl_schedule = s;
  }
  try {
    model.validate();
    train.validate();
    perturb.validate();
    synth.validate();
  } catch (const Error& e) {
    throw Error(Errc::ConfigInvalid, e.what());
  }
}

RunConfig parse_run_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ConfigInvalid, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) bad("config", "expected a JSON object");
  RunConfig cfg;
  Sections secs = sections(cfg);
  for (const auto& [key, value] : doc.items()) {
    if (key == "seed") {
      uint_field("seed", cfg.seed).read(value, "seed");
      continue;
    }
    const auto sec = std::find_if(secs.begin(), secs.end(), [&](const auto& s) { return s.first == key; });
    if (sec == secs.end()) bad(key, "unknown key");
    if (!value.is_object()) bad(key, "expected an object");
    for (const auto& [name, v] : value.items()) {
      const auto f = std::find_if(sec->second.begin(), sec->second.end(),
                                  [&](const Field& x) { return x.name == name; });
      if (f == sec->second.end()) bad(key + "." + name, "unknown key");
      f->read(v, key + "." + name);
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigInvalid, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::vector<FieldInfo> list_fields(std::string_view section) {
  RunConfig scratch;
  for (const auto& [name, fields] : sections(scratch)) {
    if (name != section) continue;
    std::vector<FieldInfo> out;
    for (const auto& f : fields) out.push_back({name, f.name, f.is_bool});
    return out;
  }
  bad(std::string(section), "unknown section");
}

void set_field(RunConfig& cfg, std::string_view section, std::string_view key,
               std::string_view text) {
  const std::string path = std::string(section) + "." + std::string(key);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded() || value.is_object() || value.is_array()) value = std::string(text);
  for (const auto& [name, fields] : sections(cfg)) {
    if (name != section) continue;
    for (const auto& f : fields) {
      if (f.name == key) return f.read(value, path);
    }
  }
  bad(path, "unknown key");
}

std::string to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  json doc;
  doc["seed"] = copy.seed;
  for (const auto& [key, fields] : sections(copy)) {
    json sec = json::object();
    for (const auto& f : fields) sec[f.name] = f.write();
    doc[key] = sec;
  }
  return doc.dump(2) + "\n";
}

}  // namespace voxtag::config
