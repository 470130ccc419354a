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
#include <string>
#include <string_view>
#include <vector>

#include "voxtag/model.hpp"
#include "voxtag/perturb.hpp"
#include "voxtag/synthdata.hpp"
#include "voxtag/train.hpp"

namespace voxtag::config {

/// Everything a run can be configured with. JSON layout:
///
///   {"seed": 0,
///    "model":   {"hidden_dim": 64, "mode": "multi_gender", ...},
///    "train":   {"strategy": "scratch", "use_grl": false, "grl_lambda": null,
///                "grl_ramp": false, "grl_gamma": 10, "perturb": false, ...},
///    "perturb": {"p": 0.5, "feminine_mean": 250, ...},
///    "synth":   {"n_utterances": 200, "gender_split": 0.3, ...}}
///
/// Every key is optional. The top-level seed feeds the training, perturbation
/// and synthesis seeds.
struct RunConfig {
  std::uint64_t seed = 0;
  model::ModelConfig model;
  train::TrainConfig train;
  bool perturb_enabled = false;
  perturb::PerturbConfig perturb;
  /// Fixed GRL lambda; unset selects the strategy default.
  std::optional<double> grl_lambda;
  bool grl_ramp = false;
  double grl_gamma = 10.0;
  synth::SynthSpec synth;

  /// Copies seed, perturbation and GRL settings into `train`, `perturb` and
  /// `synth`, then validates every section. Throws ConfigInvalid.
  void resolve();
};

/// Throws ConfigInvalid for malformed JSON, unknown keys or wrong types.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

struct FieldInfo {
  std::string section;
  std::string key;
  bool is_bool = false;
};

/// Fields of `section` ("model", "train", "perturb" or "synth").
std::vector<FieldInfo> list_fields(std::string_view section);

/// Sets one field from command-line text. The text is read as a JSON
/// scalar when it parses as one, else as a string. Throws ConfigInvalid.
void set_field(RunConfig& cfg, std::string_view section, std::string_view key,
               std::string_view text);

/// Every field, in the layout parse_run_config reads.
std::string to_json(const RunConfig& cfg);

}  // namespace voxtag::config
