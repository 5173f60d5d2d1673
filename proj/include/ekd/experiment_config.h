// ekd/include/ekd/experiment_config.h
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

#ifndef EKD_EXPERIMENT_CONFIG_H_
#define EKD_EXPERIMENT_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ekd/decoder.h"
#include "ekd/ensemble_selection.h"
#include "ekd/kd_losses.h"
#include "ekd/model.h"
#include "ekd/trainer.h"
#include "ekd/vocab_corpus.h"

namespace ekd {

// A domain as declared in the config plus its corpus sizes.
struct DomainConfig {
  DomainSpec spec;
  int train_utterances = 200;
  int test_utterances = 60;
};

struct SvccaConfig {
  bool enabled = true;
  int frames = 1500;
  double variance_fraction = 0.99;
};

struct ExperimentConfig {
  Vocabulary vocabulary;
  std::vector<DomainConfig> teachers;
  DomainConfig student;
  int probe_utterances = 40;
  ModelConfig model;
  TrainConfig teacher_train;
  TrainConfig student_train;
  KdConfig kd;
  BeamConfig beam;
  int lm_order = 3;
  double teacher_gate_wer = 0.15;  // <= 0 disables the gate
  bool allow_indomain = false;
  std::vector<Strategy> strategies;
  std::vector<std::uint64_t> seeds;
  SvccaConfig svcca;
  std::string output_dir = "runs/default";
  nlohmann::json source;  // merged JSON the config was built from

  // Throws ConfigError on any violated invariant, including a student domain
  // that matches a teacher domain when allow_indomain is false.
  void Validate() const;
  const DomainConfig &Teacher(const std::string &name) const;
};

// The documented default configuration (three teachers with unequal training
// sets, one unseen student domain, five seeds).
nlohmann::json DefaultConfigJson();

// Recursively overlays `patch` onto `base` (objects merge, everything else
// replaces).
nlohmann::json MergeJson(nlohmann::json base, const nlohmann::json &patch);

// Applies "a.b.c=value" overrides; value is parsed as JSON, falling back to
// a plain string.
nlohmann::json ApplyOverrides(nlohmann::json config, const std::vector<std::string> &overrides);

// Builds and validates a config from JSON merged over the defaults.
ExperimentConfig BuildConfig(const nlohmann::json &user);
ExperimentConfig LoadConfigFile(const std::string &path,
                                const std::vector<std::string> &overrides = {});

}  // namespace ekd

#endif  // EKD_EXPERIMENT_CONFIG_H_
