// ekd/include/ekd/trainer.h
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

#ifndef EKD_TRAINER_H_
#define EKD_TRAINER_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ekd/decoder.h"
#include "ekd/ensemble_selection.h"
#include "ekd/kd_losses.h"
#include "ekd/model.h"
#include "ekd/svcca.h"
#include "ekd/vocab_corpus.h"

namespace ekd {

enum class Optimizer { kSgd, kAdam };
std::string ToString(Optimizer o);
Optimizer ParseOptimizer(const std::string &s);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::kAdam;
  double gradient_clip = 5.0;  // global L2 norm; <= 0 disables
  std::uint64_t seed = 1;
  int eval_every = 0;  // epochs between snapshots; 0 = none

  void Validate() const;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct TrainOptions {
  std::ostream *log = nullptr;
  // Allow alpha > 0 in TrainStudent, which then reads target transcripts.
  bool allow_supervised_student = false;
};

struct TrainResult {
  AcousticModel model;
  std::vector<double> epoch_losses;  // mean per-utterance loss
  // (epoch, model) every eval_every epochs, including the final epoch.
  std::vector<std::pair<int, AcousticModel>> snapshots;
  int skipped_utterances = 0;
};

// Mean-reduced CTC on the corpus transcripts. Throws ConfigError for a corpus
// without transcripts and TrainingError if the loss diverges.
TrainResult TrainTeacher(const Corpus &corpus, const ModelConfig &model_cfg,
                         const TrainConfig &train_cfg, const TrainOptions &opts = {});

// Student training on teacher selections only. Utterances without a usable
// selection are skipped with a warning. With alpha == 0 (the default)
// transcripts are never read; alpha > 0 requires opts.allow_supervised_student.
TrainResult TrainStudent(const std::vector<SelectionOutcome> &selections,
                         const Corpus &target_corpus, const ModelConfig &model_cfg,
                         const TrainConfig &train_cfg, const KdConfig &kd_cfg,
                         const TrainOptions &opts = {});

// Corpus-level WER. Without an LM and with beam_width 1 this is greedy
// decoding; otherwise prefix beam search with shallow fusion.
WerBreakdown EvaluateWer(const AcousticModel &model, const Corpus &corpus,
                         const NgramLm *lm = nullptr, const BeamConfig *beam = nullptr);

// Throws TrainingError if the greedy WER on `probe` exceeds `max_wer`.
WerBreakdown CheckTeacherQuality(const AcousticModel &model, const Corpus &probe, double max_wer);

// Corpus-level frame positions (utterance index, frame index).
struct FrameSample {
  std::vector<std::pair<int, int>> frames;
};

// Deterministic subsample of n_frames positions, sorted; every frame when
// n_frames >= total. Depends only on the corpus shape and seed, so the same
// positions are reused for every model.
FrameSample SampleFrames(const Corpus &corpus, std::int64_t n_frames, std::uint64_t seed);

// One matrix per hidden layer ("hidden0", "hidden1", ...), rows in
// `sample` order.
std::vector<ActivationMatrix> DumpActivations(const AcousticModel &model, const Corpus &corpus,
                                              const FrameSample &sample,
                                              const std::string &model_id = "", int step = 0);
inline std::vector<ActivationMatrix> DumpActivations(const AcousticModel &model,
                                                     const Corpus &corpus, std::int64_t n_frames,
                                                     std::uint64_t seed) {
  return DumpActivations(model, corpus, SampleFrames(corpus, n_frames, seed));
}

}  // namespace ekd

#endif  // EKD_TRAINER_H_
