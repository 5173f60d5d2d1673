// ekd/include/ekd/kd_losses.h
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

#ifndef EKD_KD_LOSSES_H_
#define EKD_KD_LOSSES_H_

#include <optional>
#include <string>

#include "ekd/ctc.h"
#include "ekd/types.h"

namespace ekd {

enum class SoftLabelMode {
  kPosteriorWeightedCtc,  // confidence x CTC on the pseudo transcript
  kHardPseudoLabel,       // plain CTC on the pseudo transcript
  kFramewiseKl,           // frame-level KL to the selected posteriors (ablation)
};

std::string ToString(SoftLabelMode mode);
SoftLabelMode ParseSoftLabelMode(const std::string &s);

struct KdConfig {
  double alpha = 0.0;  // weight of the supervised term; 0 when target labels are unavailable
  double temperature = 1.0;
  SoftLabelMode soft_label_mode = SoftLabelMode::kPosteriorWeightedCtc;

  void Validate() const;
};

// Training target for one unlabeled utterance.
struct SoftTarget {
  std::string utterance_id;
  LabelSeq pseudo_transcript;
  double teacher_sequence_confidence = 1.0;
  std::optional<PosteriorSequence> teacher_posteriors;
};

// sum_t sum_g p log(p / q); zero-probability p terms contribute nothing and
// q is floored at 1e-12. Throws Error on shape mismatch.
double KlDivergence(const PosteriorSequence &p, const PosteriorSequence &q);

// Frame-wise KL(teacher || softmax(logits / T)) and its gradient w.r.t. logits.
CtcLossResult FramewiseKlLoss(const Matrix &student_logits, const PosteriorSequence &teacher,
                              double temperature);

// confidence x CtcLoss(student_log_probs, pseudo_transcript); gradient scaled
// identically. Zero confidence short-circuits to a zero loss and gradient.
// Throws Error("infeasible target") like CtcLoss; callers that train skip
// such utterances.
CtcLossResult SoftCtcKdLoss(const Matrix &student_log_probs, const SoftTarget &target, int blank);

// alpha * sup + (1 - alpha) * kd.
double TotalLoss(double sup_loss, double kd_loss, const KdConfig &config);

}  // namespace ekd

#endif  // EKD_KD_LOSSES_H_
