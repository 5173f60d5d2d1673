// ekd/src/kd_losses.cc
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

#include "ekd/kd_losses.h"

#include <algorithm>
#include <cmath>

namespace ekd {

std::string ToString(SoftLabelMode mode) {
  switch (mode) {
    case SoftLabelMode::kPosteriorWeightedCtc: return "posterior_weighted_ctc";
    case SoftLabelMode::kHardPseudoLabel: return "hard_pseudo_label";
    case SoftLabelMode::kFramewiseKl: return "framewise_kl";
  }
  return "?";
}

SoftLabelMode ParseSoftLabelMode(const std::string &s) {
  if (s == "posterior_weighted_ctc") return SoftLabelMode::kPosteriorWeightedCtc;
  if (s == "hard_pseudo_label") return SoftLabelMode::kHardPseudoLabel;
  if (s == "framewise_kl") return SoftLabelMode::kFramewiseKl;
  throw ConfigError("unknown soft_label_mode '" + s + "'");
}

void KdConfig::Validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("kd.alpha must be in [0,1]");
  if (!(temperature > 0.0)) throw ConfigError("kd.temperature must be positive");
}

double KlDivergence(const PosteriorSequence &p, const PosteriorSequence &q) {
  if (p.probs.rows() != q.probs.rows() || p.probs.cols() != q.probs.cols())
    throw Error("KL shape mismatch");
  double kl = 0.0;
  for (Eigen::Index t = 0; t < p.probs.rows(); ++t) {
    for (Eigen::Index g = 0; g < p.probs.cols(); ++g) {
      const double pv = p.probs(t, g);
      if (pv <= 0.0) continue;
      kl += pv * (std::log(pv) - std::log(std::max(q.probs(t, g), 1e-12)));
    }
  }
  return kl;
}

CtcLossResult FramewiseKlLoss(const Matrix &student_logits, const PosteriorSequence &teacher,
                              double temperature) {
  if (student_logits.rows() != teacher.probs.rows() ||
      student_logits.cols() != teacher.probs.cols())
    throw Error("KL shape mismatch");
  PosteriorSequence student{LogSoftmax(student_logits, temperature).array().exp().matrix(),
                            teacher.utterance_id};
  CtcLossResult r;
  r.loss = KlDivergence(teacher, student);
  r.grad_logits = (student.probs - teacher.probs) / temperature;
  return r;
}

CtcLossResult SoftCtcKdLoss(const Matrix &student_log_probs, const SoftTarget &target,
                            int blank) {
  const double c = target.teacher_sequence_confidence;
  if (!(c >= 0.0 && c <= 1.0)) throw Error("teacher confidence outside [0,1]");
  if (c == 0.0) {
    // Still reject transcripts the student could never emit.
    if (student_log_probs.rows() < MinFramesForTarget(target.pseudo_transcript))
      throw Error("infeasible target");
    return {0.0, Matrix::Zero(student_log_probs.rows(), student_log_probs.cols())};
  }
  CtcLossResult r = CtcLoss(student_log_probs, target.pseudo_transcript, blank);
  r.loss *= c;
  r.grad_logits *= c;
  return r;
}

double TotalLoss(double sup_loss, double kd_loss, const KdConfig &config) {
  if (config.alpha == 0.0) return kd_loss;
  if (config.alpha == 1.0) return sup_loss;
  return config.alpha * sup_loss + (1.0 - config.alpha) * kd_loss;
}

}  // namespace ekd
