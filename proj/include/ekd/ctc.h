// ekd/include/ekd/ctc.h
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

#ifndef EKD_CTC_H_
#define EKD_CTC_H_

#include <span>
#include <string>

#include "ekd/types.h"

namespace ekd {

// Pre-softmax network outputs, one row per output frame.
struct LogitSequence {
  Matrix values;  // T_y x z
  std::string utterance_id;
};

// Per-frame distributions over the vocabulary; rows sum to one.
struct PosteriorSequence {
  Matrix probs;  // T_y x z
  std::string utterance_id;

  int num_frames() const { return static_cast<int>(probs.rows()); }
  int vocab_size() const { return static_cast<int>(probs.cols()); }
  // Throws Error unless every entry is in [0,1] and rows sum to 1 +- tol.
  void Validate(double tol = 1e-6) const;
  bool operator==(const PosteriorSequence &o) const {
    return utterance_id == o.utterance_id && probs.rows() == o.probs.rows() &&
           probs.cols() == o.probs.cols() && probs == o.probs;
  }
};

struct CtcLossResult {
  double loss = 0.0;   // negative log-likelihood in nats
  Matrix grad_logits;  // d loss / d logits, T_y x z
};

double LogAdd(double a, double b);

// Row-wise log-softmax of logits / temperature.
Matrix LogSoftmax(const Matrix &logits, double temperature = 1.0);

// Throws Error for temperature <= 0 or non-finite logits.
PosteriorSequence Softmax(const LogitSequence &logits, double temperature = 1.0);

// Fewest frames that can emit `target`: its length plus one blank between
// every pair of equal neighbours.
int MinFramesForTarget(std::span<const int> target);

// CTC negative log-likelihood of `target` under per-frame log-probabilities
// computed by forward-backward in the log domain. The gradient is taken with
// respect to the logits that produced `log_probs` through a temperature-1
// log-softmax: exp(log_probs) minus the per-label alignment occupancy.
//
// Throws Error("infeasible target") when T_y < MinFramesForTarget, and Error
// for an empty target, a blank or out-of-range label, or NaN input.
CtcLossResult CtcLoss(const Matrix &log_probs, std::span<const int> target, int blank);

// Removes consecutive repeats, then blanks.
LabelSeq CollapseAlignment(std::span<const int> path, int blank);

// Per-frame argmax (lowest index on ties) followed by CollapseAlignment.
// Works on probabilities, log-probabilities or logits alike.
LabelSeq GreedyDecode(const Matrix &scores, int blank);
inline LabelSeq GreedyDecode(const PosteriorSequence &posteriors, int blank) {
  return GreedyDecode(posteriors.probs, blank);
}

}  // namespace ekd

#endif  // EKD_CTC_H_
