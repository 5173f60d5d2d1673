// ekd/include/ekd/ensemble_selection.h
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

#ifndef EKD_ENSEMBLE_SELECTION_H_
#define EKD_ENSEMBLE_SELECTION_H_

#include <optional>
#include <string>
#include <vector>

#include "ekd/ctc.h"
#include "ekd/kd_losses.h"

namespace ekd {

enum class Strategy { kTeacherAverage, kFramewiseMax, kElitist };

std::string ToString(Strategy s);
Strategy ParseStrategy(const std::string &s);

// K teachers' posteriors for the same unlabeled utterance.
struct TeacherBundle {
  std::string utterance_id;
  std::vector<PosteriorSequence> per_teacher_posteriors;

  int num_teachers() const { return static_cast<int>(per_teacher_posteriors.size()); }
  // Throws Error if K == 0 or the teachers disagree on shape.
  void Validate() const;
};

struct SelectionOutcome {
  Strategy strategy = Strategy::kElitist;
  std::string utterance_id;
  PosteriorSequence selected_posteriors;
  std::optional<int> winning_teacher;       // elitist only
  std::vector<double> per_teacher_scores;   // q_k of every teacher
  LabelSeq pseudo_transcript;               // greedy decode of selected_posteriors
  double sequence_confidence = 0.0;         // utterance confidence of selected_posteriors

  SoftTarget ToSoftTarget() const;
};

// Mean over frames of the per-frame maximum posterior, i.e. the average
// confidence of the greedy label. Lies in [1/z, 1].
double UtteranceConfidence(const PosteriorSequence &posteriors);

// Frame-wise mean of the teachers' posteriors.
SelectionOutcome TeacherAverage(const TeacherBundle &bundle, int blank);

// Per frame, copies the whole row of the teacher whose largest entry is
// highest (lowest teacher index on ties).
SelectionOutcome FramewiseMax(const TeacherBundle &bundle, int blank);

// q_k = UtteranceConfidence of teacher k.
std::vector<double> ElitistScores(const TeacherBundle &bundle);

// Keeps the full sequence of argmax_k q_k (lowest index on ties); the
// confidence is the winner's q.
SelectionOutcome ElitistSelect(const TeacherBundle &bundle, int blank);

SelectionOutcome Select(Strategy strategy, const TeacherBundle &bundle, int blank);

struct SelectionResult {
  Strategy strategy = Strategy::kElitist;
  std::vector<SelectionOutcome> outcomes;
  // Per-teacher wins; filled for the elitist strategy only.
  std::vector<int> win_counts;
  // (utterance id, reason) for bundles that failed validation.
  std::vector<std::pair<std::string, std::string>> skipped;
};

// Applies `strategy` to every bundle; failing bundles are reported in
// `skipped` rather than aborting.
SelectionResult SelectCorpus(Strategy strategy, const std::vector<TeacherBundle> &bundles,
                             int blank);

}  // namespace ekd

#endif  // EKD_ENSEMBLE_SELECTION_H_
