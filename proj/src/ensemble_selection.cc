// ekd/src/ensemble_selection.cc
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

#include "ekd/ensemble_selection.h"

#include <algorithm>

namespace ekd {

std::string ToString(Strategy s) {
  switch (s) {
    case Strategy::kTeacherAverage: return "teacher_average";
    case Strategy::kFramewiseMax: return "framewise_max";
    case Strategy::kElitist: return "elitist";
  }
  return "?";
}

Strategy ParseStrategy(const std::string &s) {
  if (s == "teacher_average") return Strategy::kTeacherAverage;
  if (s == "framewise_max") return Strategy::kFramewiseMax;
  if (s == "elitist") return Strategy::kElitist;
  throw ConfigError("unknown strategy '" + s + "'");
}

void TeacherBundle::Validate() const {
  if (per_teacher_posteriors.empty()) throw Error("bundle " + utterance_id + ": no teachers");
  const auto &first = per_teacher_posteriors.front().probs;
  if (first.rows() < 1 || first.cols() < 1) throw Error("bundle " + utterance_id + ": empty");
  for (const auto &p : per_teacher_posteriors)
    if (p.probs.rows() != first.rows() || p.probs.cols() != first.cols())
      throw Error("bundle " + utterance_id + ": teacher shape mismatch");
}

SoftTarget SelectionOutcome::ToSoftTarget() const {
  return {utterance_id, pseudo_transcript, sequence_confidence, selected_posteriors};
}

double UtteranceConfidence(const PosteriorSequence &posteriors) {
  const Eigen::Index frames = posteriors.probs.rows();
  double sum = 0.0;
  for (Eigen::Index t = 0; t < frames; ++t) sum += posteriors.probs.row(t).maxCoeff();
  return sum / static_cast<double>(frames);
}

namespace {

SelectionOutcome Finish(Strategy strategy, const TeacherBundle &bundle,
                        PosteriorSequence selected, int blank) {
  SelectionOutcome out;
  out.strategy = strategy;
  out.utterance_id = bundle.utterance_id;
  out.per_teacher_scores = ElitistScores(bundle);
  out.pseudo_transcript = GreedyDecode(selected, blank);
  out.sequence_confidence = UtteranceConfidence(selected);
  out.selected_posteriors = std::move(selected);
  return out;
}

}  // namespace

SelectionOutcome TeacherAverage(const TeacherBundle &bundle, int blank) {
  bundle.Validate();
  Matrix sum = bundle.per_teacher_posteriors.front().probs;
  for (std::size_t k = 1; k < bundle.per_teacher_posteriors.size(); ++k)
    sum += bundle.per_teacher_posteriors[k].probs;
  sum /= static_cast<double>(bundle.num_teachers());
  return Finish(Strategy::kTeacherAverage, bundle, {std::move(sum), bundle.utterance_id}, blank);
}

SelectionOutcome FramewiseMax(const TeacherBundle &bundle, int blank) {
  bundle.Validate();
  const auto &teachers = bundle.per_teacher_posteriors;
  Matrix out(teachers.front().probs.rows(), teachers.front().probs.cols());
  for (Eigen::Index t = 0; t < out.rows(); ++t) {
    std::size_t best = 0;
    double best_peak = teachers[0].probs.row(t).maxCoeff();
    for (std::size_t k = 1; k < teachers.size(); ++k) {
      const double peak = teachers[k].probs.row(t).maxCoeff();
      if (peak > best_peak) {
        best_peak = peak;
        best = k;
      }
    }
    out.row(t) = teachers[best].probs.row(t);
  }
  return Finish(Strategy::kFramewiseMax, bundle, {std::move(out), bundle.utterance_id}, blank);
}

std::vector<double> ElitistScores(const TeacherBundle &bundle) {
  std::vector<double> q;
  q.reserve(bundle.per_teacher_posteriors.size());
  for (const auto &p : bundle.per_teacher_posteriors) q.push_back(UtteranceConfidence(p));
  return q;
}

SelectionOutcome ElitistSelect(const TeacherBundle &bundle, int blank) {
  bundle.Validate();
  const std::vector<double> q = ElitistScores(bundle);
  // max_element returns the first maximum, giving the lowest-index tie-break.
  const int winner = static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
  SelectionOutcome out;
  out.strategy = Strategy::kElitist;
  out.utterance_id = bundle.utterance_id;
  out.selected_posteriors = bundle.per_teacher_posteriors[winner];
  out.winning_teacher = winner;
  out.per_teacher_scores = q;
  out.pseudo_transcript = GreedyDecode(out.selected_posteriors, blank);
  out.sequence_confidence = q[winner];
  return out;
}

SelectionOutcome Select(Strategy strategy, const TeacherBundle &bundle, int blank) {
  switch (strategy) {
    case Strategy::kTeacherAverage: return TeacherAverage(bundle, blank);
    case Strategy::kFramewiseMax: return FramewiseMax(bundle, blank);
    case Strategy::kElitist: return ElitistSelect(bundle, blank);
  }
  throw Error("unknown strategy");
}

SelectionResult SelectCorpus(Strategy strategy, const std::vector<TeacherBundle> &bundles,
                             int blank) {
  SelectionResult result;
  result.strategy = strategy;
  if (bundles.empty()) return result;
  const int k = bundles.front().num_teachers();
  if (strategy == Strategy::kElitist) result.win_counts.assign(std::max(k, 0), 0);
  for (const auto &b : bundles) {
    try {
      if (b.num_teachers() != k) throw Error("bundle " + b.utterance_id + ": teacher count differs");
      SelectionOutcome o = Select(strategy, b, blank);
      if (o.winning_teacher) ++result.win_counts[*o.winning_teacher];
      result.outcomes.push_back(std::move(o));
    } catch (const Error &e) {
      result.skipped.emplace_back(b.utterance_id, e.what());
    }
  }
  return result;
}

}  // namespace ekd
