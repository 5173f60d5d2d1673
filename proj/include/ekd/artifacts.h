// ekd/include/ekd/artifacts.h
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

#ifndef EKD_ARTIFACTS_H_
#define EKD_ARTIFACTS_H_

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "ekd/ctc.h"
#include "ekd/decoder.h"
#include "ekd/ensemble_selection.h"
#include "ekd/svcca.h"
#include "ekd/trainer.h"

namespace ekd {

// One teacher's posteriors over an unlabeled corpus.
struct PosteriorDump {
  std::string teacher;
  std::string vocabulary_hash;
  std::vector<PosteriorSequence> sequences;
};

void SavePosteriorDump(const PosteriorDump &dump, const std::string &path);
PosteriorDump LoadPosteriorDump(const std::string &path);

struct SelectionFile {
  std::string vocabulary_hash;
  std::vector<std::string> teacher_names;
  SelectionResult result;
};

void SaveSelectionFile(const SelectionFile &file, const std::string &path);
SelectionFile LoadSelectionFile(const std::string &path);
// "teacher<TAB>wins" lines plus selected / skipped totals.
std::string SelectionSummary(const SelectionFile &file);

void SaveActivations(const ActivationMatrix &acts, const FrameSample &sample,
                     const std::string &path);
ActivationMatrix LoadActivations(const std::string &path, FrameSample *sample = nullptr);

struct ResultCell {
  std::uint64_t seed = 0;
  std::string test_set;
  std::string model;
  bool lm = false;
  WerBreakdown wer;
  bool failed = false;
};

// WER cells keyed by (seed, test set, model, lm).
class ResultTable {
 public:
  void Add(ResultCell cell);
  const std::vector<ResultCell> &cells() const { return cells_; }
  // Throws Error when absent.
  const ResultCell &At(std::uint64_t seed, const std::string &test_set, const std::string &model,
                       bool lm) const;
  bool Has(std::uint64_t seed, const std::string &test_set, const std::string &model,
           bool lm) const;
  // Mean and sample standard deviation of WER over seeds.
  std::pair<double, double> MeanStd(const std::string &test_set, const std::string &model,
                                    bool lm) const;

  // Aligned per-seed rows followed by a mean/std summary block.
  std::string ToText() const;
  // seed, test_set, model, lm, S, I, D, N, wer, status; exact round-trip.
  std::string ToTsv() const;
  static ResultTable FromTsv(const std::string &text);

  bool operator==(const ResultTable &o) const { return ToTsv() == o.ToTsv(); }

 private:
  std::vector<ResultCell> cells_;
};

}  // namespace ekd

#endif  // EKD_ARTIFACTS_H_
