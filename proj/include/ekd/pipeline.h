// ekd/include/ekd/pipeline.h
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

#ifndef EKD_PIPELINE_H_
#define EKD_PIPELINE_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ekd/artifacts.h"
#include "ekd/experiment_config.h"

namespace ekd {

// Raised when a pipeline stage fails. Artifacts written by earlier stages are
// kept, so re-running resumes at `stage`.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string &what)
      : Error("stage " + stage + " failed: " + what), stage_(std::move(stage)) {}
  const std::string &stage() const { return stage_; }

 private:
  std::string stage_;
};

// Deterministic sub-seed for a named purpose (FNV-1a of the tag mixed with
// the run seed).
std::uint64_t DeriveSeed(std::uint64_t seed, const std::string &tag);

// Resolves the run directory: an explicit path wins, then the config's
// output_dir; relative paths are placed under $EKD_OUTPUT_ROOT when set.
std::string ResolveRunDir(const ExperimentConfig &config, const std::string &explicit_dir = "");

enum class LmMode { kOff, kOn, kBoth };
LmMode ParseLmMode(const std::string &s);

// File layout and stages of one experiment. Every stage reads its inputs from
// and writes its outputs to the run directory; a stage whose outputs already
// exist is skipped unless `force` is set.
class Experiment {
 public:
  Experiment(ExperimentConfig config, std::string run_dir, std::ostream *log = nullptr);

  const ExperimentConfig &config() const { return config_; }
  const std::string &run_dir() const { return run_dir_; }
  std::string SeedDir(std::uint64_t seed) const;

  std::string TrainCorpusPath(std::uint64_t seed, const std::string &domain) const;
  std::string TestCorpusPath(std::uint64_t seed, const std::string &domain) const;
  std::string ProbeCorpusPath(std::uint64_t seed, const std::string &domain) const;
  // Labelled copy of the student training split; read only by the
  // original-label reference student.
  std::string StudentLabelledPath(std::uint64_t seed) const;
  std::string ModelPath(std::uint64_t seed, const std::string &model, int epoch = -1) const;
  std::string LmPath(std::uint64_t seed) const;
  std::string PosteriorPath(std::uint64_t seed, const std::string &teacher) const;
  std::string SelectionPath(std::uint64_t seed, Strategy strategy) const;
  std::string CellPath(std::uint64_t seed, const std::string &model, const std::string &test_set,
                       bool lm) const;
  std::string SvccaPath(std::uint64_t seed) const;

  static std::string TeacherModelName(const std::string &teacher) { return "teacher-" + teacher; }
  static std::string StudentModelName(Strategy s) { return "student-" + ToString(s); }
  static std::string ReferenceModelName() { return "student-original"; }
  static std::string TestSetName(const std::string &domain) { return domain + ".test"; }

  // Writes config.json into the run directory.
  void WriteConfig() const;

  void GenData(std::uint64_t seed, bool force = false);
  // Trains every teacher and applies the quality gate on its probe split.
  void TrainTeachers(std::uint64_t seed, bool force = false);
  void TrainTeacher(std::uint64_t seed, const std::string &teacher, bool force = false);
  // Word n-gram LM on the union of the teachers' training transcripts.
  void TrainLm(std::uint64_t seed, bool force = false);
  // Posteriors of each teacher on the unlabeled student training split.
  void Decode(std::uint64_t seed, bool force = false);
  SelectionFile Select(std::uint64_t seed, Strategy strategy, bool force = false);
  void TrainStudent(std::uint64_t seed, Strategy strategy, bool force = false);
  // Student trained on the true transcripts of the student training split.
  void TrainReference(std::uint64_t seed, bool force = false);
  // Teachers on every test set, students on the student test set.
  void Evaluate(std::uint64_t seed, LmMode mode = LmMode::kBoth, bool force = false);
  // Original-label vs elitist pseudo-label student through training.
  SvccaReport Svcca(std::uint64_t seed, bool force = false);

  // All configured stages for one seed.
  void RunSeed(std::uint64_t seed);

  // Every configured cell; cells without a result file are marked failed.
  ResultTable Collect() const;
  // Elitist win counts per seed.
  std::string WinCountReport() const;
  // Mean SVCCA difference per layer and seed.
  std::string SvccaSummary() const;

  // Writes results.tsv and results.txt.
  ResultTable WriteReport() const;

 private:
  template <typename F>
  void Stage(const std::string &name, std::uint64_t seed, F &&body);
  void Log(const std::string &msg) const;
  std::vector<std::string> ModelNames() const;
  TrainConfig SeededTrain(const TrainConfig &base, std::uint64_t seed,
                          const std::string &tag) const;
  ModelConfig SeededModel(std::uint64_t seed, const std::string &tag) const;

  ExperimentConfig config_;
  std::string run_dir_;
  std::ostream *log_;
};

// Runs every seed and returns the collected table (also written to disk).
ResultTable RunPipeline(const ExperimentConfig &config, const std::string &run_dir = "",
                        std::ostream *log = nullptr);

}  // namespace ekd

#endif  // EKD_PIPELINE_H_
