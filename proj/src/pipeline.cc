// ekd/src/pipeline.cc
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

#include "ekd/pipeline.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "ekd/binary_io.h"
#include "ekd/ngram_lm.h"

namespace ekd {

namespace fs = std::filesystem;

std::uint64_t DeriveSeed(std::uint64_t seed, const std::string &tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer
  std::uint64_t z = h ^ (seed * 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string ResolveRunDir(const ExperimentConfig &config, const std::string &explicit_dir) {
  fs::path dir = explicit_dir.empty() ? fs::path(config.output_dir) : fs::path(explicit_dir);
  if (dir.is_relative()) {
    if (const char *root = std::getenv("EKD_OUTPUT_ROOT"); root && *root) dir = fs::path(root) / dir;
  }
  return dir.string();
}

LmMode ParseLmMode(const std::string &s) {
  if (s == "on") return LmMode::kOn;
  if (s == "off") return LmMode::kOff;
  if (s == "both") return LmMode::kBoth;
  throw ConfigError("lm mode must be on, off or both: " + s);
}

namespace {

bool Exists(const std::string &path) { return fs::exists(path); }

std::string Require(const std::string &path) {
  if (!fs::exists(path)) throw Error("missing required artifact: " + path);
  return path;
}

std::vector<int> SnapshotEpochs(const TrainConfig &cfg) {
  std::vector<int> out;
  if (cfg.eval_every > 0)
    for (int e = 1; e <= cfg.epochs; ++e)
      if (e % cfg.eval_every == 0 || e == cfg.epochs) out.push_back(e);
  return out;
}

void SaveRun(const TrainResult &r, const std::string &final_path,
             const std::function<std::string(int)> &snapshot_path) {
  for (const auto &[epoch, m] : r.snapshots) m.Save(snapshot_path(epoch));
  r.model.Save(final_path);
}

std::vector<bool> LmFlags(LmMode mode) {
  switch (mode) {
    case LmMode::kOff: return {false};
    case LmMode::kOn: return {true};
    case LmMode::kBoth: return {false, true};
  }
  return {};
}

SvccaReport ParseSvccaTsv(const std::string &text) {
  SvccaReport rep;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  std::map<std::pair<std::string, int>, std::size_t> index;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string layer, metric;
    int step = 0;
    double value = 0.0;
    if (!(ls >> layer >> step >> metric >> value)) throw FormatError("bad svcca row: " + line);
    auto key = std::make_pair(layer, step);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rep.rows.size()).first;
      rep.rows.push_back({layer, step});
    }
    TrajectoryRow &r = rep.rows[it->second];
    if (metric == "rho_a") r.rho_a = value;
    else if (metric == "rho_b") r.rho_b = value;
    else if (metric == "cross_rho") r.cross_rho = value;
    else if (metric == "difference") r.difference = value;
  }
  return rep;
}

// Final-epoch loss as the per-utterance mean used for training and as the
// corpus sum.
std::string LossSummary(const TrainResult &r, std::size_t n_utterances) {
  std::ostringstream os;
  const double mean = r.epoch_losses.empty() ? 0.0 : r.epoch_losses.back();
  os << "final loss mean " << mean << " sum " << mean * static_cast<double>(n_utterances);
  return os.str();
}

std::string ReadText(const std::string &path) {
  const auto bytes = ReadFileBytes(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace

Experiment::Experiment(ExperimentConfig config, std::string run_dir, std::ostream *log)
    : config_(std::move(config)), run_dir_(std::move(run_dir)), log_(log) {
  if (run_dir_.empty()) run_dir_ = ResolveRunDir(config_);
}

std::string Experiment::SeedDir(std::uint64_t seed) const {
  return (fs::path(run_dir_) / ("seed-" + std::to_string(seed))).string();
}

std::string Experiment::TrainCorpusPath(std::uint64_t seed, const std::string &domain) const {
  return SeedDir(seed) + "/data/" + domain + ".train.ekdc";
}
std::string Experiment::TestCorpusPath(std::uint64_t seed, const std::string &domain) const {
  return SeedDir(seed) + "/data/" + domain + ".test.ekdc";
}
std::string Experiment::ProbeCorpusPath(std::uint64_t seed, const std::string &domain) const {
  return SeedDir(seed) + "/data/" + domain + ".probe.ekdc";
}
std::string Experiment::StudentLabelledPath(std::uint64_t seed) const {
  return SeedDir(seed) + "/data/" + config_.student.spec.name + ".train.labelled.ekdc";
}
std::string Experiment::ModelPath(std::uint64_t seed, const std::string &model, int epoch) const {
  if (epoch < 0) return SeedDir(seed) + "/models/" + model + ".ekdm";
  return SeedDir(seed) + "/models/" + model + ".epoch" + std::to_string(epoch) + ".ekdm";
}
std::string Experiment::LmPath(std::uint64_t seed) const {
  return SeedDir(seed) + "/lm/teachers.arpa";
}
std::string Experiment::PosteriorPath(std::uint64_t seed, const std::string &teacher) const {
  return SeedDir(seed) + "/decode/" + teacher + ".ekdp";
}
std::string Experiment::SelectionPath(std::uint64_t seed, Strategy strategy) const {
  return SeedDir(seed) + "/select/" + ToString(strategy) + ".ekds";
}
std::string Experiment::CellPath(std::uint64_t seed, const std::string &model,
                                 const std::string &test_set, bool lm) const {
  return SeedDir(seed) + "/eval/" + model + "__" + test_set + "__lm-" + (lm ? "on" : "off") +
         ".tsv";
}
std::string Experiment::SvccaPath(std::uint64_t seed) const {
  return SeedDir(seed) + "/svcca/trajectory.tsv";
}

void Experiment::Log(const std::string &msg) const {
  if (log_) *log_ << msg << std::endl;
}

template <typename F>
void Experiment::Stage(const std::string &name, std::uint64_t seed, F &&body) {
  try {
    body();
  } catch (const StageError &) {
    throw;
  } catch (const std::exception &e) {
    throw StageError(name + " (seed " + std::to_string(seed) + ")", e.what());
  }
}

TrainConfig Experiment::SeededTrain(const TrainConfig &base, std::uint64_t seed,
                                    const std::string &tag) const {
  TrainConfig c = base;
  c.seed = DeriveSeed(seed ^ base.seed, "train/" + tag);
  return c;
}

ModelConfig Experiment::SeededModel(std::uint64_t seed, const std::string &tag) const {
  ModelConfig c = config_.model;
  c.seed = DeriveSeed(seed ^ config_.model.seed, "init/" + tag);
  return c;
}

std::vector<std::string> Experiment::ModelNames() const {
  std::vector<std::string> names;
  for (const auto &t : config_.teachers) names.push_back(TeacherModelName(t.spec.name));
  for (Strategy s : config_.strategies) names.push_back(StudentModelName(s));
  names.push_back(ReferenceModelName());
  return names;
}

void Experiment::WriteConfig() const {
  WriteFileAtomic(run_dir_ + "/config.json", config_.source.dump(2) + "\n");
}

void Experiment::GenData(std::uint64_t seed, bool force) {
  const Vocabulary &vocab = config_.vocabulary;
  for (const auto &t : config_.teachers) {
    const std::string &name = t.spec.name;
    if (!force && Exists(TrainCorpusPath(seed, name)) && Exists(TestCorpusPath(seed, name)) &&
        Exists(ProbeCorpusPath(seed, name)))
      continue;
    const int total = t.train_utterances + t.test_utterances;
    const Corpus all = GenerateCorpus(t.spec, vocab, total, DeriveSeed(seed, "data/" + name));
    auto parts = SplitCorpus(all, {t.train_utterances / double(total), t.test_utterances / double(total)},
                             DeriveSeed(seed, "split/" + name));
    // The quality-gate probe is noise-free in-domain speech.
    DomainSpec clean = t.spec;
    clean.emission_noise_std = 0.0;
    parts.push_back(GenerateCorpus(clean, vocab, config_.probe_utterances,
                                   DeriveSeed(seed, "probe/" + name)));
    parts[0].name = name + ".train";
    parts[1].name = name + ".test";
    parts[2].name = name + ".probe";
    SaveCorpus(parts[0], TrainCorpusPath(seed, name));
    SaveCorpus(parts[1], TestCorpusPath(seed, name));
    SaveCorpus(parts[2], ProbeCorpusPath(seed, name));
    Log("gen-data: " + name + " " + std::to_string(parts[0].size()) + "/" +
        std::to_string(parts[1].size()) + "/" + std::to_string(parts[2].size()));
  }
  const auto &s = config_.student;
  const std::string &name = s.spec.name;
  if (!force && Exists(TrainCorpusPath(seed, name)) && Exists(TestCorpusPath(seed, name)) &&
      Exists(StudentLabelledPath(seed)))
    return;
  const int total = s.train_utterances + s.test_utterances;
  const Corpus all = GenerateCorpus(s.spec, vocab, total, DeriveSeed(seed, "data/" + name));
  auto parts = SplitCorpus(all, {s.train_utterances / double(total), s.test_utterances / double(total)},
                           DeriveSeed(seed, "split/" + name));
  parts[0].name = name + ".train";
  parts[1].name = name + ".test";
  SaveCorpus(parts[0], StudentLabelledPath(seed));
  SaveCorpus(parts[0].WithoutTranscripts(), TrainCorpusPath(seed, name));
  SaveCorpus(parts[1], TestCorpusPath(seed, name));
  Log("gen-data: " + name + " " + std::to_string(parts[0].size()) + "/" +
      std::to_string(parts[1].size()) + " (train split unlabeled)");
}

void Experiment::TrainTeacher(std::uint64_t seed, const std::string &teacher, bool force) {
  const std::string name = TeacherModelName(teacher);
  const std::string path = ModelPath(seed, name);
  AcousticModel model;
  if (force || !Exists(path)) {
    const Corpus corpus = LoadCorpus(Require(TrainCorpusPath(seed, teacher)), config_.vocabulary);
    TrainOptions opts;
    opts.log = nullptr;
    TrainResult r = ekd::TrainTeacher(corpus, SeededModel(seed, name),
                                      SeededTrain(config_.teacher_train, seed, name), opts);
    SaveRun(r, path, [&](int e) { return ModelPath(seed, name, e); });
    model = std::move(r.model);
    Log("train-teacher: " + teacher + " " + LossSummary(r, corpus.size()));
  } else {
    model = AcousticModel::Load(path);
  }
  if (config_.teacher_gate_wer > 0) {
    const Corpus probe = LoadCorpus(Require(ProbeCorpusPath(seed, teacher)), config_.vocabulary);
    const WerBreakdown w = CheckTeacherQuality(model, probe, config_.teacher_gate_wer);
    std::ostringstream os;
    os << "train-teacher: " << teacher << " probe WER " << std::fixed << std::setprecision(2)
       << 100.0 * w.wer << "%";
    Log(os.str());
  }
}

void Experiment::TrainTeachers(std::uint64_t seed, bool force) {
  for (const auto &t : config_.teachers) TrainTeacher(seed, t.spec.name, force);
}

void Experiment::TrainLm(std::uint64_t seed, bool force) {
  const std::string path = LmPath(seed);
  if (!force && Exists(path)) return;
  std::vector<WordSeq> sentences;
  for (const auto &t : config_.teachers) {
    const Corpus c = LoadCorpus(Require(TrainCorpusPath(seed, t.spec.name)), config_.vocabulary);
    for (const auto &u : c.utterances)
      if (u.has_transcript()) sentences.push_back(config_.vocabulary.ToWords(*u.transcript()));
  }
  const NgramLm lm = NgramLm::Train(sentences, config_.lm_order);
  WriteFileAtomic(path, lm.ToArpa());
  Log("train-lm: " + std::to_string(sentences.size()) + " sentences, " +
      std::to_string(lm.words().size()) + " words");
}

void Experiment::Decode(std::uint64_t seed, bool force) {
  const std::string student = config_.student.spec.name;
  std::optional<Corpus> corpus;
  for (const auto &t : config_.teachers) {
    const std::string path = PosteriorPath(seed, t.spec.name);
    if (!force && Exists(path)) continue;
    if (!corpus)
      corpus = LoadCorpus(Require(TrainCorpusPath(seed, student)), config_.vocabulary);
    const AcousticModel model =
        AcousticModel::Load(Require(ModelPath(seed, TeacherModelName(t.spec.name))));
    PosteriorDump dump;
    dump.teacher = t.spec.name;
    dump.vocabulary_hash = config_.vocabulary.Hash();
    for (const auto &u : corpus->utterances) dump.sequences.push_back(model.Posteriors(u));
    SavePosteriorDump(dump, path);
    Log("decode: " + t.spec.name + " on " + student + ".train");
  }
}

SelectionFile Experiment::Select(std::uint64_t seed, Strategy strategy, bool force) {
  const std::string path = SelectionPath(seed, strategy);
  if (!force && Exists(path)) return LoadSelectionFile(path);
  std::vector<PosteriorDump> dumps;
  SelectionFile file;
  file.vocabulary_hash = config_.vocabulary.Hash();
  for (const auto &t : config_.teachers) {
    dumps.push_back(LoadPosteriorDump(Require(PosteriorPath(seed, t.spec.name))));
    if (dumps.back().vocabulary_hash != file.vocabulary_hash)
      throw FormatError("vocabulary-hash mismatch in " + PosteriorPath(seed, t.spec.name));
    file.teacher_names.push_back(t.spec.name);
  }
  std::vector<TeacherBundle> bundles;
  const std::size_t n = dumps.front().sequences.size();
  for (std::size_t i = 0; i < n; ++i) {
    TeacherBundle b;
    b.utterance_id = dumps.front().sequences[i].utterance_id;
    for (const auto &d : dumps) {
      if (d.sequences.size() != n) throw Error("teacher dumps cover different utterances");
      b.per_teacher_posteriors.push_back(d.sequences[i]);
    }
    bundles.push_back(std::move(b));
  }
  file.result = SelectCorpus(strategy, bundles, config_.vocabulary.blank_index());
  SaveSelectionFile(file, path);
  Log("select: " + ToString(strategy) + " " + std::to_string(file.result.outcomes.size()) +
      " selected, " + std::to_string(file.result.skipped.size()) + " skipped");
  return file;
}

void Experiment::TrainStudent(std::uint64_t seed, Strategy strategy, bool force) {
  const std::string name = StudentModelName(strategy);
  const std::string path = ModelPath(seed, name);
  if (!force && Exists(path)) return;
  const SelectionFile sel = LoadSelectionFile(Require(SelectionPath(seed, strategy)));
  const Corpus corpus =
      LoadCorpus(Require(TrainCorpusPath(seed, config_.student.spec.name)), config_.vocabulary);
  TrainResult r = ekd::TrainStudent(sel.result.outcomes, corpus, SeededModel(seed, "student"),
                                    SeededTrain(config_.student_train, seed, "student"),
                                    config_.kd, {});
  SaveRun(r, path, [&](int e) { return ModelPath(seed, name, e); });
  Log("train-student: " + ToString(strategy) + " " +
      LossSummary(r, corpus.size() - r.skipped_utterances) + ", skipped " +
      std::to_string(r.skipped_utterances));
}

void Experiment::TrainReference(std::uint64_t seed, bool force) {
  const std::string name = ReferenceModelName();
  const std::string path = ModelPath(seed, name);
  if (!force && Exists(path)) return;
  const Corpus corpus = LoadCorpus(Require(StudentLabelledPath(seed)), config_.vocabulary);
  TrainResult r = ekd::TrainTeacher(corpus, SeededModel(seed, "student"),
                                    SeededTrain(config_.student_train, seed, "student"), {});
  SaveRun(r, path, [&](int e) { return ModelPath(seed, name, e); });
  Log("train-student: original labels, " + LossSummary(r, corpus.size()));
}

void Experiment::Evaluate(std::uint64_t seed, LmMode mode, bool force) {
  std::optional<NgramLm> lm;
  std::map<std::string, Corpus> tests;
  auto test = [&](const std::string &domain) -> const Corpus & {
    auto it = tests.find(domain);
    if (it == tests.end())
      it = tests.emplace(domain, LoadCorpus(Require(TestCorpusPath(seed, domain)),
                                            config_.vocabulary))
               .first;
    return it->second;
  };
  std::vector<std::pair<std::string, std::vector<std::string>>> plan;
  const std::string student = config_.student.spec.name;
  for (const auto &t : config_.teachers) {
    std::vector<std::string> sets;
    for (const auto &o : config_.teachers) sets.push_back(o.spec.name);
    sets.push_back(student);
    plan.emplace_back(TeacherModelName(t.spec.name), sets);
  }
  for (Strategy s : config_.strategies) plan.push_back({StudentModelName(s), {student}});
  plan.push_back({ReferenceModelName(), {student}});

  for (const auto &[model_name, sets] : plan) {
    std::optional<AcousticModel> model;
    for (const auto &domain : sets) {
      for (bool use_lm : LmFlags(mode)) {
        const std::string cell_path = CellPath(seed, model_name, TestSetName(domain), use_lm);
        if (!force && Exists(cell_path)) continue;
        if (!model) model = AcousticModel::Load(Require(ModelPath(seed, model_name)));
        if (use_lm && !lm) lm = NgramLm::FromArpa(ReadText(Require(LmPath(seed))));
        ResultCell cell;
        cell.seed = seed;
        cell.test_set = TestSetName(domain);
        cell.model = model_name;
        cell.lm = use_lm;
        cell.wer = EvaluateWer(*model, test(domain), use_lm ? &*lm : nullptr, &config_.beam);
        ResultTable one;
        one.Add(cell);
        WriteFileAtomic(cell_path, one.ToTsv());
        std::ostringstream os;
        os << "evaluate: " << model_name << " on " << cell.test_set << " lm "
           << (use_lm ? "on " : "off") << " WER " << std::fixed << std::setprecision(2)
           << 100.0 * cell.wer.wer << "%";
        Log(os.str());
      }
    }
  }
}

SvccaReport Experiment::Svcca(std::uint64_t seed, bool force) {
  const std::string path = SvccaPath(seed);
  if (!force && Exists(path)) return ParseSvccaTsv(ReadText(path));
  const Strategy pseudo = std::find(config_.strategies.begin(), config_.strategies.end(),
                                    Strategy::kElitist) != config_.strategies.end()
                              ? Strategy::kElitist
                              : config_.strategies.front();
  const Corpus corpus = LoadCorpus(Require(TestCorpusPath(seed, config_.student.spec.name)),
                                   config_.vocabulary);
  const FrameSample sample =
      SampleFrames(corpus, config_.svcca.frames, DeriveSeed(seed, "svcca/frames"));
  std::vector<int> epochs = SnapshotEpochs(config_.student_train);
  const bool final_only = epochs.empty();
  if (final_only) epochs.push_back(config_.student_train.epochs);

  std::vector<std::string> layers;
  for (int l = 0; l < static_cast<int>(config_.model.hidden_sizes.size()); ++l)
    layers.push_back("hidden" + std::to_string(l));

  auto collect = [&](const std::string &model_name) {
    RunActivations run;
    run.run_name = model_name;
    for (int e : epochs) {
      const std::string mpath = final_only ? ModelPath(seed, model_name) : ModelPath(seed, model_name, e);
      const AcousticModel m = AcousticModel::Load(Require(mpath));
      auto acts = DumpActivations(m, corpus, sample, model_name, e);
      for (const auto &a : acts)
        SaveActivations(a, sample,
                        SeedDir(seed) + "/svcca/" + model_name + ".epoch" + std::to_string(e) +
                            "." + a.layer_name + ".ekda");
      run.steps[e] = std::move(acts);
    }
    return run;
  };
  const RunActivations a = collect(ReferenceModelName());
  const RunActivations b = collect(StudentModelName(pseudo));
  SvccaReport rep = CorrelationTrajectory(a, b, layers, config_.svcca.variance_fraction);
  WriteFileAtomic(path, rep.ToTsv());
  std::ostringstream os;
  os << "svcca: " << ReferenceModelName() << " vs " << StudentModelName(pseudo);
  for (const auto &l : layers) os << "  " << l << " diff " << std::setprecision(4) << rep.MeanDifference(l);
  Log(os.str());
  return rep;
}

void Experiment::RunSeed(std::uint64_t seed) {
  Log("== seed " + std::to_string(seed) + " ==");
  Stage("gen-data", seed, [&] { GenData(seed); });
  Stage("train-teacher", seed, [&] { TrainTeachers(seed); });
  Stage("train-lm", seed, [&] { TrainLm(seed); });
  Stage("decode", seed, [&] { Decode(seed); });
  Stage("select", seed, [&] {
    for (Strategy s : config_.strategies) Select(seed, s);
  });
  Stage("train-student", seed, [&] {
    for (Strategy s : config_.strategies) TrainStudent(seed, s);
    TrainReference(seed);
  });
  Stage("evaluate", seed, [&] { Evaluate(seed, LmMode::kBoth); });
  if (config_.svcca.enabled) Stage("svcca", seed, [&] { Svcca(seed); });
}

ResultTable Experiment::Collect() const {
  ResultTable table;
  const std::string student = config_.student.spec.name;
  for (std::uint64_t seed : config_.seeds) {
    for (const std::string &model : ModelNames()) {
      std::vector<std::string> sets{student};
      if (model.rfind("teacher-", 0) == 0) {
        sets.clear();
        for (const auto &o : config_.teachers) sets.push_back(o.spec.name);
        sets.push_back(student);
      }
      for (const auto &domain : sets) {
        for (bool lm : {false, true}) {
          const std::string path = CellPath(seed, model, TestSetName(domain), lm);
          if (Exists(path)) {
            const ResultTable one = ResultTable::FromTsv(ReadText(path));
            for (const auto &c : one.cells()) table.Add(c);
          } else {
            ResultCell c;
            c.seed = seed;
            c.test_set = TestSetName(domain);
            c.model = model;
            c.lm = lm;
            c.failed = true;
            table.Add(c);
          }
        }
      }
    }
  }
  return table;
}

std::string Experiment::WinCountReport() const {
  std::ostringstream os;
  os << "seed\tteacher\twins\n";
  for (std::uint64_t seed : config_.seeds) {
    const std::string path = SelectionPath(seed, Strategy::kElitist);
    if (!Exists(path)) continue;
    const SelectionFile f = LoadSelectionFile(path);
    for (std::size_t k = 0; k < f.result.win_counts.size(); ++k)
      os << seed << '\t' << f.teacher_names[k] << '\t' << f.result.win_counts[k] << '\n';
    os << seed << "\t(skipped)\t" << f.result.skipped.size() << '\n';
  }
  return os.str();
}

std::string Experiment::SvccaSummary() const {
  std::ostringstream os;
  os << "seed\tlayer\tmean_difference\n";
  os << std::setprecision(6);
  for (std::uint64_t seed : config_.seeds) {
    const std::string path = SvccaPath(seed);
    if (!Exists(path)) continue;
    const SvccaReport rep = ParseSvccaTsv(ReadText(path));
    for (int l = 0; l < static_cast<int>(config_.model.hidden_sizes.size()); ++l) {
      const std::string layer = "hidden" + std::to_string(l);
      os << seed << '\t' << layer << '\t' << rep.MeanDifference(layer) << '\n';
    }
  }
  return os.str();
}

ResultTable Experiment::WriteReport() const {
  ResultTable table = Collect();
  WriteFileAtomic(run_dir_ + "/results.tsv", table.ToTsv());
  WriteFileAtomic(run_dir_ + "/results.txt", table.ToText());
  WriteFileAtomic(run_dir_ + "/win_counts.tsv", WinCountReport());
  if (config_.svcca.enabled) WriteFileAtomic(run_dir_ + "/svcca_summary.tsv", SvccaSummary());
  return table;
}

ResultTable RunPipeline(const ExperimentConfig &config, const std::string &run_dir,
                        std::ostream *log) {
  config.Validate();
  Experiment exp(config, ResolveRunDir(config, run_dir), log);
  exp.WriteConfig();
  for (std::uint64_t seed : config.seeds) exp.RunSeed(seed);
  return exp.WriteReport();
}

}  // namespace ekd
