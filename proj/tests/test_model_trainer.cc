// ekd/tests/test_model_trainer.cc
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

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ekd/ctc.h"
#include "ekd/experiment_config.h"
#include "ekd/trainer.h"
#include "test_util.h"

using namespace ekd;

namespace {

const ExperimentConfig &Defaults() {
  static const ExperimentConfig c = BuildConfig(nlohmann::json::object());
  return c;
}

ModelConfig SmallModel(std::uint64_t seed = 1) {
  ModelConfig m;
  m.context_window = 2;
  m.hidden_sizes = {32, 32};
  m.seed = seed;
  return m;
}

TrainConfig SmallTrain(int epochs, std::uint64_t seed = 1) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 8;
  t.learning_rate = 3e-3;
  t.seed = seed;
  return t;
}

DomainSpec CleanSpec() {
  DomainSpec s = Defaults().Teacher("read_large").spec;
  s.emission_noise_std = 0.0;
  return s;
}

// Selections from a single teacher (K = 1), as the pipeline would build them.
std::vector<SelectionOutcome> SelectWith(const AcousticModel &teacher, const Corpus &corpus) {
  std::vector<SelectionOutcome> out;
  for (const auto &u : corpus.utterances) {
    TeacherBundle b{u.id, {teacher.Posteriors(u)}};
    out.push_back(ElitistSelect(b, corpus.vocabulary.blank_index()));
  }
  return out;
}

}  // namespace

TEST_CASE("zero weights give uniform posteriors") {
  const Vocabulary &v = Defaults().vocabulary;
  AcousticModel m(SmallModel(), 12, v);
  m.SetFlatWeights(std::vector<double>(m.NumWeights(), 0.0));
  ekd::Rng rng(1);
  Utterance u("u", testutil::RandomMatrix(rng, 7, 12), std::nullopt, "x");
  const PosteriorSequence p = m.Posteriors(u);
  REQUIRE(p.probs.rows() == 7);
  for (int t = 0; t < 7; ++t)
    for (int g = 0; g < v.size(); ++g) CHECK(p.probs(t, g) == doctest::Approx(1.0 / v.size()));
}

TEST_CASE("forward is deterministic and rejects a wrong feature dimension") {
  const Vocabulary &v = Defaults().vocabulary;
  AcousticModel a(SmallModel(5), 12, v), b(SmallModel(5), 12, v), c(SmallModel(6), 12, v);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  ekd::Rng rng(2);
  const Matrix x = testutil::RandomMatrix(rng, 9, 12);
  CHECK(a.Forward(x).logits.values == b.Forward(x).logits.values);
  CHECK_THROWS_AS(a.Forward(testutil::RandomMatrix(rng, 9, 11)), Error);
}

TEST_CASE("context window limits the receptive field") {
  ModelConfig cfg = SmallModel();
  cfg.context_window = 1;
  AcousticModel m(cfg, 4, Vocabulary::Letters("abc"));
  ekd::Rng rng(3);
  const Matrix x = testutil::RandomMatrix(rng, 10, 4);
  for (int t0 = 0; t0 < 10; ++t0) {
    Matrix y = x;
    y.row(t0) += RowVector::Constant(4, 0.7);
    const Matrix a = m.Forward(x).logits.values, b = m.Forward(y).logits.values;
    for (int t = 0; t < 10; ++t) {
      const bool near = std::abs(t - t0) <= 1;
      const double diff = (a.row(t) - b.row(t)).norm();
      if (near)
        CHECK(diff > 0.0);
      else
        CHECK(diff == 0.0);
    }
  }
}

TEST_CASE("gradient matches finite differences on a tiny model") {
  ModelConfig cfg;
  cfg.context_window = 0;
  cfg.hidden_sizes = {3};
  cfg.activation = Activation::kTanh;
  const Vocabulary v = Vocabulary::Letters("ab");
  AcousticModel m(cfg, 2, v);
  REQUIRE(m.NumWeights() == 25);
  ekd::Rng rng(4);
  const Matrix x = testutil::RandomMatrix(rng, 6, 2);
  const LabelSeq y{2, 1, 3};
  auto loss = [&](const AcousticModel &mm) {
    return CtcLoss(LogSoftmax(mm.Forward(x).logits.values), y, v.blank_index()).loss;
  };
  const ForwardResult fwd = m.Forward(x);
  const auto r = CtcLoss(LogSoftmax(fwd.logits.values), y, v.blank_index());
  const ModelGradient g = m.Backward(fwd, r.grad_logits);
  std::vector<double> flat_grad;
  for (const auto &l : g.layers) {
    for (int i = 0; i < l.weights.rows(); ++i)
      for (int j = 0; j < l.weights.cols(); ++j) flat_grad.push_back(l.weights(i, j));
    for (int j = 0; j < l.bias.size(); ++j) flat_grad.push_back(l.bias(j));
  }
  const std::vector<double> w = m.FlatWeights();
  REQUIRE(flat_grad.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    AcousticModel p = m, q = m;
    auto wp = w, wq = w;
    wp[i] += 1e-5;
    wq[i] -= 1e-5;
    p.SetFlatWeights(wp);
    q.SetFlatWeights(wq);
    const double fd = (loss(p) - loss(q)) / 2e-5;
    CHECK(std::abs(fd - flat_grad[i]) / std::max(1.0, std::abs(fd)) < 1e-4);
  }
}

TEST_CASE("a single utterance can be overfit") {
  const Corpus c = GenerateCorpus(CleanSpec(), Defaults().vocabulary, 1, 11);
  TrainConfig t = SmallTrain(300);
  t.batch_size = 1;
  const TrainResult r = TrainTeacher(c, SmallModel(), t);
  REQUIRE(r.epoch_losses.size() == 300);
  CHECK(r.epoch_losses.back() < 0.1);
  CHECK(r.epoch_losses.back() < r.epoch_losses.front());
}

TEST_CASE("same seeds give identical checkpoints") {
  const Corpus c = GenerateCorpus(CleanSpec(), Defaults().vocabulary, 20, 12);
  const TrainResult a = TrainTeacher(c, SmallModel(), SmallTrain(3));
  const TrainResult b = TrainTeacher(c, SmallModel(), SmallTrain(3));
  CHECK(a.model.Serialize() == b.model.Serialize());
  CHECK(a.epoch_losses == b.epoch_losses);
  const TrainResult other = TrainTeacher(c, SmallModel(), SmallTrain(3, 2));
  CHECK_FALSE(other.model.Serialize() == a.model.Serialize());
}

TEST_CASE("snapshots follow eval_every and include the final epoch") {
  const Corpus c = GenerateCorpus(CleanSpec(), Defaults().vocabulary, 8, 13);
  TrainConfig t = SmallTrain(10);
  t.eval_every = 4;
  const TrainResult r = TrainTeacher(c, SmallModel(), t);
  REQUIRE(r.snapshots.size() == 3);
  CHECK(r.snapshots[0].first == 4);
  CHECK(r.snapshots[1].first == 8);
  CHECK(r.snapshots[2].first == 10);
  CHECK(r.snapshots[2].second == r.model);
  CHECK(r.model.meta().epochs == 10);
}

TEST_CASE("teacher training needs transcripts") {
  const Corpus c = GenerateCorpus(CleanSpec(), Defaults().vocabulary, 4, 14);
  CHECK_THROWS_AS(TrainTeacher(c.WithoutTranscripts(), SmallModel(), SmallTrain(1)), ConfigError);
}

TEST_CASE("in-domain WER beats out-of-domain WER") {
  const ExperimentConfig &d = Defaults();
  const DomainSpec &spec = d.Teacher("read_large").spec;
  const Corpus train = GenerateCorpus(spec, d.vocabulary, 200, 21);
  const Corpus in_test = GenerateCorpus(spec, d.vocabulary, 40, 22);
  const Corpus ood_test = GenerateCorpus(d.student.spec, d.vocabulary, 40, 23);
  const TrainResult r = TrainTeacher(train, SmallModel(), SmallTrain(12));
  const double in_wer = EvaluateWer(r.model, in_test).wer;
  const double ood_wer = EvaluateWer(r.model, ood_test).wer;
  MESSAGE("in-domain " << in_wer << " out-of-domain " << ood_wer);
  CHECK(in_wer < ood_wer);
  CHECK(in_wer < 0.3);
}

TEST_CASE("student distilled from one clean teacher approaches the teacher") {
  const Vocabulary &v = Defaults().vocabulary;
  const DomainSpec spec = CleanSpec();
  const Corpus teacher_train = GenerateCorpus(spec, v, 200, 31);
  const Corpus student_train = GenerateCorpus(spec, v, 200, 32).WithoutTranscripts();
  const Corpus test = GenerateCorpus(spec, v, 40, 33);
  const TrainResult teacher = TrainTeacher(teacher_train, SmallModel(), SmallTrain(12));
  const double teacher_wer = EvaluateWer(teacher.model, test).wer;
  const TrainResult student = TrainStudent(SelectWith(teacher.model, student_train), student_train,
                                           SmallModel(2), SmallTrain(12), KdConfig{});
  const double student_wer = EvaluateWer(student.model, test).wer;
  MESSAGE("teacher " << teacher_wer << " student " << student_wer);
  CHECK(teacher_wer < 0.1);
  CHECK(student_wer <= teacher_wer + 0.05);
}

TEST_CASE("zero teacher confidence leaves the student untouched") {
  const Vocabulary &v = Defaults().vocabulary;
  const Corpus c = GenerateCorpus(CleanSpec(), v, 6, 41).WithoutTranscripts();
  AcousticModel teacher(SmallModel(9), 12, v);
  auto sel = SelectWith(teacher, c);
  for (auto &s : sel) {
    s.sequence_confidence = 0.0;
    // keep every pseudo transcript feasible so nothing is skipped
    s.pseudo_transcript = {2};
  }
  for (Optimizer opt : {Optimizer::kSgd, Optimizer::kAdam}) {
    TrainConfig t = SmallTrain(3);
    t.optimizer = opt;
    const TrainResult r = TrainStudent(sel, c, SmallModel(), t, KdConfig{});
    CHECK(r.skipped_utterances == 0);
    CHECK(r.model.FlatWeights() == AcousticModel(SmallModel(), 12, v).FlatWeights());
  }
}

TEST_CASE("student training never reads target transcripts") {
  const Vocabulary &v = Defaults().vocabulary;
  const Corpus labelled = GenerateCorpus(CleanSpec(), v, 10, 51);
  AcousticModel teacher(SmallModel(9), 12, v);
  const auto sel = SelectWith(teacher, labelled);
  ResetTranscriptReadCount();
  TrainStudent(sel, labelled, SmallModel(), SmallTrain(2), KdConfig{});
  CHECK(TranscriptReadCount() == 0);

  KdConfig sup;
  sup.alpha = 0.5;
  CHECK_THROWS_AS(TrainStudent(sel, labelled, SmallModel(), SmallTrain(1), sup), ConfigError);
  TrainOptions allow;
  allow.allow_supervised_student = true;
  TrainStudent(sel, labelled, SmallModel(), SmallTrain(1), sup, allow);
  CHECK(TranscriptReadCount() > 0);
}

TEST_CASE("student skips utterances without a usable selection") {
  const Vocabulary &v = Defaults().vocabulary;
  const Corpus c = GenerateCorpus(CleanSpec(), v, 5, 61).WithoutTranscripts();
  AcousticModel teacher(SmallModel(9), 12, v);
  auto sel = SelectWith(teacher, c);
  sel.pop_back();
  sel[0].pseudo_transcript.clear();
  std::ostringstream log;
  TrainOptions opts;
  opts.log = &log;
  const TrainResult r = TrainStudent(sel, c, SmallModel(), SmallTrain(1), KdConfig{}, opts);
  CHECK(r.skipped_utterances == 2);
  CHECK(log.str().find("no selection") != std::string::npos);
}

TEST_CASE("activation dumps") {
  const Vocabulary &v = Defaults().vocabulary;
  const Corpus c = GenerateCorpus(CleanSpec(), v, 10, 71);
  AcousticModel a(SmallModel(1), 12, v), b(SmallModel(2), 12, v);
  const FrameSample s = SampleFrames(c, 50, 3);
  CHECK(s.frames.size() == 50);
  CHECK(std::is_sorted(s.frames.begin(), s.frames.end()));
  CHECK(SampleFrames(c, 50, 3).frames == s.frames);
  CHECK(SampleFrames(c, 1 << 30, 3).frames.size() == static_cast<std::size_t>(c.TotalFrames()));

  const auto da = DumpActivations(a, c, s, "a", 4);
  REQUIRE(da.size() == 2);
  CHECK(da[0].layer_name == "hidden0");
  CHECK(da[1].layer_name == "hidden1");
  CHECK(da[0].data.rows() == 50);
  CHECK(da[0].data.cols() == 32);
  CHECK(da[0].checkpoint_step == 4);
  CHECK(DumpActivations(a, c, s, "a", 4)[1].data == da[1].data);
  // rows line up with a direct forward pass on the sampled frame
  const auto [ui, t] = s.frames[17];
  const ForwardResult fwd = a.Forward(c.utterances[ui]);
  CHECK(da[1].data.row(17) == fwd.activations[1].row(t));
  const auto db = DumpActivations(b, c, s, "b", 4);
  CHECK(db[0].data.rows() == da[0].data.rows());
}

TEST_CASE("checkpoint round trip and corruption") {
  const Vocabulary &v = Defaults().vocabulary;
  AcousticModel m(SmallModel(3), 12, v);
  m.meta().corpus_name = "x";
  m.meta().epochs = 4;
  m.meta().final_loss = 1.25;
  const auto bytes = m.Serialize();
  CHECK(AcousticModel::Deserialize(bytes) == m);
  testutil::TempDir dir("model");
  m.Save(dir / "m.ekdm");
  CHECK(AcousticModel::Load(dir / "m.ekdm") == m);

  auto bad = bytes;
  bad[bad.size() - 9] ^= 0x40;
  CHECK_THROWS_AS(AcousticModel::Deserialize(bad), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK_THROWS_AS(AcousticModel::Deserialize(truncated), FormatError);
  std::vector<std::uint8_t> junk{'n', 'o', 'p', 'e', '\n'};
  CHECK_THROWS_AS(AcousticModel::Deserialize(junk), FormatError);
}

TEST_CASE("teacher quality gate") {
  const Vocabulary &v = Defaults().vocabulary;
  const Corpus probe = GenerateCorpus(CleanSpec(), v, 10, 81);
  AcousticModel untrained(SmallModel(), 12, v);
  CHECK_THROWS_AS(CheckTeacherQuality(untrained, probe, 0.15), TrainingError);
  CHECK(CheckTeacherQuality(untrained, probe, 100.0).reference_words > 0);
}

TEST_CASE("config validation") {
  TrainConfig t;
  t.batch_size = 0;
  CHECK_THROWS_AS(t.Validate(), ConfigError);
  t = {};
  t.learning_rate = 0.0;
  CHECK_THROWS_AS(t.Validate(), ConfigError);
  t = {};
  t.epochs = -1;
  CHECK_THROWS_AS(t.Validate(), ConfigError);
  ModelConfig m;
  m.hidden_sizes = {};
  CHECK_THROWS_AS(m.Validate(), ConfigError);
  m.hidden_sizes = {4, 0};
  CHECK_THROWS_AS(m.Validate(), ConfigError);
  m = {};
  m.context_window = -1;
  CHECK_THROWS_AS(m.Validate(), ConfigError);
  CHECK(ParseOptimizer(ToString(Optimizer::kSgd)) == Optimizer::kSgd);
  CHECK_THROWS(ParseOptimizer("rmsprop"));
}
