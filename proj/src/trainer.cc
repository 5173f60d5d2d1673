// ekd/src/trainer.cc
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

#include "ekd/trainer.h"

#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "ekd/rng.h"

namespace ekd {

std::string ToString(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "sgd"; }

Optimizer ParseOptimizer(const std::string &s) {
  if (s == "adam") return Optimizer::kAdam;
  if (s == "sgd") return Optimizer::kSgd;
  throw ConfigError("unknown optimizer '" + s + "'");
}

void TrainConfig::Validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
}

namespace {

// Loss for one utterance given its logits; nullopt means "skip".
using Objective = std::function<std::optional<CtcLossResult>(const Matrix &logits)>;

struct Example {
  const Matrix *features;
  std::string id;
  Objective objective;
};

class Adam {
 public:
  explicit Adam(const AcousticModel &m) : m_(m.ZeroGradient()), v_(m.ZeroGradient()) {}

  void Step(AcousticModel &model, const ModelGradient &g, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
    auto &layers = model.mutable_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto update = [&](auto &param, auto &m, auto &v, const auto &grad) {
        m = b1 * m + (1 - b1) * grad;
        v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      };
      update(layers[l].weights, m_.layers[l].weights, v_.layers[l].weights, g.layers[l].weights);
      update(layers[l].bias, m_.layers[l].bias, v_.layers[l].bias, g.layers[l].bias);
    }
  }

 private:
  ModelGradient m_, v_;
  int t_ = 0;
};

TrainResult RunTraining(AcousticModel model, const std::vector<Example> &examples,
                        const TrainConfig &cfg, const TrainOptions &opts, int skipped) {
  cfg.Validate();
  TrainResult result;
  result.skipped_utterances = skipped;
  Rng rng(cfg.seed);
  Adam adam(model);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.Shuffle(order);
    double epoch_loss = 0.0;
    int epoch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      ModelGradient grad = model.ZeroGradient();
      int used = 0;
      // Summation in batch order keeps results independent of scheduling.
      for (std::size_t i = start; i < end; ++i) {
        const Example &ex = examples[order[i]];
        ForwardResult fwd = model.Forward(*ex.features, ex.id);
        std::optional<CtcLossResult> loss = ex.objective(fwd.logits.values);
        if (!loss) continue;
        if (!std::isfinite(loss->loss) || !loss->grad_logits.allFinite())
          throw TrainingError("training diverged: non-finite loss on " + ex.id + " at epoch " +
                              std::to_string(epoch));
        grad.Add(model.Backward(fwd, loss->grad_logits));
        epoch_loss += loss->loss;
        ++epoch_count;
        ++used;
      }
      if (used == 0) continue;
      grad.Scale(1.0 / used);
      const double norm = std::sqrt(grad.SquaredNorm());
      if (!std::isfinite(norm)) throw TrainingError("training diverged: non-finite gradient");
      if (cfg.gradient_clip > 0 && norm > cfg.gradient_clip) grad.Scale(cfg.gradient_clip / norm);
      if (cfg.optimizer == Optimizer::kAdam) {
        adam.Step(model, grad, cfg.learning_rate);
      } else {
        auto &layers = model.mutable_layers();
        for (std::size_t l = 0; l < layers.size(); ++l) {
          layers[l].weights -= cfg.learning_rate * grad.layers[l].weights;
          layers[l].bias -= cfg.learning_rate * grad.layers[l].bias;
        }
      }
    }
    const double mean_loss = epoch_count ? epoch_loss / epoch_count : 0.0;
    result.epoch_losses.push_back(mean_loss);
    if (opts.log) *opts.log << "epoch " << epoch << " loss " << mean_loss << "\n";
    model.meta().epochs = epoch;
    model.meta().final_loss = mean_loss;
    if (cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs))
      result.snapshots.emplace_back(epoch, model);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace

TrainResult TrainTeacher(const Corpus &corpus, const ModelConfig &model_cfg,
                         const TrainConfig &train_cfg, const TrainOptions &opts) {
  AcousticModel model(model_cfg, corpus.feature_dim, corpus.vocabulary);
  model.meta().corpus_name = corpus.name;
  const int blank = corpus.vocabulary.blank_index();
  std::vector<Example> examples;
  int skipped = 0;
  for (const auto &u : corpus.utterances) {
    const auto &t = u.transcript();
    if (!t) throw ConfigError("teacher corpus '" + corpus.name + "' lacks transcripts");
    if (t->empty() || u.num_frames() < MinFramesForTarget(*t)) {
      if (opts.log) *opts.log << "warning: skipping " << u.id << " (infeasible transcript)\n";
      ++skipped;
      continue;
    }
    const LabelSeq *labels = &*t;
    examples.push_back({&u.features, u.id, [labels, blank](const Matrix &logits) {
                          return std::optional(CtcLoss(LogSoftmax(logits), *labels, blank));
                        }});
  }
  return RunTraining(std::move(model), examples, train_cfg, opts, skipped);
}

TrainResult TrainStudent(const std::vector<SelectionOutcome> &selections,
                         const Corpus &target_corpus, const ModelConfig &model_cfg,
                         const TrainConfig &train_cfg, const KdConfig &kd_cfg,
                         const TrainOptions &opts) {
  kd_cfg.Validate();
  if (kd_cfg.alpha > 0 && !opts.allow_supervised_student)
    throw ConfigError("student training with alpha > 0 needs target labels; "
                      "set allow_supervised_student to override");
  AcousticModel model(model_cfg, target_corpus.feature_dim, target_corpus.vocabulary);
  model.meta().corpus_name = target_corpus.name;
  const int blank = target_corpus.vocabulary.blank_index();

  std::map<std::string, const SelectionOutcome *> by_id;
  for (const auto &s : selections) by_id[s.utterance_id] = &s;

  std::vector<Example> examples;
  int skipped = 0;
  auto warn = [&](const std::string &id, const std::string &why) {
    if (opts.log) *opts.log << "warning: skipping " << id << " (" << why << ")\n";
    ++skipped;
  };
  for (const auto &u : target_corpus.utterances) {
    auto it = by_id.find(u.id);
    if (it == by_id.end()) {
      warn(u.id, "no selection");
      continue;
    }
    const SelectionOutcome &sel = *it->second;
    if (sel.selected_posteriors.num_frames() != u.num_frames()) {
      warn(u.id, "selection frame count differs");
      continue;
    }
    SoftTarget target = sel.ToSoftTarget();
    if (kd_cfg.soft_label_mode == SoftLabelMode::kHardPseudoLabel)
      target.teacher_sequence_confidence = 1.0;
    if (kd_cfg.soft_label_mode != SoftLabelMode::kFramewiseKl &&
        (target.pseudo_transcript.empty() ||
         u.num_frames() < MinFramesForTarget(target.pseudo_transcript))) {
      warn(u.id, "infeasible pseudo transcript");
      continue;
    }
    const LabelSeq *sup = nullptr;
    if (kd_cfg.alpha > 0) {
      const auto &t = u.transcript();
      if (!t || t->empty() || u.num_frames() < MinFramesForTarget(*t)) {
        warn(u.id, "no usable supervised transcript");
        continue;
      }
      sup = &*t;
    }
    const KdConfig kd = kd_cfg;
    examples.push_back(
        {&u.features, u.id,
         [target = std::move(target), sup, kd, blank](const Matrix &logits)
             -> std::optional<CtcLossResult> {
           CtcLossResult distill =
               kd.soft_label_mode == SoftLabelMode::kFramewiseKl
                   ? FramewiseKlLoss(logits, *target.teacher_posteriors, kd.temperature)
                   : SoftCtcKdLoss(LogSoftmax(logits), target, blank);
           if (!sup) return distill;
           CtcLossResult supervised = CtcLoss(LogSoftmax(logits), *sup, blank);
           distill.loss = TotalLoss(supervised.loss, distill.loss, kd);
           distill.grad_logits =
               kd.alpha * supervised.grad_logits + (1.0 - kd.alpha) * distill.grad_logits;
           return distill;
         }});
  }
  return RunTraining(std::move(model), examples, train_cfg, opts, skipped);
}

WerBreakdown EvaluateWer(const AcousticModel &model, const Corpus &corpus, const NgramLm *lm,
                         const BeamConfig *beam) {
  WerBreakdown total;
  const Vocabulary &vocab = corpus.vocabulary;
  for (const auto &u : corpus.utterances) {
    const auto &t = u.transcript();
    if (!t) throw ConfigError("evaluation corpus '" + corpus.name + "' lacks transcripts");
    const ForwardResult fwd = model.Forward(u);
    WordSeq hyp;
    if (!lm && (!beam || beam->beam_width == 1)) {
      hyp = vocab.ToWords(GreedyDecode(fwd.logits.values, vocab.blank_index()));
    } else {
      const BeamConfig cfg = beam ? *beam : BeamConfig{};
      hyp = BeamDecode(Softmax(fwd.logits), lm, cfg, vocab);
    }
    total += Wer(vocab.ToWords(*t), hyp);
  }
  return total;
}

WerBreakdown CheckTeacherQuality(const AcousticModel &model, const Corpus &probe, double max_wer) {
  const WerBreakdown w = EvaluateWer(model, probe);
  if (w.wer > max_wer)
    throw TrainingError("teacher quality gate failed on '" + probe.name + "': WER " +
                        std::to_string(w.wer) + " > " + std::to_string(max_wer));
  return w;
}

FrameSample SampleFrames(const Corpus &corpus, std::int64_t n_frames, std::uint64_t seed) {
  std::vector<std::pair<int, int>> all;
  for (std::size_t u = 0; u < corpus.utterances.size(); ++u)
    for (int t = 0; t < corpus.utterances[u].num_frames(); ++t)
      all.emplace_back(static_cast<int>(u), t);
  FrameSample s;
  if (n_frames >= static_cast<std::int64_t>(all.size())) {
    s.frames = std::move(all);
    return s;
  }
  Rng rng(seed);
  // Partial Fisher-Yates.
  for (std::int64_t i = 0; i < n_frames; ++i) {
    const auto j = rng.UniformInt(i, static_cast<std::int64_t>(all.size()) - 1);
    std::swap(all[i], all[j]);
  }
  s.frames.assign(all.begin(), all.begin() + n_frames);
  std::sort(s.frames.begin(), s.frames.end());
  return s;
}

std::vector<ActivationMatrix> DumpActivations(const AcousticModel &model, const Corpus &corpus,
                                              const FrameSample &sample,
                                              const std::string &model_id, int step) {
  std::vector<ActivationMatrix> out;
  for (int l = 0; l < model.num_hidden_layers(); ++l)
    out.push_back({"hidden" + std::to_string(l),
                   Matrix(static_cast<Eigen::Index>(sample.frames.size()),
                          model.config().hidden_sizes[l]),
                   model_id, step});
  std::size_t row = 0;
  while (row < sample.frames.size()) {
    const int u = sample.frames[row].first;
    const ForwardResult fwd = model.Forward(corpus.utterances.at(u));
    for (; row < sample.frames.size() && sample.frames[row].first == u; ++row)
      for (int l = 0; l < model.num_hidden_layers(); ++l)
        out[l].data.row(static_cast<Eigen::Index>(row)) =
            fwd.activations[l].row(sample.frames[row].second);
  }
  return out;
}

}  // namespace ekd
