// ekd/include/ekd/model.h
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

#ifndef EKD_MODEL_H_
#define EKD_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ekd/ctc.h"
#include "ekd/types.h"
#include "ekd/vocab_corpus.h"

namespace ekd {

enum class Activation { kRelu, kTanh };
std::string ToString(Activation a);
Activation ParseActivation(const std::string &s);

struct ModelConfig {
  int context_window = 2;  // frames on each side
  std::vector<int> hidden_sizes{64, 64};
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 1;

  void Validate() const;
  bool operator==(const ModelConfig &) const = default;
};

struct TrainingMeta {
  std::string corpus_name;
  int epochs = 0;
  double final_loss = 0.0;
  bool operator==(const TrainingMeta &) const = default;
};

struct DenseLayer {
  Matrix weights;  // in x out
  RowVector bias;  // out
};

// Gradient buffers shaped like the model's layers.
struct ModelGradient {
  std::vector<DenseLayer> layers;
  double SquaredNorm() const;
  void Scale(double s);
  void Add(const ModelGradient &o);
};

struct ForwardResult {
  LogitSequence logits;
  // Post-nonlinearity output of every hidden layer (T x width).
  std::vector<Matrix> activations;
  Matrix input;  // context-stacked input (T x (2c+1)F)
};

// Frame-synchronous feed-forward acoustic model: each output frame sees the
// input frames within +-context_window (edges replicated), passes through the
// hidden layers and a linear projection to vocabulary logits.
class AcousticModel {
 public:
  AcousticModel() = default;
  // Random initialisation from config.seed.
  AcousticModel(const ModelConfig &config, int input_dim, const Vocabulary &vocab);

  const ModelConfig &config() const { return config_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  const std::string &vocabulary_hash() const { return vocabulary_hash_; }
  TrainingMeta &meta() { return meta_; }
  const TrainingMeta &meta() const { return meta_; }
  const std::vector<DenseLayer> &layers() const { return layers_; }
  std::vector<DenseLayer> &mutable_layers() { return layers_; }
  int num_hidden_layers() const { return static_cast<int>(config_.hidden_sizes.size()); }

  std::size_t NumWeights() const;
  // Layer-major: for each layer, weights row-major then bias.
  std::vector<double> FlatWeights() const;
  void SetFlatWeights(const std::vector<double> &w);
  // "in x out" per layer, e.g. "80x64;64x64;64x12".
  std::string LayoutDescriptor() const;

  Matrix StackContext(const Matrix &features) const;
  // Throws Error on feature-dimension mismatch.
  ForwardResult Forward(const Matrix &features, const std::string &utterance_id = "") const;
  ForwardResult Forward(const Utterance &u) const { return Forward(u.features, u.id); }
  PosteriorSequence Posteriors(const Utterance &u) const;
  ModelGradient Backward(const ForwardResult &fwd, const Matrix &grad_logits) const;
  ModelGradient ZeroGradient() const;

  std::vector<std::uint8_t> Serialize() const;
  static AcousticModel Deserialize(std::span<const std::uint8_t> bytes);
  void Save(const std::string &path) const;
  static AcousticModel Load(const std::string &path);

  bool operator==(const AcousticModel &o) const;

 private:
  ModelConfig config_;
  int input_dim_ = 0;
  int output_dim_ = 0;
  std::string vocabulary_hash_;
  TrainingMeta meta_;
  std::vector<DenseLayer> layers_;
};

}  // namespace ekd

#endif  // EKD_MODEL_H_
