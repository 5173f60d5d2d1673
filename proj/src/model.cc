// ekd/src/model.cc
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

#include "ekd/model.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ekd/binary_io.h"
#include "ekd/rng.h"

namespace ekd {

namespace {

constexpr char kModelMagic[] = "EKD-MODEL";
constexpr int kModelVersion = 1;

}  // namespace

std::string ToString(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Activation ParseActivation(const std::string &s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + s + "'");
}

void ModelConfig::Validate() const {
  if (context_window < 0) throw ConfigError("context_window must be >= 0");
  if (hidden_sizes.empty()) throw ConfigError("hidden_sizes must be non-empty");
  for (int h : hidden_sizes)
    if (h < 1) throw ConfigError("hidden sizes must be positive");
}

double ModelGradient::SquaredNorm() const {
  double s = 0.0;
  for (const auto &l : layers) s += l.weights.squaredNorm() + l.bias.squaredNorm();
  return s;
}

void ModelGradient::Scale(double s) {
  for (auto &l : layers) {
    l.weights *= s;
    l.bias *= s;
  }
}

void ModelGradient::Add(const ModelGradient &o) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weights += o.layers[i].weights;
    layers[i].bias += o.layers[i].bias;
  }
}

AcousticModel::AcousticModel(const ModelConfig &config, int input_dim, const Vocabulary &vocab)
    : config_(config),
      input_dim_(input_dim),
      output_dim_(vocab.size()),
      vocabulary_hash_(vocab.Hash()) {
  config_.Validate();
  if (input_dim < 1) throw ConfigError("input_dim must be positive");
  Rng rng(config.seed);
  int fan_in = (2 * config.context_window + 1) * input_dim;
  std::vector<int> widths = config.hidden_sizes;
  widths.push_back(output_dim_);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const bool output = l + 1 == widths.size();
    // He init for ReLU layers, Glorot-style for tanh and the output layer.
    const double gain = !output && config.activation == Activation::kRelu ? 2.0 : 1.0;
    const double stddev = std::sqrt(gain / fan_in);
    DenseLayer layer{Matrix(fan_in, widths[l]), RowVector::Zero(widths[l])};
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
      layer.weights.data()[i] = stddev * rng.Normal();
    layers_.push_back(std::move(layer));
    fan_in = widths[l];
  }
}

std::size_t AcousticModel::NumWeights() const {
  std::size_t n = 0;
  for (const auto &l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<double> AcousticModel::FlatWeights() const {
  std::vector<double> w;
  w.reserve(NumWeights());
  for (const auto &l : layers_) {
    w.insert(w.end(), l.weights.data(), l.weights.data() + l.weights.size());
    w.insert(w.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return w;
}

void AcousticModel::SetFlatWeights(const std::vector<double> &w) {
  if (w.size() != NumWeights()) throw Error("weight count does not match model layout");
  std::size_t pos = 0;
  for (auto &l : layers_) {
    std::copy(w.begin() + pos, w.begin() + pos + l.weights.size(), l.weights.data());
    pos += l.weights.size();
    std::copy(w.begin() + pos, w.begin() + pos + l.bias.size(), l.bias.data());
    pos += l.bias.size();
  }
}

std::string AcousticModel::LayoutDescriptor() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    os << (i ? ";" : "") << layers_[i].weights.rows() << "x" << layers_[i].weights.cols();
  return os.str();
}

Matrix AcousticModel::StackContext(const Matrix &features) const {
  const int T = static_cast<int>(features.rows());
  const int c = config_.context_window;
  Matrix out(T, (2 * c + 1) * input_dim_);
  for (int t = 0; t < T; ++t)
    for (int o = -c; o <= c; ++o) {
      const int src = std::clamp(t + o, 0, T - 1);
      out.block(t, (o + c) * input_dim_, 1, input_dim_) = features.row(src);
    }
  return out;
}

ForwardResult AcousticModel::Forward(const Matrix &features, const std::string &utterance_id) const {
  if (features.cols() != input_dim_)
    throw Error("feature dimension " + std::to_string(features.cols()) +
                " does not match model input " + std::to_string(input_dim_));
  if (features.rows() < 1) throw Error("empty utterance");
  ForwardResult r;
  r.input = StackContext(features);
  Matrix h = r.input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = h * layers_[l].weights;
    z.rowwise() += layers_[l].bias;
    if (l + 1 == layers_.size()) {
      r.logits = {std::move(z), utterance_id};
      break;
    }
    if (config_.activation == Activation::kRelu)
      z = z.cwiseMax(0.0);
    else
      z = z.array().tanh().matrix();
    r.activations.push_back(z);
    h = std::move(z);
  }
  return r;
}

PosteriorSequence AcousticModel::Posteriors(const Utterance &u) const {
  return Softmax(Forward(u).logits);
}

ModelGradient AcousticModel::ZeroGradient() const {
  ModelGradient g;
  for (const auto &l : layers_)
    g.layers.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()),
                        RowVector::Zero(l.bias.size())});
  return g;
}

ModelGradient AcousticModel::Backward(const ForwardResult &fwd, const Matrix &grad_logits) const {
  ModelGradient g;
  g.layers.resize(layers_.size());
  Matrix delta = grad_logits;
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const Matrix &in = l == 0 ? fwd.input : fwd.activations[l - 1];
    g.layers[l].weights = in.transpose() * delta;
    g.layers[l].bias = delta.colwise().sum();
    if (l == 0) break;
    Matrix back = delta * layers_[l].weights.transpose();
    const Matrix &act = fwd.activations[l - 1];
    if (config_.activation == Activation::kRelu)
      back = (act.array() > 0.0).select(back, 0.0);
    else
      back = back.cwiseProduct((1.0 - act.array().square()).matrix());
    delta = std::move(back);
  }
  return g;
}

std::vector<std::uint8_t> AcousticModel::Serialize() const {
  ByteWriter blob;
  blob.F64Seq(FlatWeights());
  std::ostringstream h;
  h << kModelMagic << "\n"
    << "version " << kModelVersion << "\n"
    << "context_window " << config_.context_window << "\n"
    << "hidden_sizes";
  for (int s : config_.hidden_sizes) h << ' ' << s;
  h << "\n"
    << "activation " << ToString(config_.activation) << "\n"
    << "seed " << config_.seed << "\n"
    << "input_dim " << input_dim_ << "\n"
    << "output_dim " << output_dim_ << "\n"
    << "layout " << LayoutDescriptor() << "\n"
    << "vocabulary_hash " << vocabulary_hash_ << "\n"
    << "corpus " << (meta_.corpus_name.empty() ? "-" : meta_.corpus_name) << "\n"
    << "epochs " << meta_.epochs << "\n";
  ByteWriter w;
  w.Raw(h.str());
  {
    // Hex float keeps the loss bit-exact through the text header.
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", meta_.final_loss);
    w.Raw(std::string("final_loss ") + buf + "\n");
  }
  w.Raw("weights_sha256 " + Sha256Hex(blob.bytes()) + "\n");
  w.Raw("end_header\n");
  w.Record(blob);
  return w.bytes();
}

namespace {

std::string Field(ByteReader &r, const std::string &key) {
  const std::string line = r.Line();
  if (line.rfind(key + " ", 0) != 0 && line != key)
    throw FormatError("checkpoint: expected '" + key + "'");
  return line.size() > key.size() ? line.substr(key.size() + 1) : "";
}

}  // namespace

AcousticModel AcousticModel::Deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.Line() != kModelMagic) throw FormatError("not a model checkpoint");
  if (Field(r, "version") != std::to_string(kModelVersion)) throw FormatError("version mismatch");
  AcousticModel m;
  try {
    m.config_.context_window = std::stoi(Field(r, "context_window"));
    std::istringstream hs(Field(r, "hidden_sizes"));
    m.config_.hidden_sizes.clear();
    for (int s; hs >> s;) m.config_.hidden_sizes.push_back(s);
    m.config_.activation = ParseActivation(Field(r, "activation"));
    m.config_.seed = std::stoull(Field(r, "seed"));
    m.input_dim_ = std::stoi(Field(r, "input_dim"));
    m.output_dim_ = std::stoi(Field(r, "output_dim"));
    const std::string layout = Field(r, "layout");
    m.vocabulary_hash_ = Field(r, "vocabulary_hash");
    m.meta_.corpus_name = Field(r, "corpus");
    if (m.meta_.corpus_name == "-") m.meta_.corpus_name.clear();
    m.meta_.epochs = std::stoi(Field(r, "epochs"));
    m.meta_.final_loss = std::strtod(Field(r, "final_loss").c_str(), nullptr);
    const std::string sha = Field(r, "weights_sha256");
    if (r.Line() != "end_header") throw FormatError("corrupted record");
    m.config_.Validate();
    // Rebuild shapes, then fill in the stored weights.
    std::vector<int> widths = m.config_.hidden_sizes;
    widths.push_back(m.output_dim_);
    int fan_in = (2 * m.config_.context_window + 1) * m.input_dim_;
    for (int w : widths) {
      m.layers_.push_back({Matrix::Zero(fan_in, w), RowVector::Zero(w)});
      fan_in = w;
    }
    if (m.LayoutDescriptor() != layout) throw FormatError("checkpoint layout mismatch");
    ByteReader blob = r.Record();
    std::vector<double> w = blob.F64Seq();
    ByteWriter check;
    check.F64Seq(w);
    if (Sha256Hex(check.bytes()) != sha) throw FormatError("checkpoint weight hash mismatch");
    m.SetFlatWeights(w);
  } catch (const std::logic_error &) {
    throw FormatError("corrupted record");
  } catch (const ConfigError &e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
  if (!r.done()) throw FormatError("corrupted record");
  return m;
}

void AcousticModel::Save(const std::string &path) const { WriteFileAtomic(path, Serialize()); }

AcousticModel AcousticModel::Load(const std::string &path) {
  return Deserialize(ReadFileBytes(path));
}

bool AcousticModel::operator==(const AcousticModel &o) const {
  return config_ == o.config_ && input_dim_ == o.input_dim_ && output_dim_ == o.output_dim_ &&
         vocabulary_hash_ == o.vocabulary_hash_ && meta_ == o.meta_ &&
         FlatWeights() == o.FlatWeights();
}

}  // namespace ekd
