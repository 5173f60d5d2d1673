// ekd/src/vocab_corpus.cc
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

#include "ekd/vocab_corpus.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "ekd/binary_io.h"
#include "ekd/rng.h"

namespace ekd {

namespace {

constexpr char kCorpusMagic[] = "EKD-CORPUS";
constexpr int kCorpusVersion = 1;

std::atomic<std::uint64_t> g_transcript_reads{0};

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> graphemes, int blank_index,
                       int word_separator_index, std::uint64_t prototype_seed)
    : graphemes_(std::move(graphemes)),
      blank_(blank_index),
      separator_(word_separator_index),
      prototype_seed_(prototype_seed) {
  const int n = size();
  if (n < 3) throw ConfigError("vocabulary needs at least blank, separator and one grapheme");
  std::set<std::string> seen;
  for (const auto &g : graphemes_) {
    if (g.empty() || std::any_of(g.begin(), g.end(), [](char c) { return std::isspace(
                                                           static_cast<unsigned char>(c)); }))
      throw ConfigError("invalid grapheme '" + g + "'");
    if (!seen.insert(g).second) throw ConfigError("duplicate grapheme '" + g + "'");
  }
  if (blank_ < 0 || blank_ >= n || separator_ < 0 || separator_ >= n || blank_ == separator_)
    throw ConfigError("invalid blank/separator indices");
}

Vocabulary Vocabulary::Letters(const std::string &letters, std::uint64_t prototype_seed) {
  std::vector<std::string> g = {"<b>", "|"};
  for (char c : letters) g.emplace_back(1, c);
  return Vocabulary(std::move(g), 0, 1, prototype_seed);
}

int Vocabulary::IndexOf(const std::string &symbol) const {
  auto it = std::find(graphemes_.begin(), graphemes_.end(), symbol);
  return it == graphemes_.end() ? -1 : static_cast<int>(it - graphemes_.begin());
}

std::string Vocabulary::ToLine() const {
  std::ostringstream os;
  os << size() << ' ' << blank_ << ' ' << separator_ << ' ' << prototype_seed_;
  for (const auto &g : graphemes_) os << ' ' << g;
  return os.str();
}

Vocabulary Vocabulary::ParseLine(const std::string &line) {
  std::istringstream is(line);
  int n = 0, blank = 0, sep = 0;
  std::uint64_t seed = 0;
  if (!(is >> n >> blank >> sep >> seed) || n < 0) throw FormatError("corrupted record");
  std::vector<std::string> g(n);
  for (auto &s : g)
    if (!(is >> s)) throw FormatError("corrupted record");
  std::string extra;
  if (is >> extra) throw FormatError("corrupted record");
  try {
    return Vocabulary(std::move(g), blank, sep, seed);
  } catch (const ConfigError &) {
    throw FormatError("corrupted record");
  }
}

std::string Vocabulary::Hash() const { return Sha256Hex(ToLine()); }

WordSeq Vocabulary::ToWords(const LabelSeq &labels) const {
  WordSeq words;
  std::string current;
  for (int l : labels) {
    if (l == blank_) continue;
    if (l == separator_) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current += graphemes_.at(l);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

LabelSeq Vocabulary::FromWords(const WordSeq &words) const {
  LabelSeq out;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (w > 0) out.push_back(separator_);
    for (char c : words[w]) {
      const int idx = IndexOf(std::string(1, c));
      if (idx < 0 || idx == blank_ || idx == separator_)
        throw Error("word '" + words[w] + "' not spellable with vocabulary");
      out.push_back(idx);
    }
  }
  return out;
}

Matrix SymbolPrototypes(const Vocabulary &vocab, int feature_dim) {
  Rng rng(vocab.prototype_seed());
  Matrix protos = Matrix::Zero(vocab.size(), feature_dim);
  for (int s = 0; s < vocab.size(); ++s) {
    if (s == vocab.blank_index()) continue;
    for (int f = 0; f < feature_dim; ++f) protos(s, f) = rng.Normal();
  }
  return protos;
}

AffineTransform AffineTransform::Identity(int feature_dim) {
  return {Matrix::Identity(feature_dim, feature_dim), Vector::Zero(feature_dim)};
}

AffineTransform AffineTransform::Random(int feature_dim, double strength, double bias_scale,
                                        std::uint64_t seed) {
  Rng rng(seed);
  AffineTransform t = Identity(feature_dim);
  const double s = strength / std::sqrt(static_cast<double>(feature_dim));
  for (int i = 0; i < feature_dim; ++i)
    for (int j = 0; j < feature_dim; ++j) t.scale(i, j) += s * rng.Normal();
  for (int i = 0; i < feature_dim; ++i) t.bias(i) = bias_scale * rng.Normal();
  return t;
}

RowVector AffineTransform::Apply(const RowVector &x) const {
  return (scale * x.transpose() + bias).transpose();
}

int DomainSpec::feature_dim() const {
  return transforms.empty() ? 0 : static_cast<int>(transforms.front().scale.rows());
}

std::vector<double> DomainSpec::WordWeights() const {
  std::vector<double> w(lexicon.size());
  for (std::size_t r = 0; r < w.size(); ++r)
    w[r] = std::pow(static_cast<double>(r + 1 + zipf_rank_offset), -zipf_exponent);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto &x : w) x /= total;
  return w;
}

std::uint64_t TranscriptReadCount() { return g_transcript_reads.load(); }
void ResetTranscriptReadCount() { g_transcript_reads.store(0); }

const std::optional<LabelSeq> &Utterance::transcript() const {
  g_transcript_reads.fetch_add(1, std::memory_order_relaxed);
  return transcript_;
}

bool Utterance::operator==(const Utterance &o) const {
  return id == o.id && domain_tag == o.domain_tag && transcript_ == o.transcript_ &&
         features.rows() == o.features.rows() && features.cols() == o.features.cols() &&
         features == o.features;
}

std::int64_t Corpus::TotalFrames() const {
  std::int64_t total = 0;
  for (const auto &u : utterances) total += u.num_frames();
  return total;
}

Corpus Corpus::WithoutTranscripts() const {
  Corpus c = *this;
  for (auto &u : c.utterances) u.set_transcript(std::nullopt);
  return c;
}

namespace {

// Index drawn from a discrete distribution given by normalized weights.
std::size_t Draw(Rng &rng, const std::vector<double> &weights) {
  const double u = rng.Uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

void ValidateDomain(const DomainSpec &spec, const Vocabulary &vocab) {
  if (spec.lexicon.empty()) throw ConfigError("domain '" + spec.name + "': empty lexicon");
  if (spec.transforms.empty())
    throw ConfigError("domain '" + spec.name + "': no feature transform");
  const int f = spec.feature_dim();
  if (f < 1) throw ConfigError("domain '" + spec.name + "': feature dimension must be positive");
  for (const auto &t : spec.transforms) {
    if (t.scale.rows() != f || t.scale.cols() != f || t.bias.size() != f)
      throw ConfigError("domain '" + spec.name + "': transform shape mismatch");
    Eigen::FullPivLU<Matrix> lu(t.scale);
    if (lu.rank() < f) throw ConfigError("domain '" + spec.name + "': degenerate transform");
  }
  if (!spec.condition_weights.empty() && spec.condition_weights.size() != spec.transforms.size())
    throw ConfigError("domain '" + spec.name + "': condition weight count mismatch");
  if (spec.emission_noise_std < 0) throw ConfigError("negative emission noise");
  if (spec.zipf_exponent < 0 || spec.zipf_rank_offset < 0)
    throw ConfigError("domain '" + spec.name + "': invalid word frequency parameters");
  if (spec.frames_per_symbol.lo < 1 || spec.frames_per_symbol.hi < spec.frames_per_symbol.lo)
    throw ConfigError("invalid frames_per_symbol range");
  if (spec.utterance_length.lo < 1 || spec.utterance_length.hi < spec.utterance_length.lo)
    throw ConfigError("invalid utterance_length range");
  for (const auto &w : spec.lexicon) {
    if (w.empty()) throw ConfigError("empty lexicon word");
    vocab.FromWords({w});
  }
}

}  // namespace

Corpus GenerateCorpus(const DomainSpec &spec, const Vocabulary &vocab, int n_utterances,
                      std::uint64_t seed) {
  if (n_utterances < 1) throw ConfigError("n_utterances must be >= 1");
  ValidateDomain(spec, vocab);
  const int f = spec.feature_dim();
  const Matrix protos = SymbolPrototypes(vocab, f);
  // Each condition maps the canonical prototypes once.
  std::vector<Matrix> domain_protos;
  for (const auto &t : spec.transforms) {
    Matrix m(vocab.size(), f);
    for (int s = 0; s < vocab.size(); ++s) m.row(s) = t.Apply(protos.row(s));
    domain_protos.push_back(std::move(m));
  }
  std::vector<double> cond_w = spec.condition_weights;
  if (cond_w.empty()) cond_w.assign(spec.transforms.size(), 1.0);
  const double cond_total = std::accumulate(cond_w.begin(), cond_w.end(), 0.0);
  for (auto &w : cond_w) w /= cond_total;
  const std::vector<double> word_w = spec.WordWeights();

  Rng rng(seed);
  Corpus corpus;
  corpus.name = spec.name;
  corpus.domain_tag = spec.name;
  corpus.vocabulary = vocab;
  corpus.feature_dim = f;
  corpus.generation_seed = seed;
  corpus.utterances.reserve(n_utterances);
  for (int n = 0; n < n_utterances; ++n) {
    const std::size_t cond = Draw(rng, cond_w);
    const int n_words = static_cast<int>(
        rng.UniformInt(spec.utterance_length.lo, spec.utterance_length.hi));
    WordSeq words;
    for (int w = 0; w < n_words; ++w) words.push_back(spec.lexicon[Draw(rng, word_w)]);
    LabelSeq labels = vocab.FromWords(words);
    std::vector<int> frame_symbols;
    for (int sym : labels) {
      const int reps = static_cast<int>(
          rng.UniformInt(spec.frames_per_symbol.lo, spec.frames_per_symbol.hi));
      frame_symbols.insert(frame_symbols.end(), reps, sym);
    }
    Matrix feats(static_cast<Eigen::Index>(frame_symbols.size()), f);
    for (std::size_t t = 0; t < frame_symbols.size(); ++t) {
      feats.row(static_cast<Eigen::Index>(t)) = domain_protos[cond].row(frame_symbols[t]);
      if (spec.emission_noise_std > 0)
        for (int d = 0; d < f; ++d)
          feats(static_cast<Eigen::Index>(t), d) += spec.emission_noise_std * rng.Normal();
    }
    corpus.utterances.emplace_back(spec.name + "-" + std::to_string(n), std::move(feats),
                                   std::move(labels), spec.name);
  }
  return corpus;
}

std::vector<std::uint8_t> SerializeCorpus(const Corpus &corpus) {
  ByteWriter w;
  w.Raw(std::string(kCorpusMagic) + "\n");
  w.Raw("version " + std::to_string(kCorpusVersion) + "\n");
  w.Raw("vocabulary " + corpus.vocabulary.ToLine() + "\n");
  w.Raw("vocabulary_hash " + corpus.vocabulary.Hash() + "\n");
  w.Raw("feature_dim " + std::to_string(corpus.feature_dim) + "\n");
  w.Raw("end_header\n");

  ByteWriter meta;
  meta.Str(corpus.name);
  meta.Str(corpus.domain_tag);
  meta.U8(corpus.generation_seed.has_value());
  meta.U64(corpus.generation_seed.value_or(0));
  meta.U64(corpus.utterances.size());
  w.Record(meta);
  for (const auto &u : corpus.utterances) {
    ByteWriter r;
    r.Str(u.id);
    r.Str(u.domain_tag);
    r.U32(static_cast<std::uint32_t>(u.features.rows()));
    r.U32(static_cast<std::uint32_t>(u.features.cols()));
    for (Eigen::Index i = 0; i < u.features.size(); ++i) r.F64(u.features.data()[i]);
    r.U8(u.has_transcript());
    if (u.has_transcript()) r.IntSeq(*u.transcript());
    w.Record(r);
  }
  return w.bytes();
}

namespace {

std::string HeaderValue(ByteReader &r, const std::string &key) {
  const std::string line = r.Line();
  if (line.rfind(key + " ", 0) != 0) throw FormatError("corrupted record");
  return line.substr(key.size() + 1);
}

}  // namespace

Corpus DeserializeCorpus(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.Line() != kCorpusMagic) throw FormatError("not a corpus file");
  if (HeaderValue(r, "version") != std::to_string(kCorpusVersion))
    throw FormatError("version mismatch");
  Corpus c;
  c.vocabulary = Vocabulary::ParseLine(HeaderValue(r, "vocabulary"));
  if (HeaderValue(r, "vocabulary_hash") != c.vocabulary.Hash())
    throw FormatError("vocabulary-hash mismatch");
  try {
    c.feature_dim = std::stoi(HeaderValue(r, "feature_dim"));
  } catch (const std::logic_error &) {
    throw FormatError("corrupted record");
  }
  if (r.Line() != "end_header") throw FormatError("corrupted record");

  ByteReader meta = r.Record();
  c.name = meta.Str();
  c.domain_tag = meta.Str();
  const bool has_seed = meta.U8() != 0;
  const std::uint64_t seed = meta.U64();
  if (has_seed) c.generation_seed = seed;
  const std::uint64_t n = meta.U64();
  if (!meta.done()) throw FormatError("corrupted record");
  for (std::uint64_t i = 0; i < n; ++i) {
    ByteReader ur = r.Record();
    Utterance u;
    u.id = ur.Str();
    u.domain_tag = ur.Str();
    const std::uint32_t rows = ur.U32();
    const std::uint32_t cols = ur.U32();
    if (static_cast<int>(cols) != c.feature_dim || rows < 1 ||
        static_cast<std::uint64_t>(rows) * cols > ur.remaining() / 8)
      throw FormatError("corrupted record");
    u.features.resize(rows, cols);
    for (Eigen::Index k = 0; k < u.features.size(); ++k) u.features.data()[k] = ur.F64();
    if (ur.U8() != 0) {
      LabelSeq t = ur.IntSeq();
      for (int l : t)
        if (l < 0 || l >= c.vocabulary.size() || l == c.vocabulary.blank_index())
          throw FormatError("corrupted record");
      u.set_transcript(std::move(t));
    }
    if (!ur.done()) throw FormatError("corrupted record");
    c.utterances.push_back(std::move(u));
  }
  if (!r.done()) throw FormatError("corrupted record");
  return c;
}

void SaveCorpus(const Corpus &corpus, const std::string &path) {
  WriteFileAtomic(path, SerializeCorpus(corpus));
}

Corpus LoadCorpus(const std::string &path) { return DeserializeCorpus(ReadFileBytes(path)); }

Corpus LoadCorpus(const std::string &path, const Vocabulary &expected) {
  Corpus c = LoadCorpus(path);
  if (c.vocabulary.Hash() != expected.Hash()) throw FormatError("vocabulary-hash mismatch");
  return c;
}

std::vector<Corpus> SplitCorpus(const Corpus &corpus, const std::vector<double> &fractions,
                                std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("fractions invalid: empty");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("fractions invalid: negative entry");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("fractions invalid: must sum to 1");

  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.Shuffle(order);

  std::vector<Corpus> parts;
  double cum = 0.0;
  std::size_t begin = 0;
  for (std::size_t p = 0; p < fractions.size(); ++p) {
    cum += fractions[p];
    const std::size_t end =
        p + 1 == fractions.size() ? n : std::min(n, static_cast<std::size_t>(std::llround(cum * n)));
    std::vector<std::size_t> idx(order.begin() + begin, order.begin() + std::max(begin, end));
    std::sort(idx.begin(), idx.end());
    Corpus part;
    part.name = fractions.size() == 1 ? corpus.name : corpus.name + "." + std::to_string(p);
    part.domain_tag = corpus.domain_tag;
    part.vocabulary = corpus.vocabulary;
    part.feature_dim = corpus.feature_dim;
    part.generation_seed = corpus.generation_seed;
    for (std::size_t i : idx) part.utterances.push_back(corpus.utterances[i]);
    parts.push_back(std::move(part));
    begin = std::max(begin, end);
  }
  return parts;
}

}  // namespace ekd
