// ekd/include/ekd/vocab_corpus.h
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

#ifndef EKD_VOCAB_CORPUS_H_
#define EKD_VOCAB_CORPUS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ekd/types.h"

namespace ekd {

// Ordered grapheme inventory. The blank and the word separator are ordinary
// entries addressed by index.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Throws ConfigError on duplicate symbols, symbols containing whitespace,
  // or invalid / coinciding special indices.
  Vocabulary(std::vector<std::string> graphemes, int blank_index, int word_separator_index,
             std::uint64_t prototype_seed = 1);

  // Blank at 0, separator "|" at 1, then the given letters.
  static Vocabulary Letters(const std::string &letters, std::uint64_t prototype_seed = 1);

  int size() const { return static_cast<int>(graphemes_.size()); }
  const std::vector<std::string> &graphemes() const { return graphemes_; }
  const std::string &symbol(int index) const { return graphemes_.at(index); }
  int blank_index() const { return blank_; }
  int word_separator_index() const { return separator_; }
  std::uint64_t prototype_seed() const { return prototype_seed_; }
  // -1 when absent.
  int IndexOf(const std::string &symbol) const;

  // One line of whitespace-separated tokens; see ParseLine.
  std::string ToLine() const;
  static Vocabulary ParseLine(const std::string &line);
  // SHA-256 of ToLine().
  std::string Hash() const;

  // Splits a label sequence on the separator; blanks are dropped and empty
  // words are skipped.
  WordSeq ToWords(const LabelSeq &labels) const;
  // Spells each word with graphemes and joins them with the separator.
  // Throws Error for a character not in the vocabulary.
  LabelSeq FromWords(const WordSeq &words) const;

  bool operator==(const Vocabulary &) const = default;

 private:
  std::vector<std::string> graphemes_;
  int blank_ = 0;
  int separator_ = 1;
  std::uint64_t prototype_seed_ = 1;
};

// Canonical per-symbol feature vectors shared by all domains (one row per
// vocabulary entry; the blank row is zero and never emitted).
Matrix SymbolPrototypes(const Vocabulary &vocab, int feature_dim);

struct AffineTransform {
  Matrix scale;  // F x F, must be invertible
  Vector bias;   // F

  static AffineTransform Identity(int feature_dim);
  // scale = I + strength * G / sqrt(F), bias = bias_scale * g, with G, g
  // standard normal draws from `seed`.
  static AffineTransform Random(int feature_dim, double strength, double bias_scale,
                                std::uint64_t seed);
  RowVector Apply(const RowVector &x) const;
  bool operator==(const AffineTransform &) const = default;
};

struct IntRange {
  int lo = 1;
  int hi = 1;
  double mean() const { return 0.5 * (lo + hi); }
  bool operator==(const IntRange &) const = default;
};

// Parametric synthetic domain. Each utterance is recorded under one of the
// `transforms` ("recording conditions"), chosen with `condition_weights`.
struct DomainSpec {
  std::string name;
  double emission_noise_std = 0.0;
  std::vector<AffineTransform> transforms;
  std::vector<double> condition_weights;  // empty = uniform
  IntRange frames_per_symbol{1, 1};
  IntRange utterance_length{1, 1};  // words
  std::vector<std::string> lexicon;
  // Word frequency follows rank^-zipf_exponent; 0 gives a uniform lexicon.
  double zipf_exponent = 0.0;
  // Rank of lexicon[0] minus one. Lexicons cut from a shared word list use
  // their start offset so all domains agree on which words are frequent.
  int zipf_rank_offset = 0;

  int feature_dim() const;
  // Sampling weights over the lexicon (normalized).
  std::vector<double> WordWeights() const;
  bool operator==(const DomainSpec &) const = default;
};

// Process-wide count of Utterance::transcript() calls, used to prove that
// student training never looks at target labels.
std::uint64_t TranscriptReadCount();
void ResetTranscriptReadCount();

class Utterance {
 public:
  Utterance() = default;
  Utterance(std::string id, Matrix features, std::optional<LabelSeq> transcript,
            std::string domain_tag)
      : id(std::move(id)),
        features(std::move(features)),
        domain_tag(std::move(domain_tag)),
        transcript_(std::move(transcript)) {}

  std::string id;
  Matrix features;  // T_n x F
  std::string domain_tag;

  int num_frames() const { return static_cast<int>(features.rows()); }
  bool has_transcript() const { return transcript_.has_value(); }
  // Counted read; see TranscriptReadCount().
  const std::optional<LabelSeq> &transcript() const;
  void set_transcript(std::optional<LabelSeq> t) { transcript_ = std::move(t); }

  bool operator==(const Utterance &o) const;

 private:
  std::optional<LabelSeq> transcript_;
};

struct Corpus {
  std::string name;
  std::string domain_tag;
  Vocabulary vocabulary;
  int feature_dim = 0;
  std::vector<Utterance> utterances;
  std::optional<std::uint64_t> generation_seed;

  std::size_t size() const { return utterances.size(); }
  std::int64_t TotalFrames() const;
  // Copy with every transcript removed.
  Corpus WithoutTranscripts() const;
  bool operator==(const Corpus &o) const = default;
};

// Throws ConfigError for an empty lexicon, a word the vocabulary cannot spell,
// a degenerate (non-invertible) transform or n_utterances < 1.
Corpus GenerateCorpus(const DomainSpec &spec, const Vocabulary &vocab, int n_utterances,
                      std::uint64_t seed);

std::vector<std::uint8_t> SerializeCorpus(const Corpus &corpus);
// Throws FormatError("version mismatch" | "corrupted record" |
// "vocabulary-hash mismatch").
Corpus DeserializeCorpus(std::span<const std::uint8_t> bytes);
void SaveCorpus(const Corpus &corpus, const std::string &path);
Corpus LoadCorpus(const std::string &path);
// Also checks the stored vocabulary against `expected`.
Corpus LoadCorpus(const std::string &path, const Vocabulary &expected);

// Disjoint covering partition; part sizes follow rounded cumulative
// fractions, original order is kept within each part.
std::vector<Corpus> SplitCorpus(const Corpus &corpus, const std::vector<double> &fractions,
                                std::uint64_t seed);

}  // namespace ekd

#endif  // EKD_VOCAB_CORPUS_H_
