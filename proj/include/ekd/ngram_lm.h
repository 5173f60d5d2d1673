// ekd/include/ekd/ngram_lm.h
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

#ifndef EKD_NGRAM_LM_H_
#define EKD_NGRAM_LM_H_

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ekd/types.h"

namespace ekd {

// Word-level back-off n-gram model with Katz discounting, readable from and
// writable to the ARPA text format.
class NgramLm {
 public:
  static constexpr const char *kBos = "<s>";
  static constexpr const char *kEos = "</s>";
  static constexpr const char *kUnk = "<unk>";

  struct TrainOptions {
    int order = 3;
    // Counts up to this value are Good-Turing discounted.
    int katz_max_count = 5;
    // Minimum unigram probability reserved for <unk>.
    double unk_floor = 1e-6;
  };

  // Throws ConfigError for order < 1 or an empty transcript list.
  static NgramLm Train(const std::vector<WordSeq> &transcripts, const TrainOptions &options);
  static NgramLm Train(const std::vector<WordSeq> &transcripts, int order = 3) {
    TrainOptions o;
    o.order = order;
    return Train(transcripts, o);
  }

  static NgramLm FromArpa(const std::string &text);
  std::string ToArpa() const;

  int order() const { return order_; }
  const std::vector<std::string> &words() const { return words_; }
  // Id of `word`, or of <unk> when the word is not in the vocabulary.
  int WordId(const std::string &word) const;
  int bos() const { return bos_; }
  int eos() const { return eos_; }
  int unk() const { return unk_; }
  bool Contains(const std::string &word) const { return index_.count(word) > 0; }

  // log10 P(word | history); `history` is oldest-first and may be longer than
  // order-1 (extra words are ignored).
  double Log10Prob(std::span<const int> history, int word) const;
  // Natural-log version.
  double LogProb(std::span<const int> history, int word) const;

  // Natural-log probability of a whole sentence including </s>.
  double SentenceLogProb(const WordSeq &sentence) const;
  // exp(-sum ln P / tokens), with one </s> token per sentence.
  double Perplexity(const std::vector<WordSeq> &sentences) const;

  // Number of stored n-grams of each order (index 0 = unigrams).
  std::vector<std::size_t> NgramCounts() const;

 private:
  struct Entry {
    double log10_prob = 0.0;
    double log10_backoff = 0.0;
  };
  using Table = std::map<std::vector<int>, Entry>;

  int AddWord(const std::string &w);
  const Entry *Find(std::span<const int> ngram) const;

  int order_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  std::vector<Table> tables_;  // tables_[n-1] holds n-grams
  int bos_ = -1, eos_ = -1, unk_ = -1;
};

}  // namespace ekd

#endif  // EKD_NGRAM_LM_H_
