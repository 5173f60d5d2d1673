// ekd/include/ekd/decoder.h
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

#ifndef EKD_DECODER_H_
#define EKD_DECODER_H_

#include "ekd/ctc.h"
#include "ekd/ngram_lm.h"
#include "ekd/vocab_corpus.h"

namespace ekd {

struct BeamConfig {
  int beam_width = 16;
  double lm_weight = 0.5;
  // Added per hypothesised word; only applied when an LM is supplied.
  double word_insertion_bonus = 0.0;

  void Validate() const;
};

struct BeamHypothesis {
  LabelSeq labels;
  WordSeq words;
  double acoustic_score = 0.0;  // ln of the best alignment's probability
  double lm_score = 0.0;        // ln P_lm including </s>; 0 without an LM
  double total_score = 0.0;     // acoustic + lm_weight * lm + bonus * |words|
};

// CTC prefix beam search with word-level shallow fusion. Each prefix carries
// the score of its best alignment (ending in blank / non-blank), so
// beam_width = 1 without an LM reproduces GreedyDecode. A word is scored by
// the LM when the separator closes it and at the end of the utterance.
BeamHypothesis BeamSearch(const PosteriorSequence &posteriors, const NgramLm *lm,
                          const BeamConfig &config, const Vocabulary &vocab);

inline WordSeq BeamDecode(const PosteriorSequence &posteriors, const NgramLm *lm,
                          const BeamConfig &config, const Vocabulary &vocab) {
  return BeamSearch(posteriors, lm, config, vocab).words;
}

// ln P of one word given an oldest-first word-id history. A word outside the
// LM gets ln P(<unk> | history) plus a uniform spelling model over the
// vocabulary's letters and an end-of-word mark, so misspellings are not
// cheaper than the rare words they replace.
double WordLogProb(const NgramLm &lm, std::span<const int> history, const std::string &word,
                   const Vocabulary &vocab);

// Language-model part of a hypothesis score: ln P_lm(words, </s>) with the
// same out-of-vocabulary treatment as the search.
double LmSentenceScore(const NgramLm &lm, const WordSeq &words, const Vocabulary &vocab);

struct WerBreakdown {
  long substitutions = 0;
  long insertions = 0;
  long deletions = 0;
  long reference_words = 0;
  double wer = 0.0;
  // False when the reference is empty but the hypothesis is not.
  bool defined = true;

  long errors() const { return substitutions + insertions + deletions; }
  WerBreakdown &operator+=(const WerBreakdown &o);
};

// Word-level Levenshtein alignment with unit costs. Among optimal alignments
// the backtrace prefers substitution, then deletion, then insertion.
WerBreakdown Wer(const WordSeq &reference, const WordSeq &hypothesis);

}  // namespace ekd

#endif  // EKD_DECODER_H_
