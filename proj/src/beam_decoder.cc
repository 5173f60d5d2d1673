// ekd/src/beam_decoder.cc
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

#include "ekd/decoder.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace ekd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Prefix {
  double blank = kNegInf;      // best alignment ending in blank
  double non_blank = kNegInf;  // best alignment ending in the last label
  double lm = 0.0;             // ln P of completed words
  int words = 0;
  std::string partial;         // letters of the word being spelled
  std::vector<int> history;    // LM history, oldest first

  double acoustic() const { return std::max(blank, non_blank); }
};

void TrimHistory(std::vector<int> &h, int order) {
  const std::size_t keep = static_cast<std::size_t>(std::max(order - 1, 0));
  if (h.size() > keep) h.erase(h.begin(), h.end() - keep);
}

}  // namespace

void BeamConfig::Validate() const {
  if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (lm_weight < 0) throw ConfigError("lm_weight must be >= 0");
}

double WordLogProb(const NgramLm &lm, std::span<const int> history, const std::string &word,
                   const Vocabulary &vocab) {
  const int id = lm.WordId(word);
  const double p = lm.LogProb(history, id);
  if (id != lm.unk() || word == "<unk>") return p;
  const int letters = vocab.size() - 2;  // blank and separator excluded
  return p - static_cast<double>(word.size() + 1) * std::log(letters + 1.0);
}

double LmSentenceScore(const NgramLm &lm, const WordSeq &words, const Vocabulary &vocab) {
  std::vector<int> history{lm.bos()};
  double total = 0.0;
  for (const auto &w : words) {
    total += WordLogProb(lm, history, w, vocab);
    history.push_back(lm.WordId(w));
  }
  return total + lm.LogProb(history, lm.eos());
}

BeamHypothesis BeamSearch(const PosteriorSequence &posteriors, const NgramLm *lm,
                          const BeamConfig &config, const Vocabulary &vocab) {
  config.Validate();
  const int blank = vocab.blank_index();
  const int sep = vocab.word_separator_index();
  const int z = posteriors.vocab_size();
  if (z != vocab.size()) throw Error("posterior width does not match vocabulary");
  const Matrix log_probs = posteriors.probs.array().log().matrix();

  auto fused = [&](const Prefix &p) {
    if (!lm) return p.acoustic();
    return p.acoustic() + config.lm_weight * p.lm + config.word_insertion_bonus * p.words;
  };

  std::map<LabelSeq, Prefix> beam;
  {
    Prefix root;
    root.blank = 0.0;
    if (lm) root.history = {lm->bos()};
    beam.emplace(LabelSeq{}, std::move(root));
  }

  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    std::map<LabelSeq, Prefix> next;
    auto slot = [&](const LabelSeq &labels, const Prefix &from) -> Prefix & {
      auto [it, inserted] = next.try_emplace(labels);
      if (inserted) {
        it->second = from;
        it->second.blank = kNegInf;
        it->second.non_blank = kNegInf;
      }
      return it->second;
    };
    for (const auto &[labels, p] : beam) {
      // Stay on the same prefix: emit blank, or repeat the last label.
      {
        Prefix &same = slot(labels, p);
        same.blank = std::max(same.blank, p.acoustic() + log_probs(t, blank));
        if (!labels.empty())
          same.non_blank = std::max(same.non_blank, p.non_blank + log_probs(t, labels.back()));
      }
      for (int c = 0; c < z; ++c) {
        if (c == blank) continue;
        // A repeated label needs an intervening blank.
        const double base = !labels.empty() && labels.back() == c ? p.blank : p.acoustic();
        const double score = base + log_probs(t, c);
        if (score == kNegInf) continue;
        LabelSeq extended = labels;
        extended.push_back(c);
        auto existing = next.find(extended);
        if (existing == next.end()) {
          Prefix q = p;
          q.blank = kNegInf;
          q.non_blank = kNegInf;
          if (c == sep) {
            if (!q.partial.empty()) {
              if (lm) {
                q.lm += WordLogProb(*lm, q.history, q.partial, vocab);
                q.history.push_back(lm->WordId(q.partial));
                TrimHistory(q.history, lm->order());
              }
              ++q.words;
              q.partial.clear();
            }
          } else {
            q.partial += vocab.symbol(c);
          }
          existing = next.emplace(std::move(extended), std::move(q)).first;
        }
        existing->second.non_blank = std::max(existing->second.non_blank, score);
      }
    }

    // Keep the best beam_width prefixes; ties resolved by label order.
    std::vector<std::pair<double, const LabelSeq *>> ranked;
    ranked.reserve(next.size());
    for (const auto &[labels, p] : next) ranked.emplace_back(fused(p), &labels);
    const std::size_t keep = std::min<std::size_t>(ranked.size(), config.beam_width);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto &a, const auto &b) { return a.first > b.first; });
    std::map<LabelSeq, Prefix> pruned;
    for (std::size_t i = 0; i < keep; ++i) {
      auto node = next.extract(*ranked[i].second);
      pruned.insert(std::move(node));
    }
    beam = std::move(pruned);
  }

  BeamHypothesis best;
  best.total_score = kNegInf;
  bool found = false;
  for (const auto &[labels, p] : beam) {
    double lm_score = p.lm;
    int words = p.words;
    if (!p.partial.empty()) ++words;
    if (lm) {
      std::vector<int> history = p.history;
      if (!p.partial.empty()) {
        lm_score += WordLogProb(*lm, history, p.partial, vocab);
        history.push_back(lm->WordId(p.partial));
      }
      lm_score += lm->LogProb(history, lm->eos());
    }
    const double total =
        lm ? p.acoustic() + config.lm_weight * lm_score + config.word_insertion_bonus * words
           : p.acoustic();
    if (!found || total > best.total_score) {
      found = true;
      best.labels = labels;
      best.acoustic_score = p.acoustic();
      best.lm_score = lm ? lm_score : 0.0;
      best.total_score = total;
    }
  }
  best.words = vocab.ToWords(best.labels);
  return best;
}

}  // namespace ekd
