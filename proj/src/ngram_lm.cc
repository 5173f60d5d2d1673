// ekd/src/ngram_lm.cc
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

#include "ekd/ngram_lm.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace ekd {

namespace {

constexpr double kLog10Zero = -99.0;

// Katz discount ratios d_r for r = 1..max_count of one n-gram order, falling
// back to absolute discounting when the Good-Turing estimate is unusable.
class Discounter {
 public:
  Discounter(const std::map<std::vector<int>, long> &counts, int max_count) {
    std::vector<double> n(max_count + 2, 0.0);
    for (const auto &[ngram, c] : counts)
      if (c <= max_count + 1) n[c] += 1.0;
    bool valid = n[1] > 0;
    for (int r = 1; valid && r <= max_count + 1; ++r) valid = n[r] > 0;
    if (valid) {
      const double common = (max_count + 1) * n[max_count + 1] / n[1];
      gt_.assign(max_count + 1, 1.0);
      for (int r = 1; r <= max_count; ++r) {
        const double r_star = (r + 1) * n[r + 1] / n[r];
        const double d = (r_star / r - common) / (1.0 - common);
        if (!(d > 0.0 && d < 1.0)) valid = false;
        gt_[r] = d;
      }
    }
    if (!valid) {
      gt_.clear();
      // D = n1 / (n1 + 2 n2); without doubletons that is 1 and would
      // discard every singleton, so use 0.5 instead.
      const double n2 = n.size() > 2 ? n[2] : 0.0;
      absolute_ = n[1] > 0 && n2 > 0 ? n[1] / (n[1] + 2.0 * n2) : 0.5;
    }
  }

  double Ratio(long count) const {
    if (!gt_.empty()) return count < static_cast<long>(gt_.size()) ? gt_[count] : 1.0;
    return (count - absolute_) / static_cast<double>(count);
  }

 private:
  std::vector<double> gt_;  // indexed by count; empty when using absolute discounting
  double absolute_ = 0.5;
};

std::string FormatLog(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

int NgramLm::AddWord(const std::string &w) {
  auto it = index_.find(w);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(words_.size());
  words_.push_back(w);
  index_.emplace(w, id);
  return id;
}

int NgramLm::WordId(const std::string &word) const {
  auto it = index_.find(word);
  return it == index_.end() ? unk_ : it->second;
}

const NgramLm::Entry *NgramLm::Find(std::span<const int> ngram) const {
  if (ngram.empty() || ngram.size() > tables_.size()) return nullptr;
  const Table &t = tables_[ngram.size() - 1];
  auto it = t.find(std::vector<int>(ngram.begin(), ngram.end()));
  return it == t.end() ? nullptr : &it->second;
}

NgramLm NgramLm::Train(const std::vector<WordSeq> &transcripts, const TrainOptions &options) {
  if (options.order < 1) throw ConfigError("LM order must be >= 1");
  if (transcripts.empty()) throw ConfigError("LM training needs transcripts");
  NgramLm lm;
  lm.order_ = options.order;
  lm.bos_ = lm.AddWord(kBos);
  lm.eos_ = lm.AddWord(kEos);
  lm.unk_ = lm.AddWord(kUnk);
  std::set<std::string> vocab;
  for (const auto &s : transcripts) vocab.insert(s.begin(), s.end());
  for (const auto &w : vocab) lm.AddWord(w);

  const int order = options.order;
  std::vector<std::map<std::vector<int>, long>> counts(order);
  for (const auto &s : transcripts) {
    std::vector<int> tokens{lm.bos_};
    for (const auto &w : s) tokens.push_back(lm.index_.at(w));
    tokens.push_back(lm.eos_);
    for (int n = 1; n <= order; ++n) {
      for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        if (n == 1 && tokens[i] == lm.bos_) continue;
        ++counts[n - 1][std::vector<int>(tokens.begin() + i, tokens.begin() + i + n)];
      }
    }
  }

  lm.tables_.assign(order, {});
  // Unigrams: discounted mass goes to <unk>, at least unk_floor.
  {
    Discounter disc(counts[0], options.katz_max_count);
    double total = 0.0;
    for (const auto &[g, c] : counts[0]) total += static_cast<double>(c);
    std::map<std::vector<int>, double> p;
    double seen_mass = 0.0;
    for (const auto &[g, c] : counts[0]) {
      p[g] = disc.Ratio(c) * static_cast<double>(c) / total;
      seen_mass += p[g];
    }
    double unk_mass = 1.0 - seen_mass;
    if (unk_mass < options.unk_floor) {
      for (auto &[g, v] : p) v *= (1.0 - options.unk_floor) / seen_mass;
      unk_mass = options.unk_floor;
    }
    p[{lm.unk_}] = unk_mass;
    for (const auto &[g, v] : p) lm.tables_[0][g].log10_prob = std::log10(v);
    lm.tables_[0][{lm.bos_}].log10_prob = kLog10Zero;
  }

  for (int n = 2; n <= order; ++n) {
    Discounter disc(counts[n - 1], options.katz_max_count);
    std::map<std::vector<int>, double> context_total;
    for (const auto &[g, c] : counts[n - 1])
      context_total[std::vector<int>(g.begin(), g.end() - 1)] += static_cast<double>(c);
    std::map<std::vector<int>, double> seen_mass, lower_mass;
    for (const auto &[g, c] : counts[n - 1]) {
      const std::vector<int> h(g.begin(), g.end() - 1);
      const double p = disc.Ratio(c) * static_cast<double>(c) / context_total[h];
      lm.tables_[n - 1][g].log10_prob = std::log10(p);
      seen_mass[h] += p;
      // Lower-order estimate from the model built so far (orders < n).
      lower_mass[h] += std::pow(10.0, lm.Log10Prob(std::span(h).subspan(1), g.back()));
    }
    for (const auto &[h, mass] : seen_mass) {
      const double num = 1.0 - mass;
      const double den = 1.0 - lower_mass[h];
      lm.tables_[n - 2][h].log10_backoff =
          num > 0 && den > 0 ? std::log10(num / den) : kLog10Zero;
    }
  }
  return lm;
}

double NgramLm::Log10Prob(std::span<const int> history, int word) const {
  if (word == bos_) return kLog10Zero;
  if (word < 0 || word >= static_cast<int>(words_.size())) word = unk_;
  std::size_t hlen = std::min<std::size_t>(history.size(), order_ - 1);
  std::vector<int> ngram(history.end() - hlen, history.end());
  ngram.push_back(word);
  double backoff = 0.0;
  std::span<const int> view(ngram);
  while (true) {
    if (const Entry *e = Find(view)) return e->log10_prob + backoff;
    if (view.size() == 1) return kLog10Zero + backoff;
    const std::span<const int> context = view.first(view.size() - 1);
    if (const Entry *c = Find(context)) backoff += c->log10_backoff;
    view = view.subspan(1);
  }
}

double NgramLm::LogProb(std::span<const int> history, int word) const {
  return Log10Prob(history, word) * std::log(10.0);
}

double NgramLm::SentenceLogProb(const WordSeq &sentence) const {
  std::vector<int> history{bos_};
  double total = 0.0;
  for (const auto &w : sentence) {
    const int id = WordId(w);
    total += LogProb(history, id);
    history.push_back(id);
  }
  return total + LogProb(history, eos_);
}

double NgramLm::Perplexity(const std::vector<WordSeq> &sentences) const {
  double log_sum = 0.0;
  std::size_t tokens = 0;
  for (const auto &s : sentences) {
    log_sum += SentenceLogProb(s);
    tokens += s.size() + 1;
  }
  return tokens == 0 ? 1.0 : std::exp(-log_sum / static_cast<double>(tokens));
}

std::vector<std::size_t> NgramLm::NgramCounts() const {
  std::vector<std::size_t> out;
  for (const auto &t : tables_) out.push_back(t.size());
  return out;
}

std::string NgramLm::ToArpa() const {
  std::ostringstream os;
  os << "\\data\\\n";
  for (int n = 1; n <= order_; ++n) os << "ngram " << n << "=" << tables_[n - 1].size() << "\n";
  for (int n = 1; n <= order_; ++n) {
    os << "\n\\" << n << "-grams:\n";
    // Sort lines by word strings so the file does not depend on id assignment.
    std::vector<std::pair<std::string, const Entry *>> lines;
    for (const auto &[g, e] : tables_[n - 1]) {
      std::string key;
      for (std::size_t i = 0; i < g.size(); ++i) key += (i ? " " : "") + words_[g[i]];
      lines.emplace_back(std::move(key), &e);
    }
    std::sort(lines.begin(), lines.end());
    for (const auto &[key, e] : lines) {
      os << FormatLog(e->log10_prob) << '\t' << key;
      if (n < order_ && e->log10_backoff != 0.0) os << '\t' << FormatLog(e->log10_backoff);
      os << '\n';
    }
  }
  os << "\n\\end\\\n";
  return os.str();
}

NgramLm NgramLm::FromArpa(const std::string &text) {
  NgramLm lm;
  std::istringstream is(text);
  std::string line;
  std::vector<std::size_t> declared;
  auto bad = [](const std::string &why) { return FormatError("ARPA: " + why); };
  while (std::getline(is, line) && line != "\\data\\") {
  }
  if (line != "\\data\\") throw bad("missing \\data\\");
  while (std::getline(is, line) && !line.empty()) {
    int n = 0;
    std::size_t count = 0;
    if (std::sscanf(line.c_str(), "ngram %d=%zu", &n, &count) != 2 ||
        n != static_cast<int>(declared.size()) + 1)
      throw bad("bad count line '" + line + "'");
    declared.push_back(count);
  }
  if (declared.empty()) throw bad("no n-gram counts");
  lm.order_ = static_cast<int>(declared.size());
  lm.tables_.assign(lm.order_, {});
  for (int n = 1; n <= lm.order_; ++n) {
    while (std::getline(is, line) && line.empty()) {
    }
    if (line != "\\" + std::to_string(n) + "-grams:") throw bad("expected \\" +
                                                                std::to_string(n) + "-grams:");
    for (std::size_t i = 0; i < declared[n - 1]; ++i) {
      if (!std::getline(is, line)) throw bad("truncated " + std::to_string(n) + "-grams");
      std::istringstream ls(line);
      Entry e;
      if (!(ls >> e.log10_prob)) throw bad("bad entry '" + line + "'");
      std::vector<int> g;
      std::string w;
      for (int k = 0; k < n; ++k) {
        if (!(ls >> w)) throw bad("bad entry '" + line + "'");
        if (n == 1) {
          g.push_back(lm.AddWord(w));
        } else {
          auto it = lm.index_.find(w);
          if (it == lm.index_.end()) throw bad("word '" + w + "' missing from unigrams");
          g.push_back(it->second);
        }
      }
      if (ls >> w) e.log10_backoff = std::stod(w);
      lm.tables_[n - 1][g] = e;
    }
  }
  while (std::getline(is, line) && line.empty()) {
  }
  if (line != "\\end\\") throw bad("missing \\end\\");
  auto special = [&](const char *w) {
    auto it = lm.index_.find(w);
    if (it != lm.index_.end()) return it->second;
    const int id = lm.AddWord(w);
    lm.tables_[0][{id}].log10_prob = kLog10Zero;
    return id;
  };
  lm.bos_ = special(kBos);
  lm.eos_ = special(kEos);
  lm.unk_ = special(kUnk);
  return lm;
}

}  // namespace ekd
