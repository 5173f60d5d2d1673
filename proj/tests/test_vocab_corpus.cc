// ekd/tests/test_vocab_corpus.cc
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
#include <set>

#include "ekd/binary_io.h"
#include "ekd/experiment_config.h"
#include "ekd/vocab_corpus.h"
#include "test_util.h"

using namespace ekd;

namespace {

DomainSpec SimpleSpec(double noise, IntRange fps, std::vector<std::string> lexicon, int dim = 6,
                      std::uint64_t tseed = 4) {
  DomainSpec s;
  s.name = "d";
  s.emission_noise_std = noise;
  s.transforms = {AffineTransform::Random(dim, 1.0, 0.5, tseed)};
  s.frames_per_symbol = fps;
  s.utterance_length = {1, 3};
  s.lexicon = std::move(lexicon);
  return s;
}

const Vocabulary kVocab = Vocabulary::Letters("abcdef", 7);

}  // namespace

TEST_CASE("vocabulary invariants") {
  CHECK(kVocab.size() == 8);
  CHECK(kVocab.blank_index() == 0);
  CHECK(kVocab.word_separator_index() == 1);
  CHECK(Vocabulary::ParseLine(kVocab.ToLine()) == kVocab);
  CHECK(Vocabulary::ParseLine(kVocab.ToLine()).Hash() == kVocab.Hash());
  CHECK_THROWS_AS(Vocabulary({"<b>", "|", "a", "a"}, 0, 1), ConfigError);
  CHECK_THROWS_AS(Vocabulary({"<b>", "|", "a"}, 1, 1), ConfigError);
  CHECK_THROWS_AS(Vocabulary({"<b>", "|", "a"}, 0, 5), ConfigError);
  const LabelSeq y = kVocab.FromWords({"ab", "c"});
  CHECK(y == LabelSeq{2, 3, 1, 4});
  CHECK(kVocab.ToWords(y) == WordSeq{"ab", "c"});
  CHECK(kVocab.ToWords(LabelSeq{1, 2, 1, 1, 3, 1}) == WordSeq{"a", "b"});
}

TEST_CASE("zero-noise single-frame utterance equals transformed prototypes") {
  DomainSpec s = SimpleSpec(0.0, {1, 1}, {"ab"});
  s.utterance_length = {1, 1};
  const Corpus c = GenerateCorpus(s, kVocab, 1, 1);
  const Utterance &u = c.utterances[0];
  REQUIRE(u.num_frames() == 2);
  const Matrix protos = SymbolPrototypes(kVocab, 6);
  CHECK(u.features.row(0) == s.transforms[0].Apply(protos.row(2)));
  CHECK(u.features.row(1) == s.transforms[0].Apply(protos.row(3)));
  CHECK(*u.transcript() == LabelSeq{2, 3});
}

TEST_CASE("generation is deterministic") {
  const DomainSpec s = SimpleSpec(0.3, {1, 3}, {"ab", "cde", "f"});
  CHECK(SerializeCorpus(GenerateCorpus(s, kVocab, 20, 9)) ==
        SerializeCorpus(GenerateCorpus(s, kVocab, 20, 9)));
  CHECK(SerializeCorpus(GenerateCorpus(s, kVocab, 20, 9)) !=
        SerializeCorpus(GenerateCorpus(s, kVocab, 20, 10)));
}

TEST_CASE("mean frame count follows the domain distributions") {
  DomainSpec s = SimpleSpec(0.2, {2, 4}, {"ab", "cde", "f", "bcfa"});
  s.utterance_length = {1, 5};
  s.zipf_exponent = 1.0;
  const Corpus c = GenerateCorpus(s, kVocab, 100, 7);
  CHECK(c.size() == 100);
  const auto w = s.WordWeights();
  double mean_len = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) mean_len += w[i] * s.lexicon[i].size();
  const double words = s.utterance_length.mean();
  // Letters plus one separator between neighbouring words.
  const double symbols = words * mean_len + (words - 1.0);
  const double expected = 100 * symbols * s.frames_per_symbol.mean();
  CHECK(std::abs(c.TotalFrames() - expected) / expected < 0.10);
}

TEST_CASE("generation errors") {
  DomainSpec s = SimpleSpec(0.0, {1, 1}, {});
  CHECK_THROWS_AS(GenerateCorpus(s, kVocab, 3, 1), ConfigError);
  s.lexicon = {"ab"};
  s.transforms[0].scale.row(1) = s.transforms[0].scale.row(0);
  CHECK_THROWS_WITH_AS(GenerateCorpus(s, kVocab, 3, 1), doctest::Contains("degenerate"), ConfigError);
  s = SimpleSpec(0.0, {1, 1}, {"xyz"});
  CHECK_THROWS(GenerateCorpus(s, kVocab, 3, 1));
  s = SimpleSpec(0.0, {1, 1}, {"ab"});
  CHECK_THROWS_AS(GenerateCorpus(s, kVocab, 0, 1), ConfigError);
}

TEST_CASE("corpus save/load round trip") {
  testutil::TempDir dir("corpus");
  DomainSpec s = SimpleSpec(0.5, {1, 3}, {"ab", "cde"});
  Corpus one = GenerateCorpus(s, kVocab, 1, 3);
  SaveCorpus(one, dir / "one.ekdc");
  CHECK(LoadCorpus(dir / "one.ekdc") == one);
  Corpus many = GenerateCorpus(s, kVocab, 30, 3);
  SaveCorpus(many, dir / "many.ekdc");
  const Corpus back = LoadCorpus(dir / "many.ekdc", kVocab);
  CHECK(back == many);
  for (std::size_t i = 0; i < many.size(); ++i)
    CHECK(back.utterances[i].features == many.utterances[i].features);
  const Corpus bare = many.WithoutTranscripts();
  SaveCorpus(bare, dir / "bare.ekdc");
  CHECK(LoadCorpus(dir / "bare.ekdc") == bare);
  CHECK_FALSE(LoadCorpus(dir / "bare.ekdc").utterances[0].has_transcript());
}

TEST_CASE("corpus load errors") {
  DomainSpec s = SimpleSpec(0.5, {1, 3}, {"ab", "cde"});
  const auto bytes = SerializeCorpus(GenerateCorpus(s, kVocab, 4, 3));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 7);
  CHECK_THROWS_WITH_AS(DeserializeCorpus(truncated), doctest::Contains("corrupted record"), FormatError);

  std::string text(bytes.begin(), bytes.end());
  std::string v2 = text;
  v2.replace(v2.find("version 1"), 9, "version 2");
  CHECK_THROWS_WITH_AS(DeserializeCorpus(std::vector<std::uint8_t>(v2.begin(), v2.end())),
                       doctest::Contains("version mismatch"), FormatError);

  std::string badhash = text;
  const auto pos = badhash.find("vocabulary_hash ") + 16;
  badhash[pos] = badhash[pos] == '0' ? '1' : '0';
  CHECK_THROWS_WITH_AS(DeserializeCorpus(std::vector<std::uint8_t>(badhash.begin(), badhash.end())),
                       doctest::Contains("vocabulary-hash mismatch"), FormatError);

  testutil::TempDir dir("corpus-err");
  SaveCorpus(DeserializeCorpus(bytes), dir / "c.ekdc");
  CHECK_THROWS_WITH_AS(LoadCorpus(dir / "c.ekdc", Vocabulary::Letters("abcdeg", 7)),
                       doctest::Contains("vocabulary-hash mismatch"), FormatError);
}

TEST_CASE("serialized generate_corpus(seed=7) regression hash") {
  const ExperimentConfig cfg = BuildConfig(nlohmann::json::object());
  const Corpus c = GenerateCorpus(cfg.teachers[0].spec, cfg.vocabulary, 20, 7);
  const auto bytes = SerializeCorpus(DeserializeCorpus(SerializeCorpus(c)));
  CHECK(Sha256Hex(bytes) == "df8bf7a7672b95145a3930e5abf2462df8ad641c74f1ebd56e26586662046230");
}

TEST_CASE("split examples") {
  DomainSpec s = SimpleSpec(0.1, {1, 2}, {"ab", "c"});
  const Corpus c = GenerateCorpus(s, kVocab, 10, 2);
  auto one = SplitCorpus(c, {1.0}, 5);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == c);
  auto halves = SplitCorpus(c, {0.5, 0.5}, 5);
  CHECK(halves[0].size() == 5);
  CHECK(halves[1].size() == 5);
  CHECK(SplitCorpus(c, {0.5, 0.5}, 5) == halves);
  CHECK_THROWS_AS(SplitCorpus(c, {0.5, 0.4}, 5), ConfigError);
  CHECK_THROWS_AS(SplitCorpus(c, {1.5, -0.5}, 5), ConfigError);
}

TEST_CASE("split is a disjoint cover") {
  DomainSpec s = SimpleSpec(0.1, {1, 2}, {"ab", "c"});
  const Corpus c = GenerateCorpus(s, kVocab, 37, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto parts = SplitCorpus(c, {0.3, 0.3, 0.4}, seed);
    std::multiset<std::string> ids;
    for (const auto &p : parts)
      for (const auto &u : p.utterances) ids.insert(u.id);
    CHECK(ids.size() == c.size());
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == c.size());
  }
}

TEST_CASE("noise-free utterances are recovered by nearest prototype") {
  DomainSpec s = SimpleSpec(0.0, {1, 3}, {"abc", "fed", "ba", "cafe"});
  const Corpus c = GenerateCorpus(s, kVocab, 25, 11);
  const Matrix protos = SymbolPrototypes(kVocab, 6);
  Matrix domain(kVocab.size(), 6);
  for (int g = 0; g < kVocab.size(); ++g) domain.row(g) = s.transforms[0].Apply(protos.row(g));
  for (const auto &u : c.utterances) {
    LabelSeq frames;
    for (int t = 0; t < u.num_frames(); ++t) {
      int best = 1;
      for (int g = 1; g < kVocab.size(); ++g)
        if ((domain.row(g) - u.features.row(t)).squaredNorm() <
            (domain.row(best) - u.features.row(t)).squaredNorm())
          best = g;
      frames.push_back(best);
    }
    // Words never repeat a letter back to back, so merging runs recovers the labels.
    LabelSeq merged;
    for (int f : frames)
      if (merged.empty() || merged.back() != f) merged.push_back(f);
    CHECK(merged == *u.transcript());
  }
}

TEST_CASE("default domains are separated beyond the emission noise") {
  const ExperimentConfig cfg = BuildConfig(nlohmann::json::object());
  const Matrix protos = SymbolPrototypes(cfg.vocabulary, cfg.teachers[0].spec.feature_dim());
  std::vector<DomainSpec> specs;
  for (const auto &t : cfg.teachers) specs.push_back(t.spec);
  specs.push_back(cfg.student.spec);
  for (std::size_t i = 0; i < specs.size(); ++i)
    for (std::size_t j = i + 1; j < specs.size(); ++j)
      for (const auto &ta : specs[i].transforms)
        for (const auto &tb : specs[j].transforms) {
          double dist = 0.0;
          for (int g = 1; g < cfg.vocabulary.size(); ++g)
            dist += (ta.Apply(protos.row(g)) - tb.Apply(protos.row(g))).norm();
          dist /= cfg.vocabulary.size() - 1;
          CHECK(dist > std::max(specs[i].emission_noise_std, specs[j].emission_noise_std));
        }
}

TEST_CASE("transcript reads are counted") {
  DomainSpec s = SimpleSpec(0.0, {1, 1}, {"ab"});
  const Corpus c = GenerateCorpus(s, kVocab, 3, 1);
  ResetTranscriptReadCount();
  (void)c.utterances[0].transcript();
  (void)c.utterances[1].transcript();
  CHECK(TranscriptReadCount() == 2);
  const Corpus copy = c;
  CHECK(copy == c);
  CHECK(TranscriptReadCount() == 2);
}
