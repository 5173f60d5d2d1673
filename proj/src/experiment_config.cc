// ekd/src/experiment_config.cc
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

#include "ekd/experiment_config.h"

#include <fstream>
#include <set>

#include "ekd/rng.h"

namespace ekd {

using nlohmann::json;

namespace {

// Words over the vocabulary's letters with no letter repeated back to back,
// so every frame run of a symbol is unambiguous under CTC collapse.
std::vector<std::string> WordPool(const Vocabulary &vocab, int size, int min_len, int max_len,
                                  std::uint64_t seed) {
  std::vector<std::string> letters;
  for (int i = 0; i < vocab.size(); ++i)
    if (i != vocab.blank_index() && i != vocab.word_separator_index())
      letters.push_back(vocab.symbol(i));
  if (letters.size() < 2) throw ConfigError("word pool needs at least two letters");
  Rng rng(seed);
  std::set<std::string> seen;
  std::vector<std::string> pool;
  int attempts = 0;
  while (static_cast<int>(pool.size()) < size) {
    if (++attempts > 1000 * size) throw ConfigError("cannot generate enough distinct words");
    const int len = static_cast<int>(rng.UniformInt(min_len, max_len));
    std::string w;
    std::string prev;
    for (int i = 0; i < len; ++i) {
      std::string c;
      do {
        c = letters[rng.UniformInt(0, static_cast<std::int64_t>(letters.size()) - 1)];
      } while (c == prev);
      w += c;
      prev = c;
    }
    if (seen.insert(w).second) pool.push_back(w);
  }
  return pool;
}

IntRange ParseRange(const json &j, const std::string &what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(what + " must be [lo, hi]");
  return {j[0].get<int>(), j[1].get<int>()};
}

AffineTransform ParseTransform(const json &j, int dim,
                               const std::vector<DomainSpec> &earlier_domains) {
  AffineTransform t;
  if (j.contains("scale")) {
    const auto rows = j.at("scale").get<std::vector<std::vector<double>>>();
    const auto bias = j.value("bias", std::vector<double>(dim, 0.0));
    if (static_cast<int>(rows.size()) != dim || static_cast<int>(bias.size()) != dim)
      throw ConfigError("explicit transform must be feature_dim x feature_dim");
    t = AffineTransform::Identity(dim);
    for (int i = 0; i < dim; ++i) {
      if (static_cast<int>(rows[i].size()) != dim) throw ConfigError("transform row size");
      for (int k = 0; k < dim; ++k) t.scale(i, k) = rows[i][k];
      t.bias(i) = bias[i];
    }
  } else {
    t = AffineTransform::Random(dim, j.value("strength", 0.0), j.value("bias_scale", 0.0),
                                j.value("seed", 1ULL));
  }
  // "base": compose on top of an earlier domain's first condition.
  if (j.contains("base")) {
    const std::string base = j.at("base").get<std::string>();
    const DomainSpec *found = nullptr;
    for (const auto &d : earlier_domains)
      if (d.name == base) found = &d;
    if (!found) throw ConfigError("transform base '" + base + "' is not a teacher domain");
    const AffineTransform &b = found->transforms.front();
    t = {t.scale * b.scale, t.scale * b.bias + t.bias};
  }
  return t;
}

DomainConfig ParseDomain(const json &j, const Vocabulary &vocab, int dim,
                         const std::vector<std::string> &pool,
                         const std::vector<DomainSpec> &earlier) {
  DomainConfig d;
  d.spec.name = j.at("name").get<std::string>();
  d.spec.emission_noise_std = j.value("noise", 0.0);
  for (const auto &t : j.at("transforms")) d.spec.transforms.push_back(ParseTransform(t, dim, earlier));
  d.spec.condition_weights = j.value("condition_weights", std::vector<double>{});
  d.spec.frames_per_symbol = ParseRange(j.at("frames_per_symbol"), "frames_per_symbol");
  d.spec.utterance_length = ParseRange(j.at("words_per_utterance"), "words_per_utterance");
  d.spec.zipf_exponent = j.value("zipf", 0.0);
  const json &lex = j.at("lexicon");
  if (lex.is_array()) {
    d.spec.lexicon = lex.get<std::vector<std::string>>();
  } else {
    const IntRange r = ParseRange(lex.at("pool_range"), "lexicon.pool_range");
    if (r.lo < 0 || r.hi > static_cast<int>(pool.size()) || r.lo >= r.hi)
      throw ConfigError("lexicon.pool_range outside word pool");
    d.spec.lexicon.assign(pool.begin() + r.lo, pool.begin() + r.hi);
    d.spec.zipf_rank_offset = r.lo;
  }
  d.train_utterances = j.value("train_utterances", 200);
  d.test_utterances = j.value("test_utterances", 60);
  (void)vocab;
  return d;
}

}  // namespace

json DefaultConfigJson() {
  auto teacher = [](const std::string &name, double noise, std::uint64_t tseed, int lo, int hi,
                    int n_train) {
    return json{{"name", name},
                {"noise", noise},
                {"transforms", json::array({{{"seed", tseed}, {"strength", 1.0}, {"bias_scale", 0.5}}})},
                {"frames_per_symbol", {2, 4}},
                {"words_per_utterance", {2, 5}},
                {"zipf", 1.0},
                {"lexicon", {{"pool_range", {lo, hi}}}},
                {"train_utterances", n_train},
                {"test_utterances", 60}};
  };
  json student = {
      {"name", "phone"},
      {"noise", 0.5},
      {"transforms",
       json::array({{{"base", "meeting"}, {"seed", 201}, {"strength", 0.3}, {"bias_scale", 0.2}},
                    {{"base", "read_large"}, {"seed", 202}, {"strength", 0.3}, {"bias_scale", 0.2}},
                    {{"base", "read_small"}, {"seed", 203}, {"strength", 0.3}, {"bias_scale", 0.2}}})},
      {"condition_weights", {1.0, 1.0, 1.0}},
      {"frames_per_symbol", {2, 4}},
      {"words_per_utterance", {2, 5}},
      {"zipf", 1.0},
      {"lexicon", {{"pool_range", {10, 110}}}},
      {"train_utterances", 300},
      {"test_utterances", 80}};
  return json{
      {"vocabulary", {{"letters", "abcdefghijkl"}, {"prototype_seed", 7}}},
      {"feature_dim", 12},
      {"word_pool", {{"size", 110}, {"seed", 3}, {"min_len", 2}, {"max_len", 5}}},
      {"teachers", json::array({teacher("meeting", 0.6, 11, 0, 70, 150),
                                teacher("read_large", 0.4, 12, 20, 90, 400),
                                teacher("read_small", 0.4, 13, 30, 100, 150)})},
      {"student", student},
      {"probe_utterances", 40},
      {"model", {{"context_window", 2}, {"hidden_sizes", {64, 64}}, {"activation", "relu"}, {"seed", 1}}},
      {"teacher_train",
       {{"epochs", 20}, {"batch_size", 16}, {"learning_rate", 2e-3}, {"optimizer", "adam"},
        {"gradient_clip", 5.0}, {"seed", 1}, {"eval_every", 0}}},
      {"student_train",
       {{"epochs", 20}, {"batch_size", 16}, {"learning_rate", 2e-3}, {"optimizer", "adam"},
        {"gradient_clip", 5.0}, {"seed", 1}, {"eval_every", 4}}},
      {"kd", {{"alpha", 0.0}, {"temperature", 1.0}, {"soft_label_mode", "posterior_weighted_ctc"}}},
      {"beam", {{"beam_width", 16}, {"lm_weight", 0.5}, {"word_insertion_bonus", 1.0}}},
      {"lm_order", 3},
      {"teacher_gate_wer", 0.15},
      {"allow_indomain", false},
      {"strategies", {"teacher_average", "framewise_max", "elitist"}},
      {"seeds", {1, 2, 3, 4, 5}},
      {"svcca", {{"enabled", true}, {"frames", 1500}, {"variance_fraction", 0.99}}},
      {"output_dir", "runs/default"}};
}

json MergeJson(json base, const json &patch) {
  if (!base.is_object() || !patch.is_object()) return patch;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      base[it.key()] = MergeJson(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
  return base;
}

json ApplyOverrides(json config, const std::vector<std::string> &overrides) {
  for (const auto &o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error &) {
      value = raw;
    }
    json *node = &config;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
      json &next = node->is_array() ? node->at(std::stoul(part)) : (*node)[part];
      if (dot == std::string::npos) {
        next = value;
        break;
      }
      node = &next;
      start = dot + 1;
    }
  }
  return config;
}

void ExperimentConfig::Validate() const {
  if (teachers.empty()) throw ConfigError("at least one teacher domain is required");
  std::set<std::string> names;
  for (const auto &t : teachers) {
    if (!names.insert(t.spec.name).second)
      throw ConfigError("duplicate teacher domain '" + t.spec.name + "'");
    if (t.train_utterances < 1 || t.test_utterances < 1)
      throw ConfigError("teacher '" + t.spec.name + "' needs train and test utterances");
  }
  if (!allow_indomain && names.count(student.spec.name))
    throw ConfigError("student domain '" + student.spec.name +
                      "' matches a teacher domain; pass --allow-indomain to permit this");
  if (student.train_utterances < 1 || student.test_utterances < 1)
    throw ConfigError("student domain needs train and test utterances");
  model.Validate();
  teacher_train.Validate();
  student_train.Validate();
  kd.Validate();
  beam.Validate();
  if (lm_order < 1) throw ConfigError("lm_order must be >= 1");
  if (strategies.empty()) throw ConfigError("no selection strategies configured");
  if (seeds.empty()) throw ConfigError("no seeds configured");
  if (svcca.enabled && (svcca.frames < 2 || !(svcca.variance_fraction > 0) ||
                        svcca.variance_fraction > 1))
    throw ConfigError("invalid svcca settings");
}

const DomainConfig &ExperimentConfig::Teacher(const std::string &name) const {
  for (const auto &t : teachers)
    if (t.spec.name == name) return t;
  throw ConfigError("unknown teacher '" + name + "'");
}

namespace {

TrainConfig ParseTrain(const json &j) {
  TrainConfig t;
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.optimizer = ParseOptimizer(j.value("optimizer", std::string("adam")));
  t.gradient_clip = j.value("gradient_clip", t.gradient_clip);
  t.seed = j.value("seed", t.seed);
  t.eval_every = j.value("eval_every", t.eval_every);
  return t;
}

}  // namespace

ExperimentConfig BuildConfig(const json &user) {
  const json j = MergeJson(DefaultConfigJson(), user);
  ExperimentConfig c;
  c.source = j;
  try {
    const json &v = j.at("vocabulary");
    if (v.contains("graphemes")) {
      c.vocabulary = Vocabulary(v.at("graphemes").get<std::vector<std::string>>(),
                                v.at("blank_index").get<int>(),
                                v.at("word_separator_index").get<int>(),
                                v.value("prototype_seed", 1ULL));
    } else {
      c.vocabulary = Vocabulary::Letters(v.at("letters").get<std::string>(),
                                         v.value("prototype_seed", 1ULL));
    }
    const int dim = j.at("feature_dim").get<int>();
    if (dim < 1) throw ConfigError("feature_dim must be positive");
    const json &wp = j.at("word_pool");
    const auto pool = WordPool(c.vocabulary, wp.at("size").get<int>(), wp.at("min_len").get<int>(),
                               wp.at("max_len").get<int>(), wp.at("seed").get<std::uint64_t>());
    std::vector<DomainSpec> earlier;
    for (const auto &t : j.at("teachers")) {
      c.teachers.push_back(ParseDomain(t, c.vocabulary, dim, pool, earlier));
      earlier.push_back(c.teachers.back().spec);
    }
    c.student = ParseDomain(j.at("student"), c.vocabulary, dim, pool, earlier);
    c.probe_utterances = j.at("probe_utterances").get<int>();
    const json &m = j.at("model");
    c.model.context_window = m.at("context_window").get<int>();
    c.model.hidden_sizes = m.at("hidden_sizes").get<std::vector<int>>();
    c.model.activation = ParseActivation(m.at("activation").get<std::string>());
    c.model.seed = m.at("seed").get<std::uint64_t>();
    c.teacher_train = ParseTrain(j.at("teacher_train"));
    c.student_train = ParseTrain(j.at("student_train"));
    const json &kd = j.at("kd");
    c.kd.alpha = kd.at("alpha").get<double>();
    c.kd.temperature = kd.at("temperature").get<double>();
    c.kd.soft_label_mode = ParseSoftLabelMode(kd.at("soft_label_mode").get<std::string>());
    const json &b = j.at("beam");
    c.beam.beam_width = b.at("beam_width").get<int>();
    c.beam.lm_weight = b.at("lm_weight").get<double>();
    c.beam.word_insertion_bonus = b.at("word_insertion_bonus").get<double>();
    c.lm_order = j.at("lm_order").get<int>();
    c.teacher_gate_wer = j.at("teacher_gate_wer").get<double>();
    c.allow_indomain = j.at("allow_indomain").get<bool>();
    for (const auto &s : j.at("strategies")) c.strategies.push_back(ParseStrategy(s.get<std::string>()));
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    const json &sv = j.at("svcca");
    c.svcca.enabled = sv.at("enabled").get<bool>();
    c.svcca.frames = sv.at("frames").get<int>();
    c.svcca.variance_fraction = sv.at("variance_fraction").get<double>();
    c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.Validate();
  return c;
}

ExperimentConfig LoadConfigFile(const std::string &path, const std::vector<std::string> &overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error &e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return BuildConfig(ApplyOverrides(MergeJson(DefaultConfigJson(), j), overrides));
}

}  // namespace ekd
