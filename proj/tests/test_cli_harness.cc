// ekd/tests/test_cli_harness.cc
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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ekd/artifacts.h"
#include "ekd/experiment_config.h"
#include "ekd/pipeline.h"
#include "test_util.h"

using namespace ekd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json Teacher(const std::string &name, std::uint64_t tseed, int lo, int hi) {
  return {{"name", name},
          {"noise", 0.3},
          {"transforms", json::array({{{"seed", tseed}, {"strength", 1.0}, {"bias_scale", 0.5}}})},
          {"frames_per_symbol", {2, 3}},
          {"words_per_utterance", {1, 3}},
          {"zipf", 1.0},
          {"lexicon", {{"pool_range", {lo, hi}}}},
          {"train_utterances", 40},
          {"test_utterances", 10}};
}

// A pipeline small enough to run in a few seconds.
json TinyConfig(int n_teachers, std::vector<std::string> strategies) {
  json teachers = json::array();
  json transforms = json::array();
  const char *names[] = {"alpha", "beta", "gamma"};
  for (int k = 0; k < n_teachers; ++k) {
    teachers.push_back(Teacher(names[k], 11 + k, 5 * k, 20 + 5 * k));
    transforms.push_back({{"base", names[k]}, {"seed", 201 + k}, {"strength", 0.3}, {"bias_scale", 0.2}});
  }
  json student = Teacher("target", 99, 0, 30);
  student["transforms"] = transforms;
  student["condition_weights"] = json::array();
  student["train_utterances"] = 30;
  return {{"word_pool", {{"size", 40}, {"seed", 3}, {"min_len", 2}, {"max_len", 4}}},
          {"teachers", teachers},
          {"student", student},
          {"probe_utterances", 5},
          {"model", {{"hidden_sizes", {8, 8}}}},
          {"teacher_train", {{"epochs", 3}}},
          {"student_train", {{"epochs", 4}, {"eval_every", 2}}},
          {"beam", {{"beam_width", 2}}},
          {"teacher_gate_wer", 0.0},
          {"strategies", strategies},
          {"seeds", {1}},
          {"svcca", {{"frames", 50}}}};
}

std::string ReadFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("default config") {
  const ExperimentConfig c = BuildConfig(json::object());
  CHECK(c.teachers.size() == 3);
  CHECK(c.seeds.size() == 5);
  CHECK(c.strategies.size() == 3);
  CHECK(c.kd.alpha == 0.0);
  CHECK_FALSE(c.allow_indomain);
  for (const auto &t : c.teachers) CHECK(t.spec.name != c.student.spec.name);
  // unequal teacher training sets
  CHECK(c.Teacher("read_large").train_utterances > c.Teacher("read_small").train_utterances);
  CHECK_THROWS_AS(c.Teacher("nobody"), ConfigError);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(BuildConfig({{"teachers", json::array()}}), ConfigError);
  CHECK_THROWS_AS(BuildConfig({{"seeds", json::array()}}), ConfigError);
  CHECK_THROWS_AS(BuildConfig({{"strategies", {"best"}}}), Error);
  CHECK_THROWS_AS(BuildConfig({{"beam", {{"beam_width", 0}}}}), ConfigError);
  CHECK_THROWS_AS(BuildConfig({{"feature_dim", 0}}), ConfigError);
  CHECK_THROWS_AS(BuildConfig({{"model", {{"hidden_sizes", json::array()}}}}), ConfigError);
  CHECK_THROWS_AS(BuildConfig({{"student", {{"lexicon", {{"pool_range", {0, 999}}}}}}}), ConfigError);
  CHECK_THROWS_AS(BuildConfig({{"kd", {{"alpha", 2.0}}}}), ConfigError);
}

TEST_CASE("student domain must be unseen unless allowed") {
  json same = {{"student", {{"name", "meeting"}}}};
  try {
    BuildConfig(same);
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(std::string(e.what()).find("allow-indomain") != std::string::npos);
  }
  same["allow_indomain"] = true;
  CHECK(BuildConfig(same).student.spec.name == "meeting");
}

TEST_CASE("overrides") {
  json j = ApplyOverrides(DefaultConfigJson(), {"beam.beam_width=4", "output_dir=elsewhere",
                                                 "teachers.1.noise=0.1", "kd.soft_label_mode=hard_pseudo_label"});
  const ExperimentConfig c = BuildConfig(j);
  CHECK(c.beam.beam_width == 4);
  CHECK(c.output_dir == "elsewhere");
  CHECK(c.teachers[1].spec.emission_noise_std == 0.1);
  CHECK(c.kd.soft_label_mode == SoftLabelMode::kHardPseudoLabel);
  CHECK_THROWS_AS(ApplyOverrides(DefaultConfigJson(), {"novalue"}), ConfigError);
  const json merged = MergeJson({{"a", {{"b", 1}, {"c", 2}}}}, {{"a", {{"c", 3}}}});
  CHECK(merged == json{{"a", {{"b", 1}, {"c", 3}}}});
}

TEST_CASE("seed derivation") {
  CHECK(DeriveSeed(1, "x") == DeriveSeed(1, "x"));
  CHECK(DeriveSeed(1, "x") != DeriveSeed(2, "x"));
  CHECK(DeriveSeed(1, "x") != DeriveSeed(1, "y"));
  CHECK(ParseLmMode("both") == LmMode::kBoth);
  CHECK_THROWS_AS(ParseLmMode("maybe"), ConfigError);
}

TEST_CASE("artifact round trips") {
  testutil::TempDir dir("artifacts");
  ekd::Rng rng(1);
  PosteriorDump dump{"t", "hash", {}};
  for (int i = 0; i < 3; ++i) {
    Matrix m = testutil::RandomPosteriors(rng, 4 + i, 5);
    dump.sequences.push_back({m, "u" + std::to_string(i)});
  }
  SavePosteriorDump(dump, dir / "p.ekdp");
  const PosteriorDump back = LoadPosteriorDump(dir / "p.ekdp");
  CHECK(back.teacher == "t");
  CHECK(back.vocabulary_hash == "hash");
  REQUIRE(back.sequences.size() == 3);
  CHECK(back.sequences[2].probs == dump.sequences[2].probs);
  CHECK(back.sequences[1].utterance_id == "u1");

  std::vector<TeacherBundle> bundles;
  for (int i = 0; i < 3; ++i)
    bundles.push_back({"u" + std::to_string(i),
                       {{testutil::RandomPosteriors(rng, 5, 5), "u"}, {testutil::RandomPosteriors(rng, 5, 5), "u"}}});
  bundles.push_back({"bad", {{testutil::RandomPosteriors(rng, 5, 5), "u"}, {testutil::RandomPosteriors(rng, 4, 5), "u"}}});
  SelectionFile sel{"hash", {"a", "b"}, SelectCorpus(Strategy::kElitist, bundles, 0)};
  SaveSelectionFile(sel, dir / "s.ekds");
  const SelectionFile sback = LoadSelectionFile(dir / "s.ekds");
  CHECK(sback.teacher_names == sel.teacher_names);
  CHECK(sback.result.win_counts == sel.result.win_counts);
  REQUIRE(sback.result.outcomes.size() == 3);
  CHECK(sback.result.skipped.size() == 1);
  CHECK(sback.result.outcomes[1].selected_posteriors.probs ==
        sel.result.outcomes[1].selected_posteriors.probs);
  CHECK(sback.result.outcomes[1].winning_teacher == sel.result.outcomes[1].winning_teacher);
  CHECK(sback.result.outcomes[1].pseudo_transcript == sel.result.outcomes[1].pseudo_transcript);
  CHECK(SelectionSummary(sback).find("skipped") != std::string::npos);

  ActivationMatrix acts{"hidden1", testutil::RandomMatrix(rng, 6, 3), "m", 8};
  FrameSample sample;
  for (int i = 0; i < 6; ++i) sample.frames.emplace_back(i / 3, i % 3);
  SaveActivations(acts, sample, dir / "a.ekda");
  FrameSample sample_back;
  const ActivationMatrix aback = LoadActivations(dir / "a.ekda", &sample_back);
  CHECK(aback.data == acts.data);
  CHECK(aback.layer_name == "hidden1");
  CHECK(aback.checkpoint_step == 8);
  CHECK(sample_back.frames == sample.frames);

  std::ofstream(dir / "junk.ekdp") << "EKD-POSTERIORS\nversion 9\n";
  CHECK_THROWS_AS(LoadPosteriorDump(dir / "junk.ekdp"), FormatError);
  CHECK_THROWS_AS(LoadSelectionFile(dir / "p.ekdp"), FormatError);
}

TEST_CASE("result table") {
  ResultTable t;
  ResultCell c;
  c.seed = 2;
  c.test_set = "x.test";
  c.model = "m";
  c.wer = Wer({"a", "b", "c"}, {"a", "x"});
  t.Add(c);
  c.seed = 1;
  c.wer = Wer({"a", "b", "c"}, {"a", "b", "c"});
  t.Add(c);
  c.lm = true;
  c.failed = true;
  t.Add(c);
  REQUIRE(t.cells().size() == 3);
  CHECK(t.cells()[0].seed == 1);
  CHECK(t.At(2, "x.test", "m", false).wer.errors() == 2);
  CHECK_THROWS_AS(t.At(3, "x.test", "m", false), Error);
  const auto [mean, sd] = t.MeanStd("x.test", "m", false);
  CHECK(mean == doctest::Approx(1.0 / 3));
  CHECK(sd == doctest::Approx(std::sqrt(2.0 / 9)));
  const ResultTable back = ResultTable::FromTsv(t.ToTsv());
  CHECK(back == t);
  CHECK(back.At(1, "x.test", "m", true).failed);
  CHECK(t.ToText().find("x.test") != std::string::npos);
  // replacing a key keeps one cell
  c.failed = false;
  t.Add(c);
  CHECK(t.cells().size() == 3);
  CHECK_FALSE(t.At(1, "x.test", "m", true).failed);
}

TEST_CASE("one teacher: elitist selection is the teacher") {
  testutil::TempDir dir("k1");
  const ExperimentConfig cfg = BuildConfig(TinyConfig(1, {"elitist"}));
  Experiment exp(cfg, dir.path());
  exp.WriteConfig();
  exp.GenData(1);
  exp.TrainTeachers(1);
  exp.Decode(1);
  const SelectionFile sel = exp.Select(1, Strategy::kElitist);
  const PosteriorDump dump = LoadPosteriorDump(exp.PosteriorPath(1, "alpha"));
  REQUIRE(sel.result.outcomes.size() == dump.sequences.size());
  for (std::size_t i = 0; i < dump.sequences.size(); ++i) {
    CHECK(sel.result.outcomes[i].winning_teacher == 0);
    CHECK(sel.result.outcomes[i].selected_posteriors.probs == dump.sequences[i].probs);
  }
  CHECK(sel.result.win_counts == std::vector<int>{static_cast<int>(dump.sequences.size())});
}

TEST_CASE("pipeline: rows, resume, report and win counts") {
  testutil::TempDir dir("pipeline");
  const ExperimentConfig cfg =
      BuildConfig(TinyConfig(3, {"teacher_average", "framewise_max", "elitist"}));
  std::ostringstream log;
  const ResultTable table = RunPipeline(cfg, dir.path(), &log);
  for (const auto &c : table.cells()) CHECK_FALSE(c.failed);
  int student_rows = 0;
  for (const auto &c : table.cells())
    if (c.model.rfind("student-", 0) == 0 && c.model != "student-original" && !c.lm) ++student_rows;
  CHECK(student_rows == 3);
  CHECK(table.Has(1, "target.test", "student-original", true));
  CHECK(table.Has(1, "alpha.test", "teacher-alpha", false));
  CHECK(table.Has(1, "target.test", "teacher-gamma", true));
  CHECK(fs::exists(dir / "results.tsv"));
  CHECK(fs::exists(dir / "results.txt"));

  Experiment exp(cfg, dir.path());
  CHECK(exp.Collect() == table);
  CHECK(exp.WriteReport() == table);

  // win counts cover every selected utterance
  const SelectionFile sel = LoadSelectionFile(exp.SelectionPath(1, Strategy::kElitist));
  int wins = 0;
  for (int w : sel.result.win_counts) wins += w;
  CHECK(wins + static_cast<int>(sel.result.skipped.size()) == cfg.student.train_utterances);
  CHECK(exp.WinCountReport().find("(skipped)") != std::string::npos);

  // delete a downstream artifact and resume: only that work is redone
  const std::string student = exp.ModelPath(1, "student-elitist");
  const std::string cell = exp.CellPath(1, "student-elitist", "target.test", true);
  const auto teacher_time = fs::last_write_time(exp.ModelPath(1, "teacher-alpha"));
  fs::remove(student);
  fs::remove(cell);
  CHECK(exp.Collect().At(1, "target.test", "student-elitist", true).failed);
  exp.RunSeed(1);
  CHECK(fs::exists(student));
  CHECK(fs::last_write_time(exp.ModelPath(1, "teacher-alpha")) == teacher_time);
  CHECK(exp.WriteReport() == table);

  // evaluate with the LM on or off writes only those cells
  fs::remove(exp.CellPath(1, "student-framewise_max", "target.test", false));
  fs::remove(exp.CellPath(1, "student-framewise_max", "target.test", true));
  exp.Evaluate(1, LmMode::kOn);
  CHECK(fs::exists(exp.CellPath(1, "student-framewise_max", "target.test", true)));
  CHECK_FALSE(fs::exists(exp.CellPath(1, "student-framewise_max", "target.test", false)));
  exp.Evaluate(1, LmMode::kOff);
  CHECK(exp.WriteReport() == table);

  // a missing input names the file
  fs::remove(exp.PosteriorPath(1, "beta"));
  try {
    exp.Select(1, Strategy::kTeacherAverage, true);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find(exp.PosteriorPath(1, "beta")) != std::string::npos);
  }
}

TEST_CASE("command line") {
  const char *cli = std::getenv("EKD_CLI");
  if (!cli) {
    MESSAGE("EKD_CLI not set; skipping");
    return;
  }
  testutil::TempDir dir("cli");
  std::ofstream(dir / "cfg.json") << TinyConfig(2, {"elitist"}).dump();
  const std::string base = std::string(cli) + " ";
  const std::string common = " --config " + dir / "cfg.json" + " --out " + dir / "run" + " -q";
  auto run = [&](const std::string &args) {
    const std::string cmd = base + args + " > " + dir / "stdout.txt" + " 2> " + dir / "stderr.txt";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  CHECK(run("default-config") == 0);
  CHECK(json::parse(ReadFile(dir / "stdout.txt")).contains("teachers"));
  CHECK(run("gen-data" + common) == 0);
  CHECK(run("train-teacher" + common) == 0);
  CHECK(run("train-lm" + common) == 0);
  CHECK(run("decode" + common) == 0);
  CHECK(run("select --strategy elitist" + common) == 0);
  CHECK(run("train-student" + common) == 0);
  CHECK(run("evaluate --lm both" + common) == 0);
  CHECK(run("svcca" + common) == 0);
  CHECK(run("report --win-counts --svcca" + common) == 0);
  const std::string report = ReadFile(dir / "stdout.txt");
  CHECK(report.find("student-elitist") != std::string::npos);
  CHECK(report.find("(skipped)") != std::string::npos);
  // config.json in the run directory is picked up without --config
  CHECK(run("report --out " + dir / "run" + " -q") == 0);
  CHECK(ReadFile(dir / "stdout.txt") == report.substr(0, ReadFile(dir / "stdout.txt").size()));

  fs::remove(dir / "run/seed-1/decode/alpha.ekdp");
  CHECK(run("select --force" + common) == 2);
  CHECK(ReadFile(dir / "stderr.txt").find("alpha.ekdp") != std::string::npos);
  CHECK(run("evaluate --lm sideways" + common) != 0);
}
