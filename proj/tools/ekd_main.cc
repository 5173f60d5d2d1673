// ekd/tools/ekd_main.cc
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

// Command-line front end for the experiment pipeline.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ekd/pipeline.h"

namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> overrides;
  bool allow_indomain = false;
  bool force = false;
  bool quiet = false;
};

void AddCommon(CLI::App *cmd, Common &c) {
  cmd->add_option("--config", c.config_path, "Experiment config (JSON, comments allowed)");
  cmd->add_option("--out", c.out, "Run directory (default: config output_dir)");
  cmd->add_option("--seed", c.seeds, "Restrict to these seeds (repeatable)");
  cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set beam.beam_width=8");
  cmd->add_flag("--allow-indomain", c.allow_indomain,
                "Allow a student domain that matches a teacher domain");
  cmd->add_flag("--force", c.force, "Recompute outputs that already exist");
  cmd->add_flag("-q,--quiet", c.quiet, "Suppress progress output");
}

// Config precedence: --config file, else the run directory's config.json,
// else the built-in defaults; --set and --allow-indomain apply last.
ekd::ExperimentConfig ResolveConfig(const Common &c) {
  std::vector<std::string> overrides = c.overrides;
  if (c.allow_indomain) overrides.push_back("allow_indomain=true");
  if (!c.config_path.empty()) return ekd::LoadConfigFile(c.config_path, overrides);
  if (!c.out.empty()) {
    ekd::ExperimentConfig probe = ekd::BuildConfig(nlohmann::json::object());
    const std::string saved = ekd::ResolveRunDir(probe, c.out) + "/config.json";
    if (std::filesystem::exists(saved)) return ekd::LoadConfigFile(saved, overrides);
  }
  return ekd::BuildConfig(
      ekd::ApplyOverrides(ekd::DefaultConfigJson(), overrides));
}

std::vector<std::uint64_t> Seeds(const Common &c, const ekd::ExperimentConfig &cfg) {
  return c.seeds.empty() ? cfg.seeds : c.seeds;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Ensemble knowledge distillation for CTC models"};
  app.require_subcommand(1);
  Common c;
  std::string strategy_name;
  std::string teacher;
  std::string lm_mode = "both";
  bool win_counts = false;
  bool svcca_summary = false;

  auto *gen = app.add_subcommand("gen-data", "Generate teacher and student corpora");
  auto *tt = app.add_subcommand("train-teacher", "Train teachers and apply the quality gate");
  tt->add_option("--teacher", teacher, "Only this teacher");
  auto *lm = app.add_subcommand("train-lm", "Train the word n-gram LM on teacher transcripts");
  auto *dec = app.add_subcommand("decode", "Teacher posteriors on the unlabeled student split");
  auto *sel = app.add_subcommand("select", "Run a selection strategy over teacher posteriors");
  sel->add_option("--strategy", strategy_name,
                  "elitist | teacher_average | framewise_max (default: all configured)");
  auto *ts = app.add_subcommand("train-student", "Train students from selections");
  ts->add_option("--strategy", strategy_name, "Only this strategy");
  auto *ev = app.add_subcommand("evaluate", "Score every model on its test sets");
  ev->add_option("--lm", lm_mode, "on | off | both")->check(CLI::IsMember({"on", "off", "both"}));
  auto *sv = app.add_subcommand("svcca", "Layer-wise SVCCA of original-label vs pseudo-label student");
  auto *rep = app.add_subcommand("report", "Collect results of a run directory");
  rep->add_flag("--win-counts", win_counts, "Also print elitist win counts per teacher");
  rep->add_flag("--svcca", svcca_summary, "Also print mean SVCCA difference per layer");
  auto *run = app.add_subcommand("run", "Run the whole pipeline");
  auto *def = app.add_subcommand("default-config", "Print the default config");
  for (auto *cmd : {gen, tt, lm, dec, sel, ts, ev, sv, rep, run}) AddCommon(cmd, c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (def->parsed()) {
      std::cout << ekd::DefaultConfigJson().dump(2) << "\n";
      return 0;
    }
    const ekd::ExperimentConfig cfg = ResolveConfig(c);
    cfg.Validate();
    std::ostream *log = c.quiet ? nullptr : &std::cerr;
    ekd::Experiment exp(cfg, ekd::ResolveRunDir(cfg, c.out), log);
    const auto seeds = Seeds(c, cfg);
    std::vector<ekd::Strategy> strategies = cfg.strategies;
    if (!strategy_name.empty()) strategies = {ekd::ParseStrategy(strategy_name)};

    auto each_seed = [&](const std::string &stage, auto &&fn) {
      for (std::uint64_t s : seeds) {
        try {
          fn(s);
        } catch (const ekd::StageError &) {
          throw;
        } catch (const std::exception &e) {
          throw ekd::StageError(stage + " (seed " + std::to_string(s) + ")", e.what());
        }
      }
    };

    if (run->parsed()) {
      exp.WriteConfig();
      for (std::uint64_t s : seeds) exp.RunSeed(s);
      std::cout << exp.WriteReport().ToText();
    } else if (gen->parsed()) {
      exp.WriteConfig();
      each_seed("gen-data", [&](std::uint64_t s) { exp.GenData(s, c.force); });
    } else if (tt->parsed()) {
      each_seed("train-teacher", [&](std::uint64_t s) {
        if (teacher.empty())
          exp.TrainTeachers(s, c.force);
        else
          exp.TrainTeacher(s, cfg.Teacher(teacher).spec.name, c.force);
      });
    } else if (lm->parsed()) {
      each_seed("train-lm", [&](std::uint64_t s) { exp.TrainLm(s, c.force); });
    } else if (dec->parsed()) {
      each_seed("decode", [&](std::uint64_t s) { exp.Decode(s, c.force); });
    } else if (sel->parsed()) {
      each_seed("select", [&](std::uint64_t s) {
        for (auto st : strategies) std::cout << exp.Select(s, st, c.force).result.outcomes.size()
                                              << " selections (" << ekd::ToString(st) << ", seed "
                                              << s << ")\n";
      });
    } else if (ts->parsed()) {
      each_seed("train-student", [&](std::uint64_t s) {
        for (auto st : strategies) exp.TrainStudent(s, st, c.force);
        if (strategy_name.empty()) exp.TrainReference(s, c.force);
      });
    } else if (ev->parsed()) {
      each_seed("evaluate",
                [&](std::uint64_t s) { exp.Evaluate(s, ekd::ParseLmMode(lm_mode), c.force); });
    } else if (sv->parsed()) {
      each_seed("svcca", [&](std::uint64_t s) { exp.Svcca(s, c.force); });
      std::cout << exp.SvccaSummary();
    } else if (rep->parsed()) {
      std::cout << exp.WriteReport().ToText();
      if (win_counts) std::cout << "\n" << exp.WinCountReport();
      if (svcca_summary) std::cout << "\n" << exp.SvccaSummary();
    }
  } catch (const ekd::StageError &e) {
    std::cerr << "error: " << e.what() << "\n(completed stages are kept; re-run to resume)\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
