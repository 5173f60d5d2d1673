// ekd/src/artifacts.cc
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

#include "ekd/artifacts.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

#include "ekd/binary_io.h"

namespace ekd {

namespace {

constexpr int kArtifactVersion = 1;

void Header(ByteWriter &w, const std::string &magic, const std::vector<std::string> &lines) {
  w.Raw(magic + "\n");
  w.Raw("version " + std::to_string(kArtifactVersion) + "\n");
  for (const auto &l : lines) w.Raw(l + "\n");
  w.Raw("end_header\n");
}

std::string Value(ByteReader &r, const std::string &key) {
  const std::string line = r.Line();
  if (line.rfind(key + " ", 0) != 0) throw FormatError("corrupted record: expected " + key);
  return line.substr(key.size() + 1);
}

void ExpectHeader(ByteReader &r, const std::string &magic) {
  if (r.Line() != magic) throw FormatError("not a " + magic + " file");
  if (Value(r, "version") != std::to_string(kArtifactVersion)) throw FormatError("version mismatch");
}

void WriteMatrix(ByteWriter &w, const Matrix &m) {
  w.U32(static_cast<std::uint32_t>(m.rows()));
  w.U32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) w.F64(m.data()[i]);
}

Matrix ReadMatrix(ByteReader &r) {
  const std::uint32_t rows = r.U32(), cols = r.U32();
  if (static_cast<std::uint64_t>(rows) * cols > r.remaining() / 8)
    throw FormatError("corrupted record");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.F64();
  return m;
}

std::size_t ParseCount(const std::string &s) {
  try {
    return std::stoull(s);
  } catch (const std::logic_error &) {
    throw FormatError("corrupted record");
  }
}

}  // namespace

void SavePosteriorDump(const PosteriorDump &dump, const std::string &path) {
  ByteWriter w;
  Header(w, "EKD-POSTERIORS",
         {"teacher " + dump.teacher, "vocabulary_hash " + dump.vocabulary_hash,
          "count " + std::to_string(dump.sequences.size())});
  for (const auto &p : dump.sequences) {
    ByteWriter r;
    r.Str(p.utterance_id);
    WriteMatrix(r, p.probs);
    w.Record(r);
  }
  WriteFileAtomic(path, w.bytes());
}

PosteriorDump LoadPosteriorDump(const std::string &path) {
  const auto bytes = ReadFileBytes(path);
  ByteReader r(bytes);
  ExpectHeader(r, "EKD-POSTERIORS");
  PosteriorDump d;
  d.teacher = Value(r, "teacher");
  d.vocabulary_hash = Value(r, "vocabulary_hash");
  const std::size_t n = ParseCount(Value(r, "count"));
  if (r.Line() != "end_header") throw FormatError("corrupted record");
  for (std::size_t i = 0; i < n; ++i) {
    ByteReader rec = r.Record();
    PosteriorSequence p;
    p.utterance_id = rec.Str();
    p.probs = ReadMatrix(rec);
    if (!rec.done()) throw FormatError("corrupted record");
    d.sequences.push_back(std::move(p));
  }
  if (!r.done()) throw FormatError("corrupted record");
  return d;
}

void SaveSelectionFile(const SelectionFile &file, const std::string &path) {
  std::string teachers;
  for (const auto &t : file.teacher_names) teachers += (teachers.empty() ? "" : " ") + t;
  std::string wins;
  for (int c : file.result.win_counts) wins += (wins.empty() ? "" : " ") + std::to_string(c);
  ByteWriter w;
  Header(w, "EKD-SELECTION",
         {"strategy " + ToString(file.result.strategy), "vocabulary_hash " + file.vocabulary_hash,
          "teachers " + teachers, "win_counts " + (wins.empty() ? "-" : wins),
          "count " + std::to_string(file.result.outcomes.size()),
          "skipped " + std::to_string(file.result.skipped.size())});
  for (const auto &o : file.result.outcomes) {
    ByteWriter r;
    r.Str(o.utterance_id);
    r.I32(o.winning_teacher.value_or(-1));
    r.F64Seq(o.per_teacher_scores);
    r.IntSeq(o.pseudo_transcript);
    r.F64(o.sequence_confidence);
    WriteMatrix(r, o.selected_posteriors.probs);
    w.Record(r);
  }
  for (const auto &[id, reason] : file.result.skipped) {
    ByteWriter r;
    r.Str(id);
    r.Str(reason);
    w.Record(r);
  }
  WriteFileAtomic(path, w.bytes());
}

SelectionFile LoadSelectionFile(const std::string &path) {
  const auto bytes = ReadFileBytes(path);
  ByteReader r(bytes);
  ExpectHeader(r, "EKD-SELECTION");
  SelectionFile f;
  try {
    f.result.strategy = ParseStrategy(Value(r, "strategy"));
  } catch (const ConfigError &) {
    throw FormatError("corrupted record: strategy");
  }
  f.vocabulary_hash = Value(r, "vocabulary_hash");
  {
    std::istringstream ts(Value(r, "teachers"));
    for (std::string t; ts >> t;) f.teacher_names.push_back(t);
  }
  {
    const std::string wins = Value(r, "win_counts");
    if (wins != "-") {
      std::istringstream ws(wins);
      for (int c; ws >> c;) f.result.win_counts.push_back(c);
    }
  }
  const std::size_t n = ParseCount(Value(r, "count"));
  const std::size_t skipped = ParseCount(Value(r, "skipped"));
  if (r.Line() != "end_header") throw FormatError("corrupted record");
  for (std::size_t i = 0; i < n; ++i) {
    ByteReader rec = r.Record();
    SelectionOutcome o;
    o.strategy = f.result.strategy;
    o.utterance_id = rec.Str();
    const int win = rec.I32();
    if (win >= 0) o.winning_teacher = win;
    o.per_teacher_scores = rec.F64Seq();
    o.pseudo_transcript = rec.IntSeq();
    o.sequence_confidence = rec.F64();
    o.selected_posteriors = {ReadMatrix(rec), o.utterance_id};
    if (!rec.done()) throw FormatError("corrupted record");
    f.result.outcomes.push_back(std::move(o));
  }
  for (std::size_t i = 0; i < skipped; ++i) {
    ByteReader rec = r.Record();
    std::string id = rec.Str();
    std::string reason = rec.Str();
    f.result.skipped.emplace_back(std::move(id), std::move(reason));
  }
  if (!r.done()) throw FormatError("corrupted record");
  return f;
}

std::string SelectionSummary(const SelectionFile &file) {
  std::ostringstream os;
  os << "strategy\t" << ToString(file.result.strategy) << "\n";
  os << "selected\t" << file.result.outcomes.size() << "\n";
  os << "skipped\t" << file.result.skipped.size() << "\n";
  for (std::size_t k = 0; k < file.result.win_counts.size(); ++k) {
    const std::string name =
        k < file.teacher_names.size() ? file.teacher_names[k] : "teacher" + std::to_string(k);
    os << "wins\t" << name << "\t" << file.result.win_counts[k] << "\n";
  }
  return os.str();
}

void SaveActivations(const ActivationMatrix &acts, const FrameSample &sample,
                     const std::string &path) {
  if (static_cast<std::size_t>(acts.data.rows()) != sample.frames.size())
    throw Error("activation rows do not match frame sample");
  ByteWriter w;
  Header(w, "EKD-ACTIVATIONS",
         {"layer " + acts.layer_name, "model " + (acts.model_id.empty() ? "-" : acts.model_id),
          "step " + std::to_string(acts.checkpoint_step),
          "shape " + std::to_string(acts.data.rows()) + " " + std::to_string(acts.data.cols())});
  ByteWriter frames;
  frames.U64(sample.frames.size());
  for (const auto &[u, t] : sample.frames) {
    frames.I32(u);
    frames.I32(t);
  }
  w.Record(frames);
  ByteWriter data;
  WriteMatrix(data, acts.data);
  w.Record(data);
  WriteFileAtomic(path, w.bytes());
}

ActivationMatrix LoadActivations(const std::string &path, FrameSample *sample) {
  const auto bytes = ReadFileBytes(path);
  ByteReader r(bytes);
  ExpectHeader(r, "EKD-ACTIVATIONS");
  ActivationMatrix a;
  a.layer_name = Value(r, "layer");
  a.model_id = Value(r, "model");
  if (a.model_id == "-") a.model_id.clear();
  a.checkpoint_step = static_cast<int>(ParseCount(Value(r, "step")));
  std::size_t rows = 0, cols = 0;
  {
    std::istringstream ss(Value(r, "shape"));
    if (!(ss >> rows >> cols)) throw FormatError("corrupted record");
  }
  if (r.Line() != "end_header") throw FormatError("corrupted record");
  ByteReader fr = r.Record();
  const std::uint64_t n = fr.U64();
  FrameSample s;
  for (std::uint64_t i = 0; i < n; ++i) {
    const int u = fr.I32();
    const int t = fr.I32();
    s.frames.emplace_back(u, t);
  }
  ByteReader dr = r.Record();
  a.data = ReadMatrix(dr);
  if (static_cast<std::size_t>(a.data.rows()) != rows ||
      static_cast<std::size_t>(a.data.cols()) != cols || n != rows || !r.done())
    throw FormatError("corrupted record");
  if (sample) *sample = std::move(s);
  return a;
}

namespace {

auto Key(const ResultCell &c) { return std::tie(c.seed, c.test_set, c.model, c.lm); }

}  // namespace

void ResultTable::Add(ResultCell cell) {
  auto it = std::lower_bound(cells_.begin(), cells_.end(), cell,
                             [](const ResultCell &a, const ResultCell &b) { return Key(a) < Key(b); });
  if (it != cells_.end() && Key(*it) == Key(cell))
    *it = std::move(cell);
  else
    cells_.insert(it, std::move(cell));
}

bool ResultTable::Has(std::uint64_t seed, const std::string &test_set, const std::string &model,
                      bool lm) const {
  for (const auto &c : cells_)
    if (c.seed == seed && c.test_set == test_set && c.model == model && c.lm == lm) return true;
  return false;
}

const ResultCell &ResultTable::At(std::uint64_t seed, const std::string &test_set,
                                  const std::string &model, bool lm) const {
  for (const auto &c : cells_)
    if (c.seed == seed && c.test_set == test_set && c.model == model && c.lm == lm) return c;
  throw Error("no result for " + model + " on " + test_set);
}

std::pair<double, double> ResultTable::MeanStd(const std::string &test_set,
                                               const std::string &model, bool lm) const {
  std::vector<double> v;
  for (const auto &c : cells_)
    if (c.test_set == test_set && c.model == model && c.lm == lm && !c.failed)
      v.push_back(c.wer.wer);
  if (v.empty()) return {std::nan(""), std::nan("")};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  return {mean, sd};
}

std::string ResultTable::ToText() const {
  std::size_t wt = 8, wm = 5;
  for (const auto &c : cells_) {
    wt = std::max(wt, c.test_set.size());
    wm = std::max(wm, c.model.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(6) << "seed" << "  " << std::setw(wt) << "test_set" << "  "
     << std::setw(wm) << "model" << "  " << std::setw(4) << "lm" << "  " << std::right
     << std::setw(8) << "WER(%)" << "\n";
  for (const auto &c : cells_) {
    os << std::left << std::setw(6) << c.seed << "  " << std::setw(wt) << c.test_set << "  "
       << std::setw(wm) << c.model << "  " << std::setw(4) << (c.lm ? "on" : "off") << "  "
       << std::right << std::setw(8);
    if (c.failed)
      os << "FAILED";
    else
      os << std::fixed << std::setprecision(2) << 100.0 * c.wer.wer;
    os << "\n";
  }
  // Summary over seeds.
  std::set<std::tuple<std::string, std::string, bool>> keys;
  for (const auto &c : cells_) keys.emplace(c.test_set, c.model, c.lm);
  os << "\n" << std::left << std::setw(wt) << "test_set" << "  " << std::setw(wm) << "model"
     << "  " << std::setw(4) << "lm" << "  " << std::right << std::setw(8) << "mean(%)" << "  "
     << std::setw(8) << "std(%)" << "\n";
  for (const auto &[test, model, lm] : keys) {
    const auto [mean, sd] = MeanStd(test, model, lm);
    os << std::left << std::setw(wt) << test << "  " << std::setw(wm) << model << "  "
       << std::setw(4) << (lm ? "on" : "off") << "  " << std::right << std::fixed
       << std::setprecision(2) << std::setw(8) << 100.0 * mean << "  " << std::setw(8)
       << 100.0 * sd << "\n";
  }
  return os.str();
}

std::string ResultTable::ToTsv() const {
  std::ostringstream os;
  os << "seed\ttest_set\tmodel\tlm\tS\tI\tD\tN\twer\tstatus\n";
  for (const auto &c : cells_) {
    char wer[64];
    std::snprintf(wer, sizeof wer, "%.17g", c.wer.wer);
    os << c.seed << '\t' << c.test_set << '\t' << c.model << '\t' << (c.lm ? "on" : "off") << '\t'
       << c.wer.substitutions << '\t' << c.wer.insertions << '\t' << c.wer.deletions << '\t'
       << c.wer.reference_words << '\t' << wer << '\t' << (c.failed ? "failed" : "ok") << '\n';
  }
  return os.str();
}

ResultTable ResultTable::FromTsv(const std::string &text) {
  ResultTable t;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  if (line.rfind("seed\t", 0) != 0) throw FormatError("not a result table");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ResultCell c;
    std::string lm, wer, status;
    std::getline(ls, lm, '\t');
    c.seed = std::stoull(lm);
    std::getline(ls, c.test_set, '\t');
    std::getline(ls, c.model, '\t');
    std::getline(ls, lm, '\t');
    c.lm = lm == "on";
    if (!(ls >> c.wer.substitutions >> c.wer.insertions >> c.wer.deletions >>
          c.wer.reference_words >> wer >> status))
      throw FormatError("bad result row: " + line);
    c.failed = status == "failed";
    c.wer.wer = std::strtod(wer.c_str(), nullptr);
    c.wer.defined = c.wer.reference_words > 0 || c.wer.errors() == 0;
    t.Add(std::move(c));
  }
  return t;
}

}  // namespace ekd
