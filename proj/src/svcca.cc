// ekd/src/svcca.cc
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

#include "ekd/svcca.h"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace ekd {

namespace {

Matrix Centered(const Matrix &m) {
  Matrix c = m;
  c.rowwise() -= m.colwise().mean();
  return c;
}

// Orthonormal basis of the column space of centred data. Directions with a
// singular value below 1e-10 of the largest count as rank deficiency.
Matrix ColumnBasis(const Matrix &centered, const std::string &which) {
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU);
  const Vector s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0)) throw Error("degenerate activations for " + which);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > 1e-10 * s(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

const ActivationMatrix *FindLayer(const std::vector<ActivationMatrix> &v, const std::string &name) {
  for (const auto &m : v)
    if (m.layer_name == name) return &m;
  return nullptr;
}

// Identical activations correlate perfectly; skip the numerics.
double MeanRho(const ActivationMatrix &x, const ActivationMatrix &y, double variance_fraction) {
  if (x.data.rows() == y.data.rows() && x.data.cols() == y.data.cols() && x.data == y.data)
    return 1.0;
  return Svcca(x, y, variance_fraction).mean_rho;
}

}  // namespace

ActivationMatrix SvdPrune(const ActivationMatrix &acts, double variance_fraction) {
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
    throw Error("variance_fraction must be in (0, 1]");
  if (!acts.data.allFinite()) throw Error("non-finite activations in " + acts.layer_name);
  const Matrix centered = Centered(acts.data);
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector s = svd.singularValues();
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) total += s(i) * s(i);
  if (!(total > 0.0)) throw Error("all-zero activation matrix for " + acts.layer_name);
  Eigen::Index keep = s.size();
  double cum = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    cum += s(i) * s(i);
    if (cum >= variance_fraction * total) {
      keep = i + 1;
      break;
    }
  }
  ActivationMatrix out = acts;
  out.data = centered * svd.matrixV().leftCols(keep);
  return out;
}

SvccaResult Cca(const ActivationMatrix &a, const ActivationMatrix &b) {
  const Eigen::Index n = a.data.rows();
  if (b.data.rows() != n) throw Error("CCA inputs have different numbers of data points");
  if (n < 2) throw Error("CCA needs at least two data points");
  // Canonical correlations are the cosines of the principal angles between
  // the two column spaces.
  const Matrix qa = ColumnBasis(Centered(a.data), a.layer_name);
  const Matrix qb = ColumnBasis(Centered(b.data), b.layer_name);
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  SvccaResult r;
  const Vector s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i)
    r.canonical_correlations.push_back(std::clamp(s(i), 0.0, 1.0));
  std::sort(r.canonical_correlations.begin(), r.canonical_correlations.end(), std::greater<>());
  double sum = 0.0;
  for (double c : r.canonical_correlations) sum += c;
  r.mean_rho = r.canonical_correlations.empty() ? 0.0 : sum / r.canonical_correlations.size();
  r.kept_dims = {static_cast<int>(a.data.cols()), static_cast<int>(b.data.cols())};
  return r;
}

SvccaResult Svcca(const ActivationMatrix &a, const ActivationMatrix &b, double variance_fraction) {
  return Cca(SvdPrune(a, variance_fraction), SvdPrune(b, variance_fraction));
}

double SvccaReport::MeanDifference(const std::string &layer) const {
  double sum = 0.0;
  int n = 0;
  for (const auto &r : rows)
    if (r.layer == layer) {
      sum += r.difference;
      ++n;
    }
  return n ? sum / n : 0.0;
}

std::string SvccaReport::ToTsv() const {
  std::ostringstream os;
  os.precision(17);
  os << "layer\tstep\tmetric\tvalue\n";
  for (const auto &r : rows) {
    os << r.layer << '\t' << r.step << "\trho_a\t" << r.rho_a << '\n';
    os << r.layer << '\t' << r.step << "\trho_b\t" << r.rho_b << '\n';
    os << r.layer << '\t' << r.step << "\tcross_rho\t" << r.cross_rho << '\n';
    os << r.layer << '\t' << r.step << "\tdifference\t" << r.difference << '\n';
  }
  return os.str();
}

SvccaReport CorrelationTrajectory(const RunActivations &a, const RunActivations &b,
                                  const std::vector<std::string> &layers,
                                  double variance_fraction) {
  SvccaReport report;
  if (a.steps.empty() || b.steps.empty()) {
    report.warnings.push_back("a run has no checkpoints");
    return report;
  }
  std::set<int> common;
  for (const auto &[step, acts] : a.steps) {
    if (b.steps.count(step))
      common.insert(step);
    else
      report.warnings.push_back("step " + std::to_string(step) + " missing from " + b.run_name);
  }
  for (const auto &[step, acts] : b.steps)
    if (!a.steps.count(step))
      report.warnings.push_back("step " + std::to_string(step) + " missing from " + a.run_name);
  const auto &final_a = a.steps.rbegin()->second;
  const auto &final_b = b.steps.rbegin()->second;

  for (const auto &layer : layers) {
    const ActivationMatrix *fa = FindLayer(final_a, layer);
    const ActivationMatrix *fb = FindLayer(final_b, layer);
    if (!fa || !fb) {
      report.warnings.push_back("layer " + layer + " missing from final checkpoint");
      continue;
    }
    for (int step : common) {
      const ActivationMatrix *sa = FindLayer(a.steps.at(step), layer);
      const ActivationMatrix *sb = FindLayer(b.steps.at(step), layer);
      if (!sa || !sb) {
        report.warnings.push_back("layer " + layer + " missing at step " + std::to_string(step));
        continue;
      }
      TrajectoryRow row;
      row.layer = layer;
      row.step = step;
      row.rho_a = MeanRho(*sa, *fa, variance_fraction);
      row.rho_b = MeanRho(*sb, *fb, variance_fraction);
      row.cross_rho = MeanRho(*sa, *sb, variance_fraction);
      row.difference = 1.0 - row.cross_rho;
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace ekd
