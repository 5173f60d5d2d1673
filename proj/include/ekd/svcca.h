// ekd/include/ekd/svcca.h
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

#ifndef EKD_SVCCA_H_
#define EKD_SVCCA_H_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ekd/types.h"

namespace ekd {

// Activations of one layer at N paired data points (frames).
struct ActivationMatrix {
  std::string layer_name;
  Matrix data;  // N x d
  std::string model_id;
  int checkpoint_step = 0;
};

struct SvccaResult {
  std::vector<double> canonical_correlations;  // descending, in [0,1]
  double mean_rho = 0.0;
  std::pair<int, int> kept_dims{0, 0};
};

// Mean-centres every column, then projects onto the fewest leading singular
// directions whose squared singular values reach `variance_fraction` of the
// total. Throws Error for an all-zero (after centring) matrix or a fraction
// outside (0, 1].
ActivationMatrix SvdPrune(const ActivationMatrix &acts, double variance_fraction = 0.99);

// Canonical correlations between the columns of a and b: singular values of
// Qa^T Qb, with Qa, Qb orthonormal bases of the centred columns. Returns
// min(rank_a, rank_b) correlations, where directions below 1e-10 of the
// largest singular value do not count. Throws Error when N < 2, the row
// counts differ or an input is constant.
SvccaResult Cca(const ActivationMatrix &a, const ActivationMatrix &b);

// SvdPrune on both inputs followed by Cca.
SvccaResult Svcca(const ActivationMatrix &a, const ActivationMatrix &b,
                  double variance_fraction = 0.99);

// Activation dumps of one training run: (checkpoint step, one matrix per layer).
struct RunActivations {
  std::string run_name;
  std::map<int, std::vector<ActivationMatrix>> steps;
};

struct TrajectoryRow {
  std::string layer;
  int step = 0;
  double rho_a = 0.0;       // run a at step vs run a at its final step
  double rho_b = 0.0;       // run b at step vs run b at its final step
  double cross_rho = 0.0;   // run a vs run b at the same step
  double difference = 0.0;  // 1 - cross_rho
};

struct SvccaReport {
  std::vector<TrajectoryRow> rows;  // layer-major, steps ascending
  std::vector<std::string> warnings;

  // Mean of `difference` over steps for one layer.
  double MeanDifference(const std::string &layer) const;
  // One line per (layer, step, metric): "layer\tstep\tmetric\tvalue".
  std::string ToTsv() const;
};

// Layer-wise SVCCA through training for two runs sampled on the same frames.
// Steps present in only one run are skipped with a warning.
SvccaReport CorrelationTrajectory(const RunActivations &a, const RunActivations &b,
                                  const std::vector<std::string> &layers,
                                  double variance_fraction = 0.99);

}  // namespace ekd

#endif  // EKD_SVCCA_H_
