// ekd/tests/oracles/oracles.h
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

#ifndef EKD_TESTS_ORACLES_H_
#define EKD_TESTS_ORACLES_H_

// Brute-force reference implementations for tests. Nothing here calls into
// the library; only the matrix type is shared.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Sum over all z^T frame paths whose collapse equals `target`. Throws
// std::invalid_argument when z^T > 1e7.
double BruteCtcProb(const Mat &probs, const std::vector<int> &target, int blank);

std::vector<int> Collapse(const std::vector<int> &path, int blank);

// Canonical correlations for d_a, d_b <= 3 from the eigenvalues of
// Saa^-1 Sab Sbb^-1 Sba (cofactor inverses, closed-form characteristic
// roots). Throws std::invalid_argument for larger inputs or a singular
// covariance.
std::vector<double> BruteCca(const Mat &a, const Mat &b);

// Plain recursion over (i, j) suffixes with a memo table.
int BruteEditDistance(const std::vector<std::string> &r, const std::vector<std::string> &h);

struct ExhaustiveResult {
  std::vector<int> labels;
  double acoustic = 0.0;  // ln of the best path for `labels`
  double score = 0.0;     // acoustic + extra(labels)
};

// Enumerates all z^T paths, keeps the best path per collapsed labelling and
// returns the labelling maximising best-path log prob + extra(labels).
ExhaustiveResult ExhaustiveDecode(const Mat &probs, int blank,
                                  const std::function<double(const std::vector<int> &)> &extra);

// Sum_t Sum_g p log(p / max(q, 1e-12)), skipping p == 0.
double NaiveKl(const Mat &p, const Mat &q);

Mat NaiveAverage(const std::vector<Mat> &teachers);

struct ElitistOracle {
  std::vector<double> scores;
  int winner = 0;
};

// Pass one greedy-decodes each frame (first maximal index); pass two averages
// the posteriors of the decoded labels. Winner is the first maximal score.
ElitistOracle TwoPassElitist(const std::vector<Mat> &teachers);

}  // namespace oracle

#endif  // EKD_TESTS_ORACLES_H_
