// ekd/src/ctc.cc
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

#include "ekd/ctc.h"

#include <cmath>
#include <limits>
#include <vector>

namespace ekd {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

void CheckFinite(const Matrix &m, const char *what) {
  if (!m.allFinite()) throw Error(std::string("non-finite values in ") + what);
}

}  // namespace

double LogAdd(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

Matrix LogSoftmax(const Matrix &logits, double temperature) {
  if (!(temperature > 0)) throw Error("temperature must be positive");
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const RowVector scaled = logits.row(t) / temperature;
    const double mx = scaled.maxCoeff();
    const double lse = mx + std::log((scaled.array() - mx).exp().sum());
    out.row(t) = scaled.array() - lse;
  }
  return out;
}

PosteriorSequence Softmax(const LogitSequence &logits, double temperature) {
  CheckFinite(logits.values, "logits");
  return {LogSoftmax(logits.values, temperature).array().exp().matrix(), logits.utterance_id};
}

void PosteriorSequence::Validate(double tol) const {
  if (probs.rows() < 1 || probs.cols() < 1) throw Error("empty posterior sequence");
  if (!probs.allFinite()) throw Error("non-finite posteriors");
  if ((probs.array() < 0.0).any() || (probs.array() > 1.0).any())
    throw Error("posterior outside [0,1]");
  for (Eigen::Index t = 0; t < probs.rows(); ++t)
    if (std::abs(probs.row(t).sum() - 1.0) > tol) throw Error("posterior row not normalized");
}

int MinFramesForTarget(std::span<const int> target) {
  int n = static_cast<int>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

CtcLossResult CtcLoss(const Matrix &log_probs, std::span<const int> target, int blank) {
  const int T = static_cast<int>(log_probs.rows());
  const int z = static_cast<int>(log_probs.cols());
  if (T < 1) throw Error("empty input sequence");
  if (target.empty()) throw Error("empty target");
  if (log_probs.array().isNaN().any()) throw Error("NaN in log-probabilities");
  for (int l : target)
    if (l < 0 || l >= z || l == blank) throw Error("invalid target label");
  if (T < MinFramesForTarget(target)) throw Error("infeasible target");

  // Extended label sequence: blank, l1, blank, l2, ..., blank.
  const int S = 2 * static_cast<int>(target.size()) + 1;
  std::vector<int> ext(S, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto can_skip = [&](int s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  Matrix alpha = Matrix::Constant(T, S, kLogZero);
  Matrix beta = Matrix::Constant(T, S, kLogZero);

  alpha(0, 0) = log_probs(0, ext[0]);
  if (S > 1) alpha(0, 1) = log_probs(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = LogAdd(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = LogAdd(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kLogZero ? kLogZero : a + log_probs(t, ext[s]);
    }
  }

  // beta(t, s): log-probability of emitting frames t+1..T-1 given state s at t.
  beta(T - 1, S - 1) = 0.0;
  beta(T - 1, S - 2) = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double b = beta(t + 1, s) + log_probs(t + 1, ext[s]);
      if (s + 1 < S) b = LogAdd(b, beta(t + 1, s + 1) + log_probs(t + 1, ext[s + 1]));
      if (s + 2 < S && can_skip(s + 2))
        b = LogAdd(b, beta(t + 1, s + 2) + log_probs(t + 1, ext[s + 2]));
      beta(t, s) = b;
    }
  }

  const double log_likelihood = LogAdd(alpha(T - 1, S - 1), alpha(T - 1, S - 2));
  if (!std::isfinite(log_likelihood)) throw Error("infeasible target");

  CtcLossResult result;
  result.loss = -log_likelihood;
  result.grad_logits = log_probs.array().exp().matrix();
  for (int t = 0; t < T; ++t) {
    std::vector<double> occ(z, kLogZero);
    for (int s = 0; s < S; ++s) occ[ext[s]] = LogAdd(occ[ext[s]], alpha(t, s) + beta(t, s));
    for (int k = 0; k < z; ++k)
      if (occ[k] != kLogZero) result.grad_logits(t, k) -= std::exp(occ[k] - log_likelihood);
  }
  return result;
}

LabelSeq CollapseAlignment(std::span<const int> path, int blank) {
  LabelSeq out;
  int prev = -1;
  for (int p : path) {
    if (p != prev && p != blank) out.push_back(p);
    prev = p;
  }
  return out;
}

LabelSeq GreedyDecode(const Matrix &scores, int blank) {
  std::vector<int> path(scores.rows());
  for (Eigen::Index t = 0; t < scores.rows(); ++t) {
    Eigen::Index best;
    scores.row(t).maxCoeff(&best);
    path[t] = static_cast<int>(best);
  }
  return CollapseAlignment(path, blank);
}

}  // namespace ekd
