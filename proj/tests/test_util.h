// ekd/tests/test_util.h
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

#ifndef EKD_TESTS_TEST_UTIL_H_
#define EKD_TESTS_TEST_UTIL_H_

#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "ekd/ctc.h"
#include "ekd/rng.h"

namespace testutil {

// Rows drawn as softmax of N(0, sharpness^2) logits.
inline ekd::Matrix RandomPosteriors(ekd::Rng &rng, int T, int z, double sharpness = 1.5) {
  ekd::Matrix m(T, z);
  for (int t = 0; t < T; ++t) {
    double s = 0.0;
    for (int g = 0; g < z; ++g) {
      m(t, g) = std::exp(sharpness * rng.Normal());
      s += m(t, g);
    }
    m.row(t) /= s;
  }
  return m;
}

inline ekd::Matrix RandomMatrix(ekd::Rng &rng, int rows, int cols, double scale = 1.0) {
  ekd::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.Normal();
  return m;
}

inline ekd::LabelSeq RandomTarget(ekd::Rng &rng, int len, int z, int blank) {
  ekd::LabelSeq y;
  while (static_cast<int>(y.size()) < len) {
    const int s = static_cast<int>(rng.UniformInt(0, z - 1));
    if (s != blank) y.push_back(s);
  }
  return y;
}

inline double RelErr(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("ekd-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string path() const { return path_.string(); }
  std::string operator/(const std::string &name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil

#endif  // EKD_TESTS_TEST_UTIL_H_
