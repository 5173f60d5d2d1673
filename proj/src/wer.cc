// ekd/src/wer.cc
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

#include "ekd/decoder.h"

#include <limits>
#include <vector>

namespace ekd {

WerBreakdown &WerBreakdown::operator+=(const WerBreakdown &o) {
  substitutions += o.substitutions;
  insertions += o.insertions;
  deletions += o.deletions;
  reference_words += o.reference_words;
  defined = reference_words > 0 || errors() == 0;
  wer = reference_words > 0 ? static_cast<double>(errors()) / reference_words
                            : (errors() == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  return *this;
}

WerBreakdown Wer(const WordSeq &reference, const WordSeq &hypothesis) {
  const std::size_t n = reference.size(), m = hypothesis.size();
  std::vector<std::vector<long>> d(n + 1, std::vector<long>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1),
                          d[i - 1][j] + 1, d[i][j - 1] + 1});

  WerBreakdown out;
  out.reference_words = static_cast<long>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1)) {
      if (reference[i - 1] != hypothesis[j - 1]) ++out.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  out.defined = n > 0 || m == 0;
  out.wer = n > 0 ? static_cast<double>(out.errors()) / static_cast<double>(n)
                  : (m == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  return out;
}

}  // namespace ekd
