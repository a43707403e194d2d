// Copyright 2026 The seusim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEUSIM_VOTING_HPP_
#define SEUSIM_VOTING_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace seusim {

enum class VoteStatus : std::uint8_t { kUnanimous, kCorrected, kUncorrectable };

template <typename T>
struct VoteResult {
  std::vector<T> values;
  std::vector<VoteStatus> status;
  std::size_t corrected = 0;
  std::size_t uncorrectable = 0;
};

// Element-wise strict-majority vote over n equally long replicas. Elements
// without a strict majority take replica 0's value and are flagged
// uncorrectable. Values are compared bitwise through operator==.
template <typename T>
VoteResult<T> majority_vote(std::span<const std::span<const T>> replicas) {
  if (replicas.empty()) throw std::invalid_argument("majority_vote: no replicas");
  const std::size_t len = replicas[0].size();
  for (const auto& r : replicas) {
    if (r.size() != len) throw std::invalid_argument("majority_vote: length mismatch");
  }
  const std::size_t n = replicas.size();
  VoteResult<T> out;
  out.values.resize(len);
  out.status.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    // Boyer-Moore candidate, then a confirming count.
    std::size_t cand = 0, count = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (count == 0) {
        cand = k;
        count = 1;
      } else if (replicas[k][i] == replicas[cand][i]) {
        ++count;
      } else {
        --count;
      }
    }
    std::size_t agree = 0;
    for (std::size_t k = 0; k < n; ++k) agree += replicas[k][i] == replicas[cand][i];
    if (2 * agree > n) {
      out.values[i] = replicas[cand][i];
      out.status[i] = agree == n ? VoteStatus::kUnanimous : VoteStatus::kCorrected;
      if (agree != n) ++out.corrected;
    } else {
      out.values[i] = replicas[0][i];
      out.status[i] = VoteStatus::kUncorrectable;
      ++out.uncorrectable;
    }
  }
  return out;
}

template <typename T>
VoteResult<T> tmr_vote(std::span<const T> a, std::span<const T> b, std::span<const T> c) {
  if (a.size() != b.size() || a.size() != c.size()) {
    throw std::invalid_argument("tmr_vote: length mismatch");
  }
  const std::span<const T> replicas[] = {a, b, c};
  return majority_vote<T>(replicas);
}

}  // namespace seusim

#endif  // SEUSIM_VOTING_HPP_
