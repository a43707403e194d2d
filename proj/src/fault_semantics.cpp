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

#include "seusim/fault_semantics.hpp"

#include <bit>
#include <cstring>

namespace seusim {

namespace {
double unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }
}  // namespace

CorruptionMask::CorruptionMask(std::uint64_t tag)
    : tag_(tag), density_(0.5 + 0.5 * unit(mix64(tag ^ 0x5DEECE66DULL))) {}

std::uint64_t CorruptionMask::word(std::uint64_t i) const {
  const std::uint64_t r = mix64(tag_ + (i + 1) * 0x9E3779B97F4A7C15ULL);
  if (i != 0 && unit(mix64(r)) >= density_) return 0;
  return r | 1;
}

bool CorruptionMask::hangs(double fraction) const {
  return unit(mix64(tag_ ^ 0xA5A5A5A5A5A5A5A5ULL)) < fraction;
}

void corrupt_samples(std::span<std::int64_t> samples, std::uint64_t tag) {
  const CorruptionMask mask(tag);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<std::int64_t>(static_cast<std::uint64_t>(samples[i]) ^ mask.word(i));
  }
}

void corrupt_samples(std::span<double> samples, std::uint64_t tag) {
  const CorruptionMask mask(tag);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(samples[i]);
    bits ^= mask.word(i) & 0xFFFFFFFFULL;
    samples[i] = std::bit_cast<double>(bits);
  }
}

}  // namespace seusim
