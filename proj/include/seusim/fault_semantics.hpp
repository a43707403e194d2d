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

// Output corruption model shared by the FPGA accelerators and the VPU
// workers. A faulty unit is summarized by a 64-bit corruption tag derived
// from its damage (the set of flipped bits, or the diff of its code image).
// Its output is the correct output with every sample XOR-ed by a mask drawn
// from a tag-seeded stream, so the faulty output is a pure function of
// (correct output, damage).

#ifndef SEUSIM_FAULT_SEMANTICS_HPP_
#define SEUSIM_FAULT_SEMANTICS_HPP_

#include <cstdint>
#include <span>

#include "seusim/sim_engine.hpp"

namespace seusim {

// Order-independent digest of a set of flipped addresses. Empty set -> 0.
class DamageDigest {
 public:
  void toggle(std::uint64_t address) { acc_ ^= mix64(address ^ 0xD1B54A32D192ED03ULL); }
  std::uint64_t tag() const { return acc_ == 0 ? 0 : mix64(acc_); }

 private:
  std::uint64_t acc_ = 0;
};

class CorruptionMask {
 public:
  explicit CorruptionMask(std::uint64_t tag);

  std::uint64_t tag() const { return tag_; }
  // Fraction of samples this pattern damages, in [0.5, 1].
  double density() const { return density_; }
  // Mask for sample i; zero means the sample passes through. Sample 0 is
  // always damaged so a faulty unit never matches its golden output.
  std::uint64_t word(std::uint64_t i) const;
  // True if this damage pattern stalls the unit instead of producing wrong
  // output. `fraction` of all patterns hang.
  bool hangs(double fraction) const;

 private:
  std::uint64_t tag_;
  double density_;
};

void corrupt_samples(std::span<std::int64_t> samples, std::uint64_t tag);
// Doubles are damaged in the low 32 mantissa bits only, so values stay
// finite.
void corrupt_samples(std::span<double> samples, std::uint64_t tag);

}  // namespace seusim

#endif  // SEUSIM_FAULT_SEMANTICS_HPP_
