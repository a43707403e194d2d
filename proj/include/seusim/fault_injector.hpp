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

// Fault-injection campaigns: a deterministic schedule of upsets aimed at the
// FPGA configuration memory, the VPU memories, or the inter-node link, plus
// the executors that apply one event and describe what changed.

#ifndef SEUSIM_FAULT_INJECTOR_HPP_
#define SEUSIM_FAULT_INJECTOR_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "seusim/fpga_model.hpp"
#include "seusim/frame_link.hpp"
#include "seusim/sim_engine.hpp"
#include "seusim/vpu_model.hpp"

namespace seusim {

class CampaignError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class InjectionKind : std::uint8_t {
  kFpgaConfigBit,
  kVpuDdrInput,
  kVpuWorkerLocal,
  kVpuSharedVar,
  kVpuInstr,
  kLinkBit,
};
inline constexpr std::size_t kInjectionKindCount = 6;
std::string_view kind_name(InjectionKind k);
InjectionKind parse_kind(std::string_view name);
bool is_vpu_kind(InjectionKind k);

// VPU target. `offset` is drawn over the whole 64-bit range and reduced
// modulo the region size when the event executes, because stripe and tile
// sizes are only known then.
struct VpuAddress {
  std::size_t worker = 0;
  std::uint64_t offset = 0;
  std::uint32_t burst = 1;  // consecutive bytes
  std::uint64_t pattern = 0;  // seeds the XOR bytes

  auto operator<=>(const VpuAddress&) const = default;
};

struct LinkBitAddress {
  LinkId link = LinkId::kCif;
  std::uint64_t bit = 0;  // reduced modulo the in-flight frame size

  auto operator<=>(const LinkBitAddress&) const = default;
};

using InjectionAddress = std::variant<ConfigBitAddress, VpuAddress, LinkBitAddress>;

struct InjectionEvent {
  SimTime time = 0;
  InjectionKind kind = InjectionKind::kFpgaConfigBit;
  InjectionAddress address;

  bool operator==(const InjectionEvent&) const = default;
};

// Which configuration bits an FPGA campaign samples from.
//   essential - only the essential bits of the targeted components
//   utilized  - every bit of the frames the targeted components occupy
enum class AddressDomain : std::uint8_t { kEssential, kUtilized };
std::string_view domain_name(AddressDomain d);
AddressDomain parse_domain(std::string_view name);

struct TargetWeight {
  InjectionKind kind = InjectionKind::kFpgaConfigBit;
  double weight = 1.0;
};

struct CampaignSpec {
  std::uint64_t seed = 1;
  SimTime duration = 4 * kSecond;
  SimTime period = 4 * kMillisecond;
  std::vector<SimTime> explicit_times;  // overrides period when non-empty
  std::vector<TargetWeight> targets = {{InjectionKind::kFpgaConfigBit, 1.0}};
  std::vector<Component> components;  // empty: every component of the design
  AddressDomain domain = AddressDomain::kUtilized;
  std::vector<std::size_t> workers;  // VPU targets; empty: all
  std::uint32_t burst_min = 1;
  std::uint32_t burst_max = 4;
  std::vector<LinkId> links = {LinkId::kCif, LinkId::kLcd};
};

struct InjectionCampaign {
  std::uint64_t seed = 0;
  SimTime duration = 0;
  std::vector<InjectionEvent> schedule;
  std::vector<TargetWeight> targets;
};

// What a campaign may hit. `fabric` is required when FPGA kinds are weighted.
struct CampaignTargets {
  const FpgaFabric* fabric = nullptr;
};

// Event times are k * period for k = 0, 1, ... while below `duration`.
// Throws CampaignError on an empty target set, non-positive weights, a
// component missing from the design, or a malformed schedule.
InjectionCampaign build_campaign(const CampaignSpec& spec, const CampaignTargets& targets,
                                 SeededRng& rng);

struct MutationRecord {
  SimTime time = 0;
  InjectionKind kind = InjectionKind::kFpgaConfigBit;
  std::string address;  // resolved coordinates
  bool noop = false;

  std::string line() const;  // "time_us kind address"
};

class MutationLog {
 public:
  void add(MutationRecord r) { records_.push_back(std::move(r)); }
  const std::vector<MutationRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::string text() const;
  std::uint64_t digest() const;

 private:
  std::vector<MutationRecord> records_;
};

MutationRecord inject_config_bit(FpgaFabric& fabric, SimTime time, ConfigBitAddress addr);
MutationRecord inject_config_bit(FpgaNode& node, SimTime time, ConfigBitAddress addr);

// Applies one VPU event. ddr_input bursts land inside the rows the worker's
// descriptor assigns it, so the call belongs after descriptors are written;
// worker_local bursts land in the worker's resident tile.
MutationRecord corrupt_vpu(const InjectionEvent& event, VpuState& vpu);

MutationRecord corrupt_link_bit(FrameLink& link, SimTime time, std::uint64_t bit);

// Picks `count` distinct workers out of the twelve.
std::vector<std::size_t> choose_workers(std::size_t count, SeededRng& rng);

// Builds one VPU event of `kind` aimed at `worker`.
InjectionEvent make_vpu_event(InjectionKind kind, std::size_t worker, SimTime time, SeededRng& rng,
                              std::uint32_t burst_min = 1, std::uint32_t burst_max = 4);

// Hook that applies `events` during a VPU run at the phase each kind acts
// in and appends the mutation records to `log`.
InjectionHook make_vpu_hook(std::vector<InjectionEvent> events, MutationLog& log);

// Digest of everything that must survive injection untouched.
std::uint64_t golden_digest(const VpuState& vpu);

}  // namespace seusim

#endif  // SEUSIM_FAULT_INJECTOR_HPP_
