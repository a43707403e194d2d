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

// Simulated SoC FPGA node: configuration memory organised in 404-byte frames,
// a per-component essential-bit map, a streaming FIR accelerator, and the
// mitigation stack (configuration scrubbing, partial reconfiguration through a
// shared ICAP port, triplicated accelerator with input/output voting, and an
// external watchdog that power-cycles the device).
//
// Fault semantics: a component is healthy iff none of its essential bits is
// flipped. A faulty component either hangs or corrupts its output, decided by
// its corruption tag (see fault_semantics.hpp). Non-essential flips have no
// functional effect but still make the frame fail its ECC/CRC check.

#ifndef SEUSIM_FPGA_MODEL_HPP_
#define SEUSIM_FPGA_MODEL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seusim/fault_semantics.hpp"
#include "seusim/sim_engine.hpp"
#include "seusim/voting.hpp"

namespace seusim {

inline constexpr std::size_t kFrameBytes = 404;
inline constexpr std::size_t kFrameBits = kFrameBytes * 8;
inline constexpr std::size_t kFrameWords = kFrameBytes / 4;

enum class Component : std::uint8_t {
  kFir0,
  kFir1,
  kFir2,
  kVoterIn,
  kVoterOut,
  kDprCtrl,
  kCmsCtrl,
  kWdUart,
};
inline constexpr std::size_t kComponentCount = 8;
inline constexpr std::array<Component, kComponentCount> kAllComponents = {
    Component::kFir0,    Component::kFir1,    Component::kFir2,    Component::kVoterIn,
    Component::kVoterOut, Component::kDprCtrl, Component::kCmsCtrl, Component::kWdUart};

std::string_view component_name(Component c);
std::optional<Component> parse_component(std::string_view name);
constexpr std::size_t index_of(Component c) { return static_cast<std::size_t>(c); }

struct ConfigBitAddress {
  std::uint32_t frame = 0;
  std::uint32_t bit = 0;  // 0..3231, MSB-first within each byte

  std::uint64_t flat() const { return std::uint64_t{frame} * kFrameBits + bit; }
  static ConfigBitAddress from_flat(std::uint64_t f) {
    return {static_cast<std::uint32_t>(f / kFrameBits), static_cast<std::uint32_t>(f % kFrameBits)};
  }
  auto operator<=>(const ConfigBitAddress&) const = default;
};

// Result of checking one frame against its stored detection codes.
struct FrameCheck {
  bool crc_mismatch = false;
  std::vector<std::uint32_t> correctable_words;
  std::vector<std::uint32_t> uncorrectable_words;

  bool damaged() const {
    return crc_mismatch || !correctable_words.empty() || !uncorrectable_words.empty();
  }
};

struct EccOutcome {
  std::uint32_t corrected_bits = 0;
  std::vector<std::uint32_t> uncorrectable_words;
  bool crc_ok_after = false;
};

// Frame array plus an injection-immune golden copy. Every frame carries a
// stored CRC-16 and a per-32-bit-word SECDED code (6-bit position syndrome
// plus parity), both computed from the golden data at load time.
class ConfigMemory {
 public:
  explicit ConfigMemory(std::vector<std::uint8_t> golden_image);
  static ConfigMemory random(std::uint32_t frames, SeededRng& rng);

  std::uint32_t frame_count() const { return static_cast<std::uint32_t>(frames_.size() / kFrameBytes); }
  std::size_t byte_size() const { return frames_.size(); }

  std::span<const std::uint8_t> frame(std::uint32_t i) const;
  std::span<const std::uint8_t> golden_frame(std::uint32_t i) const;

  bool bit(ConfigBitAddress a) const;
  bool golden_bit(ConfigBitAddress a) const;
  void flip_bit(ConfigBitAddress a);

  bool frame_matches_golden(std::uint32_t i) const;
  std::vector<std::uint32_t> damaged_frames() const;

  FrameCheck check_frame(std::uint32_t i) const;
  // Corrects every single-bit word, leaves multi-bit words, then re-verifies
  // the frame CRC.
  EccOutcome correct_frame(std::uint32_t i);
  void restore_frame(std::uint32_t i);
  void restore_all();

  // Hash of the golden image; unchanged by any injection.
  std::uint64_t golden_digest() const;

 private:
  void check_index(std::uint32_t i) const;

  std::vector<std::uint8_t> frames_;
  std::vector<std::uint8_t> golden_;
  std::vector<std::uint16_t> stored_crc_;
  std::vector<std::uint8_t> stored_ecc_;  // kFrameWords per frame
};

// 7-bit SECDED code of a 32-bit word: bit 6 = parity, bits 0..5 = XOR of
// (position + 1) over set value bits.
std::uint8_t word_ecc(std::uint32_t word);

// Essential bits, partitioned by component.
class EssentialBitMap {
 public:
  // Throws if the address already belongs to a component.
  void add(Component c, ConfigBitAddress a);
  std::optional<Component> owner(ConfigBitAddress a) const;
  bool contains(ConfigBitAddress a) const { return owner(a).has_value(); }
  const std::vector<ConfigBitAddress>& bits(Component c) const { return bits_[index_of(c)]; }
  std::size_t total() const { return index_.size(); }

 private:
  std::array<std::vector<ConfigBitAddress>, kComponentCount> bits_;
  std::unordered_map<std::uint64_t, Component> index_;
};

// Enabled mitigation techniques; the eight evaluated stacks are listed by
// `table_rows()`.
struct Architecture {
  bool tmr = false;
  bool dpr = false;
  bool cms = false;
  bool wd = false;

  std::string name() const;
  // Accepts "No FT", "none", or '+'-joined technique names in any order.
  static Architecture parse(std::string_view text);
  static std::vector<Architecture> table_rows();
  std::vector<Component> components() const;
  bool operator==(const Architecture&) const = default;
};

struct ComponentSpec {
  std::uint32_t frames = 0;
  double essential_density = 0.0;
};

struct FabricConfig {
  std::uint32_t total_frames = 64;
  std::array<ComponentSpec, kComponentCount> components = default_components();
  std::uint64_t layout_seed = 0x5EED;

  static std::array<ComponentSpec, kComponentCount> default_components();
};

struct ComponentRegion {
  Component id;
  std::uint32_t first_frame = 0;
  std::uint32_t frame_count = 0;

  std::size_t bytes() const { return std::size_t{frame_count} * kFrameBytes; }
};

// Frame ownership for one architecture. Regions are contiguous and placed in
// component order from frame 0; the remaining frames are unutilized.
class FabricLayout {
 public:
  static FabricLayout build(const Architecture& arch, const FabricConfig& cfg);

  std::uint32_t total_frames() const { return total_frames_; }
  const std::vector<ComponentRegion>& regions() const { return regions_; }
  std::optional<ComponentRegion> region(Component c) const;
  std::optional<Component> owner_of_frame(std::uint32_t frame) const;
  bool has(Component c) const { return region(c).has_value(); }
  std::uint32_t utilized_frames() const;
  const FabricConfig& config() const { return cfg_; }

 private:
  std::uint32_t total_frames_ = 0;
  std::vector<ComponentRegion> regions_;
  std::vector<std::int8_t> owner_;  // per frame, -1 if unutilized
  FabricConfig cfg_;
};

struct ComponentHealth {
  Component id;
  bool healthy = true;
  std::uint64_t corruption_tag = 0;
  std::size_t flipped_bits = 0;
};

struct FlipEffect {
  std::optional<Component> owner;  // component owning the frame, if any
  bool essential = false;
  bool now_flipped = false;  // bit differs from golden after the flip
};

// Configuration memory + essential-bit map + live damage bookkeeping. All
// mutations go through this class so component health is always current.
class FpgaFabric {
 public:
  FpgaFabric(FabricLayout layout, std::uint64_t content_seed);

  const FabricLayout& layout() const { return layout_; }
  const ConfigMemory& memory() const { return mem_; }
  const EssentialBitMap& essential() const { return essential_; }

  FlipEffect flip(ConfigBitAddress a);
  void restore_frame(std::uint32_t frame);
  void restore_region(Component c);
  void restore_all();
  EccOutcome ecc_correct(std::uint32_t frame);

  ComponentHealth health(Component c) const;
  bool all_healthy() const;
  std::size_t flipped_essential_bits() const;

 private:
  void resync(std::uint32_t frame);

  FabricLayout layout_;
  ConfigMemory mem_;
  EssentialBitMap essential_;
  std::array<std::set<std::uint64_t>, kComponentCount> flipped_;
  std::array<DamageDigest, kComponentCount> digest_;
};

// FIR filter: out[n] = sum_k coeffs[k] * in[n-k], zero history. A faulty
// component returns the correct output XOR-ed with its tag mask.
std::vector<std::int64_t> fir_filter(const ComponentHealth& health,
                                     std::span<const std::int64_t> input,
                                     std::span<const std::int64_t> coeffs);

// ---------------------------------------------------------------------------
// ICAP arbitration

enum class IcapOwner : std::uint8_t { kCms, kDpr };
std::string_view icap_owner_name(IcapOwner o);

class IcapArbiter {
 public:
  using GrantHandler = std::function<void()>;
  enum class Outcome : std::uint8_t { kGranted, kQueued };

  // The handler runs as soon as the grant is held: synchronously if the port
  // is free, otherwise from the release() that hands it over. A second
  // request from an owner that already holds or waits is a logic_error.
  Outcome acquire(IcapOwner owner, GrantHandler on_grant);
  void release(IcapOwner owner);
  // Drops the holder and every waiter.
  void reset();

  std::optional<IcapOwner> holder() const { return holder_; }
  std::size_t waiting() const { return queue_.size(); }
  std::uint64_t grants() const { return grants_; }
  std::uint64_t releases() const { return releases_; }

 private:
  void grant(IcapOwner owner, GrantHandler handler);

  std::optional<IcapOwner> holder_;
  std::deque<std::pair<IcapOwner, GrantHandler>> queue_;
  std::uint64_t grants_ = 0;
  std::uint64_t releases_ = 0;
  int holders_ = 0;
};

// ---------------------------------------------------------------------------
// Configuration memory scrubbing

enum class ScrubMode : std::uint8_t { kReplace, kEnhancedRepair };
std::string_view scrub_mode_name(ScrubMode m);

struct ScrubberConfig {
  ScrubMode mode = ScrubMode::kReplace;
  SimTime frame_repair_latency = 18 * kMillisecond;
  SimTime scan_period = 100 * kMicrosecond;  // per frame
};

struct ScrubReport {
  SimTime time = 0;
  std::uint32_t frame = 0;
  bool controller_faulty = false;
  bool busy = false;
  bool detected = false;
  bool repair_scheduled = false;
  std::vector<std::uint32_t> uncorrectable_words;
};

struct RepairRecord {
  std::uint32_t frame = 0;
  SimTime detected_at = 0;
  SimTime completed_at = 0;
  std::uint32_t corrected_bits = 0;
  bool fully_repaired = false;
};

class Scrubber {
 public:
  Scrubber(Simulator& sim, FpgaFabric& fabric, IcapArbiter& icap, ScrubberConfig cfg);

  // Begins cyclic scanning, one frame per scan period.
  void start();
  // Cancels pending scan/repair events and rewinds the scan pointer.
  void reset();

  // One scan step at the current time (the periodic loop calls this).
  ScrubReport step();

  bool busy() const { return busy_; }
  bool running() const { return running_; }
  std::uint32_t scan_pointer() const { return pointer_; }
  // Frames known to hold damage the ECC cannot fix. Entries repaired by
  // other means are pruned on query.
  bool has_uncorrectable();
  const std::vector<RepairRecord>& repairs() const { return repairs_; }
  std::uint64_t detections() const { return detections_; }
  std::uint64_t uncorrectable_reports() const { return uncorrectable_reports_; }
  const ScrubberConfig& config() const { return cfg_; }
  void set_mode(ScrubMode m) { cfg_.mode = m; }

 private:
  void schedule_step(SimTime delay);
  void begin_repair(std::uint32_t frame, SimTime detected_at);
  void finish_repair(std::uint32_t frame, SimTime detected_at);
  void advance();

  Simulator& sim_;
  FpgaFabric& fabric_;
  IcapArbiter& icap_;
  ScrubberConfig cfg_;
  std::uint32_t pointer_ = 0;
  bool busy_ = false;
  bool running_ = false;
  std::optional<EventId> pending_;
  std::uint64_t generation_ = 0;
  std::set<std::uint32_t> uncorrectable_;
  std::vector<RepairRecord> repairs_;
  std::uint64_t detections_ = 0;
  std::uint64_t uncorrectable_reports_ = 0;
};

// ---------------------------------------------------------------------------
// Partial reconfiguration

// Reload time for `bytes` at the given port throughput, rounded up to 1 us.
SimTime reload_duration(std::size_t bytes, std::uint64_t bytes_per_second);

struct ReloadRecord {
  Component region;
  SimTime requested_at = 0;
  SimTime started_at = 0;
  SimTime completed_at = 0;
};

// Only the accelerator replicas sit in reconfigurable partitions; voters and
// controllers are static logic that partial reconfiguration cannot reload.
constexpr bool is_reconfigurable(Component c) {
  return c == Component::kFir0 || c == Component::kFir1 || c == Component::kFir2;
}

class DprController {
 public:
  // `partial_bytes` overrides the per-region bitstream size, which otherwise
  // is the region's frame count times the frame size.
  DprController(Simulator& sim, FpgaFabric& fabric, IcapArbiter& icap,
                std::uint64_t bytes_per_second, std::optional<std::size_t> partial_bytes = std::nullopt);

  // Queues a reload of the region. Duplicate requests for a region already
  // queued are merged. Returns false if the region does not exist or the
  // controller itself is faulty.
  bool request_reload(Component region);
  void reset();

  bool busy() const { return active_.has_value(); }
  std::size_t queued() const { return queue_.size(); }
  const std::vector<ReloadRecord>& reloads() const { return reloads_; }
  std::uint64_t bytes_per_second() const { return bytes_per_second_; }

 private:
  void pump();
  void on_grant();
  void finish(std::uint64_t generation);

  Simulator& sim_;
  FpgaFabric& fabric_;
  IcapArbiter& icap_;
  std::uint64_t bytes_per_second_;
  std::optional<std::size_t> partial_bytes_;
  std::deque<ReloadRecord> queue_;
  std::optional<ReloadRecord> active_;
  bool waiting_icap_ = false;
  std::optional<EventId> pending_;
  std::uint64_t generation_ = 0;
  std::vector<ReloadRecord> reloads_;
};

// ---------------------------------------------------------------------------
// Watchdog

class Watchdog {
 public:
  Watchdog(Simulator& sim, SimTime timeout, std::function<void()> on_expire);

  void arm();  // (re)starts the timer
  void kick() { arm(); }
  void disarm();
  bool armed() const { return pending_.has_value(); }
  std::uint64_t expirations() const { return expirations_; }
  SimTime timeout() const { return timeout_; }

 private:
  Simulator& sim_;
  SimTime timeout_;
  std::function<void()> on_expire_;
  std::optional<EventId> pending_;
  std::uint64_t expirations_ = 0;
};

// ---------------------------------------------------------------------------
// Accelerator pipelines

enum class WindowClass : std::uint8_t { kDown, kErroneous, kCorrect };
std::string_view window_class_name(WindowClass c);

struct PipelineOutcome {
  std::optional<std::vector<std::int64_t>> output;  // nullopt: no output (hang)
  std::vector<Component> repair_requests;
  std::size_t corrected = 0;
  std::size_t uncorrectable = 0;
};

using HealthLookup = std::function<ComponentHealth(Component)>;

// Unprotected accelerator on fir_0.
PipelineOutcome run_app_pipeline(const HealthLookup& health, std::span<const std::int64_t> input,
                                 std::span<const std::int64_t> coeffs, double hang_fraction);

// Three input copies voted by voter_in, three FIR replicas, outputs voted by
// voter_out (in the default design it occupies no frames and cannot be hit). A hung replica leaves stale zeros on its output port; fewer than
// two live replicas means no output. Replicas that hang or disagree with the
// voted result are named in repair_requests (all differing replicas for
// uncorrectable elements).
PipelineOutcome run_tmr_pipeline(const HealthLookup& health, std::span<const std::int64_t> input,
                                 std::span<const std::int64_t> coeffs, double hang_fraction);

// ---------------------------------------------------------------------------
// Node

struct FpgaConfig {
  Architecture arch;
  FabricConfig fabric;
  ScrubberConfig scrub;  // mode is forced to enhanced repair when arch.wd
  std::uint64_t icap_bytes_per_second = 67'000'000;
  // Blind periodic reload of the accelerator regions when DPR is enabled.
  SimTime dpr_sweep_period = 250 * kMillisecond;
  // Partial bitstream size per reconfigurable region; default: its frames.
  std::optional<std::size_t> dpr_partial_bytes;
  SimTime watchdog_timeout = 100 * kMillisecond;
  SimTime heartbeat_period = 10 * kMillisecond;
  // Default: whole configuration memory at the ICAP throughput.
  std::optional<SimTime> reset_duration;
  // Fraction of damage patterns that stall a component rather than corrupt
  // its output.
  double hang_fraction = 0.915;
  std::vector<std::int64_t> fir_coeffs = {3, -1, 4, 1, -5, 9, 2, -6};
  std::size_t batch_length = 64;
};

struct CheckpointResult {
  WindowClass cls = WindowClass::kCorrect;
  std::vector<Component> repair_requests;
};

struct FpgaStats {
  std::uint64_t checkpoints = 0;
  std::uint64_t resets = 0;
  std::uint64_t heartbeats = 0;
  std::uint64_t repair_requests = 0;
};

class FpgaNode {
 public:
  FpgaNode(Simulator& sim, FpgaConfig cfg);

  // Starts scrubbing, the DPR sweep and the watchdog as configured.
  void start();
  // Runs the accelerator on the reference batch with the current state and
  // classifies the result against the golden output. Forwards repair requests
  // to DPR when enabled.
  CheckpointResult checkpoint();
  FlipEffect inject(ConfigBitAddress a);
  // Power-cycles the device: restores the whole memory from the boot image,
  // drops ICAP/scrub/DPR work, and keeps the node down for the reset time.
  void full_reset();

  bool in_reset() const { return in_reset_; }
  SimTime reset_duration() const;
  const FpgaConfig& config() const { return cfg_; }
  FpgaFabric& fabric() { return fabric_; }
  const FpgaFabric& fabric() const { return fabric_; }
  IcapArbiter& icap() { return icap_; }
  Scrubber& scrubber() { return scrubber_; }
  DprController& dpr() { return dpr_; }
  Watchdog& watchdog() { return watchdog_; }
  const FpgaStats& stats() const { return stats_; }
  const std::vector<std::int64_t>& golden_output() const { return golden_; }

 private:
  void heartbeat_tick();
  void sweep_tick();
  void finish_reset();

  Simulator& sim_;
  FpgaConfig cfg_;
  FpgaFabric fabric_;
  IcapArbiter icap_;
  Scrubber scrubber_;
  DprController dpr_;
  Watchdog watchdog_;
  std::vector<std::int64_t> input_;
  std::vector<std::int64_t> golden_;
  std::vector<Component> sweep_regions_;
  std::size_t sweep_next_ = 0;
  bool in_reset_ = false;
  bool output_alive_ = true;
  std::uint64_t epoch_ = 0;
  FpgaStats stats_;
};

}  // namespace seusim

#endif  // SEUSIM_FPGA_MODEL_HPP_
