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

// Vision-processor model: a supervisor core that splits an image into
// horizontal stripes and runs a kernel on 12 worker cores. Input lives in
// DDR (plus a CRC-verified golden copy), stripes are DMA-ed into a 2 MB
// scratchpad, and worker code images sit in DDR next to golden copies.
//
// Recovery techniques:
//   IMR  - supervisor re-checks the CRC of every worker's code image after
//          the run, re-executes the stripes of impaired workers on functional
//          ones, then restores the impaired code from the golden copy.
//   DMR  - each tile carries a CRC computed by the supervisor; the worker
//          checks it before computing and failed tiles are restored from the
//          golden input and rescheduled on functional workers.
//   NMR  - groups of n workers compute the same stripe and the supervisor
//          votes per pixel. No rescheduling, no memory repair.

#ifndef SEUSIM_VPU_MODEL_HPP_
#define SEUSIM_VPU_MODEL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seusim/frame_link.hpp"
#include "seusim/sim_engine.hpp"

namespace seusim {

inline constexpr std::size_t kWorkerCount = 12;
inline constexpr std::size_t kCmxBytes = 2u * 1024u * 1024u;
inline constexpr std::size_t kInstrBytes = 4096;
inline constexpr std::size_t kDescriptorBytes = 8;

class VpuError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class KernelKind : std::uint8_t { kConv2d, kBinning2d };
std::string_view kernel_name(KernelKind k);
KernelKind parse_kernel(std::string_view name);

// Real-valued output plane, row-major.
struct Image {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> values;

  double at(std::uint32_t x, std::uint32_t y) const { return values[std::size_t{y} * width + x]; }
  bool operator==(const Image&) const = default;
};

using Kernel3x3 = std::array<double, 9>;  // row-major k[i][j]
inline constexpr Kernel3x3 kDefaultConvKernel = {0.0625, 0.125, 0.0625, 0.125, 0.25,
                                                 0.125,  0.0625, 0.125, 0.0625};

struct Tile {
  std::size_t worker = 0;
  std::uint32_t first_row = 0;   // first output-owned image row
  std::uint32_t row_count = 0;   // output-owned rows
  std::uint32_t halo_top = 0;    // rows above first_row included in `input`
  std::uint32_t halo_bottom = 0;
  std::uint32_t width = 0;
  std::uint32_t image_height = 0;
  PixelDepth depth = PixelDepth::k8;
  std::vector<std::uint32_t> input;  // (halo_top + row_count + halo_bottom) * width
  Crc16 crc = 0;                     // over the serialized input

  std::uint32_t input_rows() const { return halo_top + row_count + halo_bottom; }
};

// Contiguous stripes with heights differing by at most one `align`-row unit.
// `halo` rows above and below are duplicated into each tile where the image
// has them.
std::vector<Tile> partition_workload(const PixelFrame& image, std::size_t workers,
                                     std::uint32_t halo = 1, std::uint32_t align = 1);

// 3x3 convolution over the tile's owned rows; zero padding at image edges.
std::vector<double> conv2d(const Tile& tile, const Kernel3x3& kernel);
// factor x factor block mean, rounded half up.
std::vector<double> binning2d(const Tile& tile, std::uint32_t factor = 2);

double error_rate(const Image& output, const Image& golden);

// Fault-free whole-image result, used as the golden output.
Image reference_output(const PixelFrame& image, KernelKind kernel,
                       const Kernel3x3& conv_kernel = kDefaultConvKernel);

enum class WorkerStatus : std::uint8_t { kFunctional, kImpaired, kRecovering };

struct WorkerCore {
  std::size_t id = 0;
  std::size_t instr_offset = 0;  // into MemorySpace::ddr_instr
  WorkerStatus status = WorkerStatus::kFunctional;
  std::size_t cmx_offset = 0;
  std::size_t cmx_bytes = 0;
  bool faulted = false;  // stalled on an invalid descriptor this run
};

struct MemorySpace {
  std::vector<std::uint8_t> ddr_input;     // working copy, serialized pixels
  std::vector<std::uint8_t> golden_input;  // CRC-verified copy, never injected
  std::vector<std::uint8_t> ddr_instr;     // kWorkerCount code images
  std::vector<std::uint8_t> golden_instr;
  std::vector<std::uint8_t> cmx = std::vector<std::uint8_t>(kCmxBytes, 0);
  std::size_t cmx_used = 0;

  // Throws VpuError when the scratchpad would overflow.
  std::size_t cmx_alloc(std::size_t bytes);
  void cmx_reset() { cmx_used = 0; }
  std::span<std::uint8_t> instr(std::size_t worker);
  std::span<const std::uint8_t> golden_instr_of(std::size_t worker) const;
};

struct NmrConfig {
  std::size_t n = 1;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> unused;

  // n = 1: twelve singleton groups; n = 3: four groups; n = 5: two groups and
  // two idle workers.
  static NmrConfig make(std::size_t n);
};

// Shared supervisor/worker state. Injection acts on this structure.
struct VpuState {
  MemorySpace mem;
  std::array<WorkerCore, kWorkerCount> workers{};
  // Per-worker tile descriptor written by the supervisor and read by the
  // worker: first_row and row_count, each a big-endian u32.
  std::vector<std::uint8_t> shared = std::vector<std::uint8_t>(kWorkerCount * kDescriptorBytes, 0);
  std::array<Crc16, kWorkerCount> instr_crc{};  // baseline, taken at startup
  std::uint32_t image_width = 0;
  std::uint32_t image_height = 0;
  PixelDepth depth = PixelDepth::k8;

  std::span<std::uint8_t> descriptor(std::size_t worker);
  std::span<std::uint8_t> cmx_tile(std::size_t worker);
  bool instr_pristine(std::size_t worker) const;
  // Digest of the code-image diff; 0 when pristine.
  std::uint64_t instr_damage_tag(std::size_t worker) const;
};

enum class RunPhase : std::uint8_t {
  kInputLoaded,    // input in DDR, before partitioning
  kTilesAssigned,  // descriptors written, before DMA
  kTilesResident,  // tiles in CMX, before compute
};
std::string_view run_phase_name(RunPhase p);
using InjectionHook = std::function<void(RunPhase, VpuState&)>;

struct FtMode {
  bool imr = false;
  bool dmr = false;
  std::size_t nmr = 1;  // 1 disables voting

  std::string name() const;
  static FtMode parse(std::string_view text);
};

// Synthetic task costs.
struct VpuTiming {
  std::uint64_t conv_ns_per_pixel = 400;
  std::uint64_t binning_ns_per_pixel = 100;  // per input pixel
  std::uint64_t dma_ns_per_byte = 1;
  std::uint64_t vote_ns_per_pixel = 1;  // per output pixel per voter input
  SimTime crc_check = 8 * kMillisecond;
  SimTime reschedule = 40 * kMillisecond;
  SimTime restore = 1 * kMillisecond;
};

struct TimingReport {
  SimTime dma = 0;
  SimTime compute = 0;
  SimTime crc_check = 0;
  SimTime reschedule = 0;
  SimTime reexecute = 0;
  SimTime restore = 0;
  SimTime voting = 0;

  SimTime total() const { return dma + compute + crc_check + reschedule + reexecute + restore + voting; }
};

struct RecoveryReport {
  std::vector<std::size_t> impaired;     // workers (IMR) or tiles (DMR) found bad
  std::vector<std::size_t> redispatched; // stripe indices re-executed
  bool degraded = false;                 // no functional worker was left
  bool unrecoverable_input = false;      // golden input failed its own CRC
  SimTime crc_check = 0;
  SimTime reschedule = 0;

  bool empty() const { return impaired.empty() && redispatched.empty(); }
};

struct VpuRunResult {
  Image output;
  bool completed = true;  // false: a worker stalled and nothing recovered it
  RecoveryReport imr;
  RecoveryReport dmr;
  std::size_t vote_flagged = 0;
  TimingReport timing;
  SimTime baseline_latency = 0;  // 12-way, no FT, same image and kernel
};

struct VpuConfig {
  std::uint64_t code_seed = 0xC0DE;
  VpuTiming timing;
  Kernel3x3 conv_kernel = kDefaultConvKernel;
};

class VpuNode {
 public:
  explicit VpuNode(VpuConfig cfg = {});

  // Stores the frame in DDR and keeps a golden copy.
  void load_input(const PixelFrame& image);
  VpuRunResult run(KernelKind kernel, FtMode mode, const InjectionHook& hook = {});

  VpuState& state() { return state_; }
  const VpuState& state() const { return state_; }
  const VpuConfig& config() const { return cfg_; }

  // Latency of the fault-free 12-way run for this image size.
  SimTime baseline_latency(KernelKind kernel) const;

 private:
  struct Assignment {
    std::size_t stripe;
    std::size_t worker;
  };
  struct Context;

  void write_descriptor(std::size_t worker, const Tile& t);
  std::optional<Tile> dma_tile(std::size_t worker, const Tile& expected, bool from_golden);
  std::vector<double> execute(std::size_t worker, const Tile& tile, KernelKind kernel) const;
  SimTime stripe_cost(const Tile& t, KernelKind kernel) const;
  SimTime dma_cost(const Tile& t) const;
  void place(Image& out, const Tile& t, const std::vector<double>& stripe, KernelKind kernel) const;

  VpuRunResult run_parallel(KernelKind kernel, FtMode mode, const InjectionHook& hook);
  VpuRunResult run_nmr(KernelKind kernel, const NmrConfig& nmr, const InjectionHook& hook);

  RecoveryReport imr_cycle(Context& ctx);
  RecoveryReport dmr_cycle(Context& ctx);
  void reexecute(Context& ctx, const std::vector<std::size_t>& stripes,
                 std::vector<std::size_t> functional, RecoveryReport& report);

  VpuConfig cfg_;
  VpuState state_;
  KernelKind active_ = KernelKind::kConv2d;
  std::optional<PixelFrame> input_;
};

// Binary PGM (P5), maxval <= 65535.
PixelFrame read_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_pgm(const PixelFrame& frame);
// Rounds and clamps an output plane to pixel range.
PixelFrame to_pixel_frame(const Image& image, PixelDepth depth);

}  // namespace seusim

#endif  // SEUSIM_VPU_MODEL_HPP_
