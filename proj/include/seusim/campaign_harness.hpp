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

// Experiment orchestration: runs an architecture under an injection campaign,
// turns periodic checkpoints into a functionality timeline, fits an
// exponential failure rate, aggregates multi-seed matrices and VPU error
// tables, and writes the result files.

#ifndef SEUSIM_CAMPAIGN_HARNESS_HPP_
#define SEUSIM_CAMPAIGN_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seusim/fault_injector.hpp"
#include "seusim/fpga_model.hpp"
#include "seusim/frame_link.hpp"
#include "seusim/sim_engine.hpp"
#include "seusim/vpu_model.hpp"

namespace seusim {

// Bad configuration file or option.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WindowSample {
  SimTime start = 0;
  SimTime end = 0;
  WindowClass cls = WindowClass::kCorrect;
};

struct Interval {
  SimTime start = 0;
  SimTime end = 0;
  WindowClass cls = WindowClass::kCorrect;

  bool operator==(const Interval&) const = default;
};

struct FunctionalityTimeline {
  std::vector<Interval> intervals;  // adjacent intervals never share a class
  SimTime duration = 0;

  SimTime time_in(WindowClass c) const;
  double percent(WindowClass c) const;  // 0..100
};

// Merges back-to-back windows of the same class. Windows must tile
// [0, end) without gaps or overlap; throws InvariantViolation otherwise.
FunctionalityTimeline classify_timeline(std::span<const WindowSample> windows);

struct ReliabilityModel {
  double lambda = 0.0;  // failures per second
  std::uint64_t failures = 0;
  double correct_seconds = 0.0;
  std::vector<std::pair<double, double>> curve;  // (t seconds, R(t))

  double reliability(double t_seconds) const;
};

// R(t) = exp(-lambda t) on `samples` evenly spaced points of [0, horizon].
std::vector<std::pair<double, double>> reliability_curve(double lambda, double horizon_s,
                                                         std::size_t samples);

// lambda = correct->{down, erroneous} transitions / total correct time.
// Throws std::domain_error when no correct time was observed.
ReliabilityModel fit_lambda(const FunctionalityTimeline& timeline, double horizon_s = 10.0,
                            std::size_t samples = 101);
ReliabilityModel fit_lambda(std::span<const FunctionalityTimeline> pooled, double horizon_s = 10.0,
                            std::size_t samples = 101);
ReliabilityModel fit_lambda_from_counts(std::uint64_t failures, double correct_seconds,
                                        double horizon_s = 10.0, std::size_t samples = 101);

// ---------------------------------------------------------------------------
// FPGA campaigns

struct FpgaHarnessConfig {
  CampaignSpec campaign;
  FpgaConfig fpga;
  SimTime window = 0;  // 0: one window per injection period
};

struct FpgaRunReport {
  Architecture arch;
  std::uint64_t seed = 0;
  FunctionalityTimeline timeline;
  FpgaStats stats;
  std::size_t injections = 0;
  std::size_t essential_hits = 0;
  std::size_t scrub_repairs = 0;
  std::size_t dpr_reloads = 0;
  MutationLog log;
};

// One campaign against one architecture. `seed` replaces the campaign seed.
FpgaRunReport run_fpga(const Architecture& arch, std::uint64_t seed, const FpgaHarnessConfig& cfg);

// One report per (architecture, seed), architecture-major. Cells may run on
// `threads` workers; the result order does not depend on it.
std::vector<FpgaRunReport> run_matrix(const std::vector<Architecture>& archs,
                                      const std::vector<std::uint64_t>& seeds,
                                      const FpgaHarnessConfig& cfg, unsigned threads = 1);

struct ArchSummary {
  Architecture arch;
  std::size_t runs = 0;
  double down = 0.0;  // medians over seeds, percent
  double erroneous = 0.0;
  double correct = 0.0;
  double correct_min = 0.0;
  double correct_max = 0.0;
  ReliabilityModel pooled;           // lambda over all seeds; 0 runs -> unset
  bool lambda_defined = false;
  std::vector<double> seed_lambda;   // NaN where a seed had no correct time
};

std::vector<ArchSummary> summarize(const std::vector<FpgaRunReport>& reports);
double median(std::vector<double> v);

// ---------------------------------------------------------------------------
// VPU campaigns

struct VpuHarnessConfig {
  std::uint32_t width = 256;
  std::uint32_t height = 256;
  PixelDepth depth = PixelDepth::k8;
  std::optional<PixelFrame> image;  // overrides the synthetic image
  std::vector<std::size_t> impaired_counts = {3, 6, 9, 12};
  std::vector<InjectionKind> kinds = {InjectionKind::kVpuInstr};
  std::vector<FtMode> modes;
  std::vector<KernelKind> kernels = {KernelKind::kConv2d, KernelKind::kBinning2d};
  std::uint32_t burst_min = 1;
  std::uint32_t burst_max = 4;
  VpuConfig vpu;
};

PixelFrame synthetic_image(std::uint32_t width, std::uint32_t height, PixelDepth depth,
                           std::uint64_t seed);

struct VpuRunReport {
  FtMode mode;
  KernelKind kernel = KernelKind::kConv2d;
  std::size_t impaired = 0;
  std::vector<std::size_t> workers;
  std::uint64_t seed = 0;
  double error_rate = 0.0;
  bool completed = true;
  WindowClass cls = WindowClass::kCorrect;
  std::size_t vote_flagged = 0;
  TimingReport timing;
  SimTime baseline_latency = 0;
  MutationLog log;
};

// Impairs `impaired` workers (or exactly `workers` if given), one event per
// worker with a kind drawn from cfg.kinds, and runs the kernel once.
VpuRunReport run_vpu(const FtMode& mode, KernelKind kernel, std::size_t impaired,
                     std::uint64_t seed, const VpuHarnessConfig& cfg,
                     const std::optional<std::vector<std::size_t>>& workers = std::nullopt);

struct ErrorRow {
  std::string mode;
  KernelKind kernel = KernelKind::kConv2d;
  std::size_t impaired = 0;
  double min = 0.0;
  double max = 0.0;
  std::size_t runs = 0;
  std::size_t stalled = 0;
};

std::vector<VpuRunReport> run_vpu_matrix(const std::vector<std::uint64_t>& seeds,
                                         const VpuHarnessConfig& cfg);
std::vector<ErrorRow> summarize_vpu(const std::vector<VpuRunReport>& reports);

// ---------------------------------------------------------------------------
// Link campaigns: a frame per period over each link, bits flipped in flight.

struct LinkHarnessConfig {
  CampaignSpec campaign;  // link_bit targets
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  PixelDepth depth = PixelDepth::k16;
  std::uint64_t bits_per_second = 100'000'000;
};

struct LinkRunReport {
  std::uint64_t seed = 0;
  LinkStatus cif;
  LinkStatus lcd;
  std::size_t injections = 0;
  std::size_t noops = 0;
  std::size_t undetected = 0;  // delivered with crc_ok but wrong pixels
  MutationLog log;
};

LinkRunReport run_link(std::uint64_t seed, const LinkHarnessConfig& cfg);

// ---------------------------------------------------------------------------
// Campaign files and reports

enum class NodeKind : std::uint8_t { kFpga, kVpu, kLink };

struct CampaignFile {
  NodeKind node = NodeKind::kFpga;
  std::vector<std::uint64_t> seeds = {1};
  std::vector<Architecture> archs;  // FPGA only
  unsigned threads = 1;
  FpgaHarnessConfig fpga;
  VpuHarnessConfig vpu;
  LinkHarnessConfig link;
};

// Parses the JSON campaign description; throws ConfigError.
CampaignFile parse_campaign(std::string_view json_text);
CampaignFile load_campaign(const std::filesystem::path& path);

// Writes table.csv, summary.json, reliability.csv and mutations.log.
void emit_fpga_report(const std::filesystem::path& dir, const std::vector<FpgaRunReport>& reports);
// Writes table.csv, timing.csv, summary.json and mutations.log.
void emit_vpu_report(const std::filesystem::path& dir, const std::vector<VpuRunReport>& reports);
// Writes summary.json and mutations.log.
void emit_link_report(const std::filesystem::path& dir, const std::vector<LinkRunReport>& reports);

// Re-renders a summary.json written above as csv or json text.
std::string render_summary(const std::filesystem::path& summary_json, std::string_view format);

}  // namespace seusim

#endif  // SEUSIM_CAMPAIGN_HARNESS_HPP_
