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

// Acceptance checks, one PASS/FAIL line each. Exit status is the number of
// failed criteria (0 when all pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "seusim/campaign_harness.hpp"
#include "seusim/fault_injector.hpp"
#include "seusim/fpga_model.hpp"
#include "seusim/frame_link.hpp"
#include "seusim/sim_engine.hpp"
#include "seusim/voting.hpp"
#include "seusim/vpu_model.hpp"

using namespace seusim;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail = why;
    }
  }
};

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (v.pass && secs > budget_s) {
    v.pass = false;
    v.detail = "over time budget";
  }
  failures += !v.pass;
  std::printf("%s %2d %-34s (%.2f s)%s%s\n", v.pass ? "PASS" : "FAIL", id, title, secs,
              v.detail.empty() ? "" : "  ", v.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Crc16 crc_bitwise(std::span<const std::uint8_t> bytes) {
  std::uint16_t reg = 0;
  for (std::uint8_t b : bytes) {
    for (int i = 7; i >= 0; --i) {
      const bool top = reg & 0x8000;
      reg = static_cast<std::uint16_t>(reg << 1);
      if (((b >> i) & 1) != top) reg ^= 0x1021;
    }
  }
  return reg;
}

PixelFrame random_frame(std::uint32_t w, std::uint32_t h, PixelDepth d, SeededRng& rng) {
  PixelFrame f(w, h, d);
  for (auto& p : f.pixels) p = static_cast<std::uint32_t>(rng.uniform(std::uint64_t{f.max_value()} + 1));
  return f;
}

// ---------------------------------------------------------------------------

Verdict crc_exactness() {
  Verdict v;
  const std::string check = "123456789";
  const auto* p = reinterpret_cast<const std::uint8_t*>(check.data());
  v.require(crc16_ccitt(check) == crc_bitwise({p, check.size()}), "check string mismatch");
  v.require(crc16_ccitt(check) == 0x31C3, "check value is not 0x31C3");
  SeededRng rng(2026);
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::uint8_t> bytes(rng.uniform(512));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.uniform(256));
    v.require(crc16_ccitt(bytes) == crc_bitwise(bytes), "random string " + std::to_string(i));
  }
  return v;
}

Verdict frame_detection() {
  Verdict v;
  SeededRng rng(7);
  const std::array depths{PixelDepth::k8, PixelDepth::k16, PixelDepth::k24};
  for (int i = 0; i < 1000; ++i) {
    const PixelDepth d = depths[i % 3];
    const auto w = static_cast<std::uint32_t>(2 + rng.uniform(63));
    const auto h = static_cast<std::uint32_t>(1 + rng.uniform(64));
    const PixelFrame f = random_frame(w, h, d, rng);
    const FrameWire clean = encode_frame(f);
    const DecodeResult r = decode_frame(clean);
    v.require(r.ok() && r.frame == f, "round trip failed");

    const bool small = w <= 16 && h <= 16;
    const std::uint64_t bits = clean.total_bits();
    const std::uint64_t singles = small ? bits : 64;
    for (std::uint64_t k = 0; k < singles; ++k) {
      FrameWire x = clean;
      flip_wire_bit(x, small ? k : rng.uniform(bits));
      v.require(!decode_frame(x).ok(), "single-bit flip undetected");
    }
    for (int k = 0; k < 32; ++k) {
      const auto len = 1 + rng.uniform(std::min<std::uint64_t>(16, bits));
      const auto start = rng.uniform(bits - len + 1);
      FrameWire x = clean;
      flip_wire_bit(x, start);
      for (std::uint64_t b = 1; b + 1 < len; ++b) {
        if (rng.bernoulli(0.5)) flip_wire_bit(x, start + b);
      }
      if (len > 1) flip_wire_bit(x, start + len - 1);
      v.require(!decode_frame(x).ok(), "burst undetected");
    }
  }
  return v;
}

Verdict voter_truth_table() {
  Verdict v;
  int cases = 0;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      for (int c = 0; c < 4; ++c) {
        ++cases;
        const std::array<int, 1> ra{a}, rb{b}, rc{c};
        const auto r = tmr_vote<int>(ra, rb, rc);
        const bool majority = a == b || a == c || b == c;
        const int want = (a == b || a == c) ? a : (b == c ? b : a);
        v.require(r.values[0] == want, "wrong value");
        v.require((r.uncorrectable == 1) == !majority, "wrong uncorrectable flag");
        v.require((r.status[0] == VoteStatus::kUnanimous) == (a == b && b == c), "wrong status");
      }
    }
  }
  v.require(cases == 64, "case count");
  return v;
}

Verdict imr_dmr_zero_error() {
  Verdict v;
  VpuHarnessConfig base;  // 256 x 256, 8-bit
  const std::vector<InjectionKind> code{InjectionKind::kVpuInstr};
  const std::vector<InjectionKind> data{InjectionKind::kVpuDdrInput, InjectionKind::kVpuWorkerLocal};
  const std::vector<InjectionKind> all{InjectionKind::kVpuInstr, InjectionKind::kVpuDdrInput,
                                       InjectionKind::kVpuWorkerLocal};
  struct Case {
    const char* mode;
    const std::vector<InjectionKind>* kinds;
  };
  const std::array cases{Case{"IMR", &code}, Case{"DMR", &data}, Case{"IMR+DMR", &all}};
  double lo = 1.0, hi = 0.0;
  for (KernelKind k : {KernelKind::kConv2d, KernelKind::kBinning2d}) {
    for (std::size_t n : {3u, 6u, 9u, 12u}) {
      for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        for (const Case& c : cases) {
          VpuHarnessConfig cfg = base;
          cfg.kinds = *c.kinds;
          const VpuRunReport r = run_vpu(FtMode::parse(c.mode), k, n, seed, cfg);
          v.require(r.completed && r.error_rate == 0.0,
                    std::string(c.mode) + " error " + std::to_string(r.error_rate));
        }
        if (n == 3) {
          const VpuRunReport r = run_vpu(FtMode{}, k, 3, seed, base);
          lo = std::min(lo, r.error_rate);
          hi = std::max(hi, r.error_rate);
        }
      }
    }
  }
  const double lower = 2.0 / 12.0 * 0.5;
  const double upper = 3.0 / 12.0 + 3.0 * 2.0 / 256.0;  // one halo row each side per stripe
  v.require(lo >= lower && hi <= upper, fmt("no-FT 3-impaired range [%.4f, %.4f] outside [%.4f, ", lo, hi, lower) +
                                            fmt("%.4f]", upper));
  if (v.pass) v.detail = fmt("no-FT 3 impaired: %.1f-%.1f%%", 100 * lo, 100 * hi);
  return v;
}

Verdict nmr_groups() {
  Verdict v;
  VpuHarnessConfig cfg;
  const NmrConfig nmr = NmrConfig::make(3);
  double ratio_lo = 1e9, ratio_hi = 0.0;
  for (KernelKind k : {KernelKind::kConv2d, KernelKind::kBinning2d}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      std::vector<std::size_t> one_each;
      for (std::size_t g = 0; g < nmr.groups.size(); ++g) one_each.push_back(nmr.groups[g][(g + seed) % 3]);
      std::ranges::sort(one_each);
      const auto a = run_vpu(FtMode::parse("NMR3"), k, 0, seed, cfg, one_each);
      v.require(a.error_rate == 0.0, "one impaired per group left errors");

      const std::vector<std::size_t> pair{nmr.groups[0][0], nmr.groups[0][1]};
      const auto b = run_vpu(FtMode::parse("NMR3"), k, 0, seed, cfg, pair);
      v.require(b.error_rate > 0.0, "two impaired in one group gave no errors");
      // Group 0 owns the first quarter of the rows.
      v.require(b.error_rate <= 0.25 + 1e-12, "errors outside group 0's stripe");

      const auto c = run_vpu(FtMode::parse("NMR3"), k, 0, seed, cfg, std::vector<std::size_t>{});
      if (k == KernelKind::kConv2d) {
        const double ratio = static_cast<double>(c.timing.total()) / static_cast<double>(c.baseline_latency);
        ratio_lo = std::min(ratio_lo, ratio);
        ratio_hi = std::max(ratio_hi, ratio);
      }
    }
  }
  v.require(ratio_lo >= 2.8 && ratio_hi <= 3.3, fmt("latency ratio %.3f-%.3f outside [2.8, 3.3]", ratio_lo, ratio_hi));
  if (v.pass) v.detail = fmt("latency ratio %.3f", ratio_lo);
  return v;
}

Verdict table_ordering() {
  Verdict v;
  FpgaHarnessConfig cfg;  // 4 s, one injection per 4 ms, utilized area
  const auto archs = Architecture::table_rows();
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
  const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  const auto reports = run_matrix(archs, seeds, cfg, threads);
  for (const auto& r : reports) v.require(r.injections == 1000, "campaign size");
  const auto rows = summarize(reports);
  std::string medians;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    medians += (i ? " " : "") + fmt("%.1f", rows[i].correct);
    if (i > 0) {
      v.require(rows[i].correct >= rows[i - 1].correct,
                "not monotone at " + rows[i].arch.name() + ": " + fmt("%.1f < %.1f", rows[i].correct, rows[i - 1].correct));
    }
  }
  v.require(rows.back().correct > rows[rows.size() - 2].correct, "WD row not strictly highest");
  v.require(rows.front().correct < 5.0, fmt("No-FT correct %.1f%% >= 5%%", rows.front().correct));
  v.require(std::abs(rows.front().down - 92.0) <= 3.0 && std::abs(rows.front().erroneous - 8.0) <= 3.0,
            fmt("No-FT calibration %.1f/%.1f not within 92+-3 / 8+-3", rows.front().down, rows.front().erroneous));
  v.detail = (v.pass ? "" : v.detail + "; ") + "correct medians " + medians;
  return v;
}

Verdict repair_timing() {
  Verdict v;
  {
    Simulator sim;
    FpgaConfig cfg;
    cfg.arch = Architecture::parse("CMS");
    FpgaNode node(sim, cfg);
    const std::uint32_t frame = 5;
    std::uint32_t bit = 0;
    while (node.fabric().essential().contains({frame, bit})) ++bit;
    node.inject({frame, bit});
    node.start();
    sim.run_until(200 * kMillisecond);
    const auto& reps = node.scrubber().repairs();
    v.require(reps.size() == 1, "expected one repair");
    if (!reps.empty()) {
      v.require(reps[0].completed_at - reps[0].detected_at == 18 * kMillisecond, "repair not 18 ms after detection");
    }
  }
  v.require(reload_duration(670'000, 67'000'000) == 10 * kMillisecond, "670 KB reload not 10 ms");
  {
    Simulator sim;
    FpgaConfig cfg;
    cfg.arch = Architecture::parse("DPR+TMR");
    cfg.dpr_partial_bytes = 670'000;
    cfg.dpr_sweep_period = 0;
    FpgaNode node(sim, cfg);
    node.start();
    node.dpr().request_reload(Component::kFir1);
    sim.run_until(50 * kMillisecond);
    const auto& rl = node.dpr().reloads();
    v.require(rl.size() == 1 && rl[0].completed_at - rl[0].started_at == 10 * kMillisecond,
              "end-to-end 670 KB reload not 10 ms");
  }
  {
    VpuHarnessConfig cfg;
    const auto r = run_vpu(FtMode::parse("IMR"), KernelKind::kConv2d, 3, 1, cfg);
    v.require(r.timing.reschedule == 40 * kMillisecond, "reschedule overhead not 40 ms");
    v.require(r.timing.crc_check > 0 && r.timing.crc_check < 10 * kMillisecond, "CRC check not under 10 ms");
  }
  return v;
}

Verdict icap_exclusivity() {
  Verdict v;
  Simulator sim;
  FpgaConfig cfg;
  cfg.arch = Architecture::parse("CMS+DPR+TMR");
  cfg.scrub.frame_repair_latency = 1 * kMillisecond;
  cfg.dpr_sweep_period = 200 * kMicrosecond;
  FpgaNode node(sim, cfg);
  // Controllers must survive the stress so both keep contending.
  const auto& lay = node.fabric().layout();
  std::vector<std::uint32_t> frames;
  for (const auto& r : lay.regions()) {
    if (r.id == Component::kCmsCtrl || r.id == Component::kDprCtrl) continue;
    for (std::uint32_t f = r.first_frame; f < r.first_frame + r.frame_count; ++f) frames.push_back(f);
  }
  SeededRng rng(99);
  node.start();
  SimTime t = 0;
  std::uint64_t overlaps = 0;
  while (node.icap().releases() < 10'000 && t < 120 * kSecond) {
    t += 500 * kMicrosecond;
    sim.run_until(t);
    node.inject({frames[rng.uniform(frames.size())], static_cast<std::uint32_t>(rng.uniform(kFrameBits))});
    if (t % (4 * kMillisecond) == 0) node.checkpoint();
  }
  std::vector<std::pair<SimTime, SimTime>> spans;
  for (const auto& r : node.dpr().reloads()) spans.emplace_back(r.started_at, r.completed_at);
  for (const auto& r : node.scrubber().repairs()) {
    spans.emplace_back(r.completed_at - cfg.scrub.frame_repair_latency, r.completed_at);
  }
  std::ranges::sort(spans);
  for (std::size_t i = 1; i < spans.size(); ++i) overlaps += spans[i - 1].second > spans[i].first;
  v.require(node.icap().releases() >= 10'000, "fewer than 10^4 acquire/release pairs");
  v.require(!node.scrubber().repairs().empty() && !node.dpr().reloads().empty(), "one side never ran");
  v.require(overlaps == 0, std::to_string(overlaps) + " overlapping grants");
  v.detail += fmt("%.0f pairs, %.0f repairs, %.0f reloads", static_cast<double>(node.icap().releases()),
                  static_cast<double>(node.scrubber().repairs().size()),
                  static_cast<double>(node.dpr().reloads().size()));
  return v;
}

Verdict reliability_model() {
  Verdict v;
  for (double lambda : {0.5, 3.0, 40.0}) {
    SeededRng rng(static_cast<std::uint64_t>(lambda * 1000));
    std::vector<WindowSample> w;
    SimTime t = 0;
    for (int i = 0; i < 10'000; ++i) {
      const auto up = static_cast<SimTime>(std::llround(rng.exponential(lambda) * kSecond)) + 1;
      w.push_back({t, t + up, WindowClass::kCorrect});
      t += up;
      w.push_back({t, t + 10 * kMillisecond, WindowClass::kDown});
      t += 10 * kMillisecond;
    }
    const ReliabilityModel m = fit_lambda(classify_timeline(w));
    v.require(std::abs(m.lambda - lambda) <= 0.1 * lambda, fmt("lambda %.3f fitted as %.3f", lambda, m.lambda));
    for (const auto& [ts, r] : m.curve) {
      v.require(std::abs(r - std::exp(-m.lambda * ts)) <= 1e-12, "curve deviates from closed form");
    }
  }
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  Verdict v;
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "seusim_acceptance";
  fs::remove_all(root);
  auto same = [&](const char* tag, const std::function<void(const fs::path&)>& emit) {
    emit(root / tag / "a");
    emit(root / tag / "b");
    for (const auto& e : fs::directory_iterator(root / tag / "a")) {
      const auto other = root / tag / "b" / e.path().filename();
      v.require(fs::exists(other) && slurp(e.path()) == slurp(other),
                std::string(tag) + "/" + e.path().filename().string() + " differs");
    }
  };
  FpgaHarnessConfig fcfg;
  fcfg.campaign.duration = 1 * kSecond;
  same("fpga", [&](const fs::path& d) {
    emit_fpga_report(d, run_matrix(Architecture::table_rows(), {1, 2}, fcfg, 4));
  });
  VpuHarnessConfig vcfg;
  vcfg.width = 128;
  vcfg.height = 128;
  vcfg.kinds = {InjectionKind::kVpuInstr, InjectionKind::kVpuDdrInput, InjectionKind::kVpuWorkerLocal,
                InjectionKind::kVpuSharedVar};
  same("vpu", [&](const fs::path& d) { emit_vpu_report(d, run_vpu_matrix({1, 2}, vcfg)); });
  LinkHarnessConfig lcfg;
  lcfg.campaign.targets = {{InjectionKind::kLinkBit, 1.0}};
  lcfg.campaign.duration = 200 * kMillisecond;
  same("link", [&](const fs::path& d) { emit_link_report(d, {run_link(1, lcfg), run_link(2, lcfg)}); });
  fs::remove_all(root);
  return v;
}

}  // namespace

int main() {
  criterion(1, "CRC bit-exactness", 1.0, crc_exactness);
  criterion(2, "frame-link error detection", 30.0, frame_detection);
  criterion(3, "voter truth table", 1.0, voter_truth_table);
  criterion(4, "IMR/DMR zero-error guarantee", 120.0, imr_dmr_zero_error);
  criterion(5, "NMR group property and latency", 60.0, nmr_groups);
  criterion(6, "Table-I ordering (scaled)", 300.0, table_ordering);
  criterion(7, "repair timing accounting", 10.0, repair_timing);
  criterion(8, "ICAP exclusivity", 60.0, icap_exclusivity);
  criterion(9, "reliability model", 10.0, reliability_model);
  criterion(10, "determinism", 120.0, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
