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

// seusim command-line front end.
//
//   seusim run     --campaign FILE --seed N [--arch NAME] --out DIR
//   seusim matrix  --campaign FILE [--archs A,B] [--seeds 1,2] [--threads N] --out DIR
//   seusim report  --in DIR|summary.json [--format csv|json]
//   seusim verify
//
// Exit codes: 0 success, 1 configuration error, 2 invariant violation.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seusim/campaign_harness.hpp"
#include "seusim/fault_injector.hpp"
#include "seusim/fpga_model.hpp"
#include "seusim/frame_link.hpp"
#include "seusim/voting.hpp"
#include "seusim/vpu_model.hpp"

namespace {

using namespace seusim;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kInvariant = 2;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void run_node(const CampaignFile& cf, const std::vector<std::uint64_t>& seeds,
              const std::vector<std::string>& archs, unsigned threads, const std::filesystem::path& out) {
  switch (cf.node) {
    case NodeKind::kFpga: {
      std::vector<Architecture> a = cf.archs;
      if (!archs.empty()) {
        a.clear();
        for (const auto& n : archs) a.push_back(Architecture::parse(n));
      }
      emit_fpga_report(out, run_matrix(a, seeds, cf.fpga, threads));
      break;
    }
    case NodeKind::kVpu: {
      VpuHarnessConfig v = cf.vpu;
      if (!archs.empty()) {
        v.modes.clear();
        for (const auto& n : archs) v.modes.push_back(FtMode::parse(n));
      }
      emit_vpu_report(out, run_vpu_matrix(seeds, v));
      break;
    }
    case NodeKind::kLink: {
      std::vector<LinkRunReport> reps;
      for (auto s : seeds) reps.push_back(run_link(s, cf.link));
      emit_link_report(out, reps);
      break;
    }
  }
}

// Quick self-checks against independent reference computations.
int verify() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "ok   " : "FAIL ") << what << "\n";
    failures += !ok;
  };

  auto bitwise_crc = [](std::string_view s) {
    std::uint16_t r = 0;
    for (unsigned char c : s) {
      for (int i = 7; i >= 0; --i) {
        const bool top = ((r >> 15) & 1) ^ ((c >> i) & 1);
        r = static_cast<std::uint16_t>(r << 1);
        if (top) r ^= 0x1021;
      }
    }
    return r;
  };
  check(crc16_ccitt(std::string_view("123456789")) == bitwise_crc("123456789"), "crc16 check value");

  int vote_ok = 0;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      for (int c = 0; c < 4; ++c) {
        const int x[] = {a}, y[] = {b}, z[] = {c};
        const auto v = tmr_vote<int>(x, y, z);
        const int expect = (a == b || a == c) ? a : (b == c ? b : a);
        const bool flagged = a != b && a != c && b != c;
        vote_ok += v.values[0] == expect && (v.uncorrectable == 1) == flagged;
      }
    }
  }
  check(vote_ok == 64, "tmr vote truth table");

  for (PixelDepth d : {PixelDepth::k8, PixelDepth::k16, PixelDepth::k24}) {
    const PixelFrame f = synthetic_image(16, 16, d, 7);
    FrameWire w = encode_frame(f);
    bool ok = decode_frame(w).ok() && decode_frame(w).frame.pixels == f.pixels;
    flip_wire_bit(w, 3);
    ok = ok && !decode_frame(w).crc_ok;
    check(ok, "frame round trip and flip detection at " + std::to_string(bits_of(d)) + " bits");
  }

  FunctionalityTimeline tl;
  tl.intervals = {{0, 10 * kSecond, WindowClass::kCorrect}, {10 * kSecond, 11 * kSecond, WindowClass::kDown}};
  tl.duration = 11 * kSecond;
  const auto m = fit_lambda(tl);
  check(std::abs(m.lambda - 0.1) < 1e-12 && std::abs(m.reliability(10.0) - std::exp(-1.0)) < 1e-12,
        "failure-rate fit closed form");

  FpgaHarnessConfig hc;
  hc.campaign.duration = 400 * kMillisecond;
  const auto r1 = run_fpga(Architecture::parse("CMS+DPR+TMR+WD"), 3, hc);
  const auto r2 = run_fpga(Architecture::parse("CMS+DPR+TMR+WD"), 3, hc);
  check(r1.log.text() == r2.log.text() && r1.timeline.intervals == r2.timeline.intervals,
        "repeatable FPGA campaign");

  VpuHarnessConfig vc;
  const auto v = run_vpu(FtMode::parse("IMR+DMR"), KernelKind::kConv2d, 6, 5, vc);
  check(v.error_rate == 0.0, "IMR+DMR output matches golden with 6 impaired workers");

  std::cout << (failures == 0 ? "verify: all checks passed" : "verify: failures detected") << "\n";
  return failures == 0 ? kOk : kInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seusim - fault-tolerant FPGA+VPU payload simulator"};
  app.require_subcommand(1);

  std::string campaign, out = "out", arch, archs, seeds, in, format = "csv";
  std::uint64_t seed = 1;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "single run");
  run->add_option("--campaign", campaign, "campaign JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "seed");
  run->add_option("--arch", arch, "architecture (FPGA) or FT mode (VPU)");
  run->add_option("--out", out, "output directory");

  auto* matrix = app.add_subcommand("matrix", "architectures x seeds");
  matrix->add_option("--campaign", campaign, "campaign JSON file")->required()->check(CLI::ExistingFile);
  matrix->add_option("--archs", archs, "comma-separated architectures (default: from file)");
  matrix->add_option("--seeds", seeds, "comma-separated seeds (default: from file)");
  matrix->add_option("--threads", threads, "worker threads (default: from file)");
  matrix->add_option("--out", out, "output directory");

  auto* report = app.add_subcommand("report", "render a summary");
  report->add_option("--in", in, "report directory or summary.json")->required();
  report->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* ver = app.add_subcommand("verify", "built-in self-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (ver->parsed()) return verify();
    if (report->parsed()) {
      std::filesystem::path p = in;
      if (std::filesystem::is_directory(p)) p /= "summary.json";
      std::cout << render_summary(p, format);
      return kOk;
    }
    const CampaignFile cf = load_campaign(campaign);
    if (run->parsed()) {
      run_node(cf, {seed}, arch.empty() ? std::vector<std::string>{} : std::vector<std::string>{arch}, 1, out);
    } else {
      std::vector<std::uint64_t> s = cf.seeds;
      if (!seeds.empty()) {
        s.clear();
        for (const auto& x : split_list(seeds)) s.push_back(std::stoull(x));
      }
      run_node(cf, s, split_list(archs), threads ? threads : cf.threads, out);
    }
    std::cout << "wrote " << out << "\n";
    return kOk;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
}
