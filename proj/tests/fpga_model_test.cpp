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

#include "seusim/fpga_model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

namespace seusim {
namespace {

FpgaConfig config_for(std::string_view arch) {
  FpgaConfig cfg;
  cfg.arch = Architecture::parse(arch);
  return cfg;
}

// First bit of `frame` that is not essential.
ConfigBitAddress nonessential_bit(const FpgaFabric& f, std::uint32_t frame) {
  for (std::uint32_t b = 0; b < kFrameBits; ++b) {
    if (!f.essential().contains({frame, b})) return {frame, b};
  }
  ADD_FAILURE() << "frame " << frame << " fully essential";
  return {frame, 0};
}

TEST(WordEcc, SyndromeLocatesSingleFlip) {
  const std::uint32_t w = 0xDEADBEEF;
  for (unsigned pos = 0; pos < 32; ++pos) {
    const std::uint8_t d = word_ecc(w) ^ word_ecc(w ^ (1u << pos));
    EXPECT_EQ(d, 0x40 | (pos + 1));
  }
}

TEST(ConfigMemory, EccCorrectsSingleBitPerWord) {
  SeededRng rng(1);
  ConfigMemory m = ConfigMemory::random(4, rng);
  m.flip_bit({2, 5});
  m.flip_bit({2, 100});
  const FrameCheck chk = m.check_frame(2);
  EXPECT_TRUE(chk.crc_mismatch);
  EXPECT_EQ(chk.correctable_words, (std::vector<std::uint32_t>{0, 3}));
  EccOutcome e = m.correct_frame(2);
  EXPECT_EQ(e.corrected_bits, 2u);
  EXPECT_TRUE(e.crc_ok_after);
  EXPECT_TRUE(m.frame_matches_golden(2));
}

TEST(ConfigMemory, EccFlagsDoubleFlipInWord) {
  SeededRng rng(2);
  ConfigMemory m = ConfigMemory::random(2, rng);
  m.flip_bit({1, 0});
  m.flip_bit({1, 7});
  const FrameCheck chk = m.check_frame(1);
  EXPECT_TRUE(chk.correctable_words.empty());
  EXPECT_EQ(chk.uncorrectable_words, (std::vector<std::uint32_t>{0}));
  EccOutcome e = m.correct_frame(1);
  EXPECT_EQ(e.corrected_bits, 0u);
  EXPECT_FALSE(e.crc_ok_after);
  m.restore_frame(1);
  EXPECT_FALSE(m.check_frame(1).damaged());
}

TEST(ConfigMemory, GoldenImmuneToFlips) {
  SeededRng rng(3);
  ConfigMemory m = ConfigMemory::random(8, rng);
  const auto digest = m.golden_digest();
  SeededRng r2(4);
  for (int i = 0; i < 500; ++i) {
    m.flip_bit(ConfigBitAddress::from_flat(r2.uniform(8 * kFrameBits)));
  }
  EXPECT_EQ(m.golden_digest(), digest);
  m.restore_all();
  EXPECT_TRUE(m.damaged_frames().empty());
}

TEST(ConfigBitAddress, FlatRoundTrip) {
  const ConfigBitAddress a{17, 3000};
  EXPECT_EQ(a.flat(), 17u * 3232u + 3000u);
  EXPECT_EQ(ConfigBitAddress::from_flat(a.flat()), a);
}

TEST(Architecture, TableRowsAndParse) {
  const auto rows = Architecture::table_rows();
  std::vector<std::string> names;
  for (const auto& a : rows) names.push_back(a.name());
  EXPECT_EQ(names, (std::vector<std::string>{"No FT", "TMR", "DPR", "CMS", "DPR+TMR", "CMS+TMR",
                                             "CMS+DPR+TMR", "CMS+DPR+TMR+WD"}));
  EXPECT_EQ(Architecture::parse("tmr+cms"), Architecture::parse("CMS+TMR"));
  EXPECT_EQ(Architecture::parse("none"), Architecture{});
  EXPECT_THROW(Architecture::parse("ECC"), std::invalid_argument);
}

TEST(FabricLayout, RegionsContiguousAndDisjoint) {
  for (const auto& arch : Architecture::table_rows()) {
    FabricLayout l = FabricLayout::build(arch, FabricConfig{});
    std::uint32_t next = 0;
    for (const auto& r : l.regions()) {
      EXPECT_EQ(r.first_frame, next);
      next += r.frame_count;
      for (std::uint32_t f = r.first_frame; f < next; ++f) EXPECT_EQ(l.owner_of_frame(f), r.id);
    }
    EXPECT_EQ(l.utilized_frames(), next);
    EXPECT_FALSE(l.owner_of_frame(next).has_value());
    EXPECT_EQ(l.has(Component::kFir1), arch.tmr);
    EXPECT_EQ(l.has(Component::kCmsCtrl), arch.cms);
  }
}

TEST(FpgaFabric, HealthTracksEssentialFlips) {
  FpgaFabric f(FabricLayout::build(Architecture{}, FabricConfig{}), 9);
  const auto& bits = f.essential().bits(Component::kFir0);
  ASSERT_FALSE(bits.empty());
  FlipEffect e = f.flip(bits[0]);
  EXPECT_TRUE(e.essential);
  EXPECT_FALSE(f.health(Component::kFir0).healthy);
  const auto tag = f.health(Component::kFir0).corruption_tag;
  EXPECT_NE(tag, 0u);
  f.flip(bits[0]);  // flipping back heals
  EXPECT_TRUE(f.health(Component::kFir0).healthy);

  const ConfigBitAddress ne = nonessential_bit(f, 0);
  e = f.flip(ne);
  EXPECT_FALSE(e.essential);
  EXPECT_TRUE(f.health(Component::kFir0).healthy);
  EXPECT_TRUE(f.memory().check_frame(0).damaged());
}

TEST(FirFilter, HandComputed) {
  const std::vector<std::int64_t> in{1, 2, 3, 0, -1};
  const std::vector<std::int64_t> h{2, -1, 3};
  // y0=2, y1=4-1, y2=6-2+3, y3=0-3+6, y4=-2-0+9
  EXPECT_EQ(fir_filter(ComponentHealth{Component::kFir0}, in, h),
            (std::vector<std::int64_t>{2, 3, 7, 3, 7}));
  ComponentHealth bad{Component::kFir0, false, 77, 1};
  auto y = fir_filter(bad, in, h);
  EXPECT_NE(y, (std::vector<std::int64_t>{2, 3, 7, 3, 7}));
}

HealthLookup lookup_with(Component broken, std::uint64_t tag) {
  return [=](Component c) {
    ComponentHealth h{c};
    if (c == broken) {
      h.healthy = false;
      h.corruption_tag = tag;
      h.flipped_bits = 1;
    }
    return h;
  };
}

// A tag whose pattern does (hang=true) or does not hang.
std::uint64_t tag_with(bool hang, double fraction) {
  for (std::uint64_t t = 1;; ++t) {
    if (CorruptionMask(t).hangs(fraction) == hang) return t;
  }
}

TEST(TmrPipeline, MasksOneReplica) {
  const std::vector<std::int64_t> in{5, -3, 8, 1};
  const std::vector<std::int64_t> h{1, 2};
  const auto golden = fir_filter(ComponentHealth{Component::kFir0}, in, h);
  for (bool hang : {false, true}) {
    PipelineOutcome o = run_tmr_pipeline(lookup_with(Component::kFir1, tag_with(hang, 0.5)), in, h, 0.5);
    ASSERT_TRUE(o.output.has_value());
    EXPECT_EQ(*o.output, golden);
    EXPECT_EQ(o.repair_requests, std::vector<Component>{Component::kFir1});
  }
  PipelineOutcome hung = run_tmr_pipeline(lookup_with(Component::kVoterIn, tag_with(true, 0.5)), in, h, 0.5);
  EXPECT_FALSE(hung.output.has_value());
  PipelineOutcome wrong = run_tmr_pipeline(lookup_with(Component::kVoterIn, tag_with(false, 0.5)), in, h, 0.5);
  ASSERT_TRUE(wrong.output.has_value());
  EXPECT_NE(*wrong.output, golden);
}

TEST(IcapArbiter, SerializesOwners) {
  IcapArbiter icap;
  std::vector<std::string> order;
  EXPECT_EQ(icap.acquire(IcapOwner::kCms, [&] { order.push_back("cms"); }), IcapArbiter::Outcome::kGranted);
  EXPECT_EQ(icap.acquire(IcapOwner::kDpr, [&] { order.push_back("dpr"); }), IcapArbiter::Outcome::kQueued);
  EXPECT_THROW(icap.acquire(IcapOwner::kCms, [] {}), std::logic_error);
  EXPECT_THROW(icap.release(IcapOwner::kDpr), std::logic_error);
  icap.release(IcapOwner::kCms);
  EXPECT_EQ(icap.holder(), IcapOwner::kDpr);
  EXPECT_EQ(order, (std::vector<std::string>{"cms", "dpr"}));
}

TEST(IcapArbiter, RandomStressNeverDoubleGrants) {
  Simulator sim;
  IcapArbiter icap;
  SeededRng rng(8);
  int inside = 0;
  int worst = 0;
  std::uint64_t done = 0;
  std::function<void(IcapOwner)> cycle = [&](IcapOwner who) {
    icap.acquire(who, [&, who] {
      worst = std::max(worst, ++inside);
      sim.schedule_after(1 + rng.uniform(20), "t", "hold", [&, who] {
        --inside;
        icap.release(who);
        ++done;
        if (done < 20'000) sim.schedule_after(rng.uniform(5), "t", "again", [&, who] { cycle(who); });
      });
    });
  };
  cycle(IcapOwner::kCms);
  cycle(IcapOwner::kDpr);
  sim.run_until(10'000'000);
  EXPECT_GE(done, 10'000u);
  EXPECT_EQ(worst, 1);
  EXPECT_EQ(icap.grants(), icap.releases());
}

TEST(Scrubber, RepairsSingleFrame18msAfterDetection) {
  Simulator sim;
  FpgaNode node(sim, config_for("CMS"));
  const std::uint32_t frame = 3;
  node.inject(nonessential_bit(node.fabric(), frame));
  node.start();
  sim.run_until(100 * kMillisecond);
  ASSERT_EQ(node.scrubber().repairs().size(), 1u);
  const RepairRecord& r = node.scrubber().repairs()[0];
  EXPECT_EQ(r.frame, frame);
  // One frame checked per 100 us, starting at 100 us with frame 0.
  EXPECT_EQ(r.detected_at, (frame + 1) * 100u);
  EXPECT_EQ(r.completed_at - r.detected_at, 18 * kMillisecond);
  EXPECT_TRUE(node.fabric().memory().damaged_frames().empty());
}

TEST(Scrubber, DeadControllerRepairsNothing) {
  Simulator sim;
  FpgaNode node(sim, config_for("CMS"));
  const auto& ctrl = node.fabric().essential().bits(Component::kCmsCtrl);
  ASSERT_FALSE(ctrl.empty());
  node.inject(ctrl[0]);
  node.inject(nonessential_bit(node.fabric(), 0));
  node.start();
  sim.run_until(500 * kMillisecond);
  EXPECT_TRUE(node.scrubber().repairs().empty());
  EXPECT_EQ(node.fabric().memory().damaged_frames().size(), 2u);
}

TEST(Scrubber, EnhancedModeLeavesDoubleFlips) {
  Simulator sim;
  FpgaConfig cfg = config_for("CMS");
  cfg.scrub.mode = ScrubMode::kEnhancedRepair;
  FpgaNode node(sim, cfg);
  const std::uint32_t frame = node.fabric().layout().region(Component::kFir0)->first_frame;
  node.inject({frame, 0});
  node.inject({frame, 1});
  node.start();
  sim.run_until(50 * kMillisecond);
  EXPECT_TRUE(node.scrubber().repairs().empty());
  EXPECT_TRUE(node.scrubber().has_uncorrectable());
}

TEST(Dpr, ReloadDurationAt67MBs) {
  EXPECT_EQ(reload_duration(670'000, 67'000'000), 10 * kMillisecond);
  EXPECT_EQ(reload_duration(1, 67'000'000), 1u);
  EXPECT_EQ(reload_duration(0, 67'000'000), 0u);
}

TEST(Dpr, PartialBitstreamReloadTakes10ms) {
  Simulator sim;
  FpgaConfig cfg = config_for("DPR+TMR");
  cfg.dpr_partial_bytes = 670'000;
  cfg.dpr_sweep_period = 0;
  FpgaNode node(sim, cfg);
  const auto bit = node.fabric().essential().bits(Component::kFir2)[0];
  node.inject(bit);
  node.start();
  sim.run_until(1 * kMillisecond);
  CheckpointResult cp = node.checkpoint();
  EXPECT_EQ(cp.cls, WindowClass::kCorrect);  // masked by the vote
  EXPECT_EQ(cp.repair_requests, std::vector<Component>{Component::kFir2});
  sim.run_until(20 * kMillisecond);
  ASSERT_EQ(node.dpr().reloads().size(), 1u);
  const ReloadRecord& r = node.dpr().reloads()[0];
  EXPECT_EQ(r.region, Component::kFir2);
  EXPECT_EQ(r.completed_at - r.started_at, 10 * kMillisecond);
  EXPECT_TRUE(node.fabric().health(Component::kFir2).healthy);
}

TEST(Dpr, StaticLogicNotReconfigurable) {
  Simulator sim;
  FpgaNode node(sim, config_for("DPR+TMR"));
  EXPECT_FALSE(node.dpr().request_reload(Component::kVoterIn));
  EXPECT_FALSE(node.dpr().request_reload(Component::kDprCtrl));
  EXPECT_TRUE(node.dpr().request_reload(Component::kFir0));
}

TEST(Dpr, ScrubAndReloadShareIcap) {
  Simulator sim;
  FpgaConfig cfg = config_for("CMS+DPR+TMR");
  cfg.dpr_sweep_period = 1 * kMillisecond;
  FpgaNode node(sim, cfg);
  SeededRng rng(12);
  const std::uint32_t used = node.fabric().layout().utilized_frames();
  node.start();
  for (int i = 0; i < 200; ++i) {
    sim.run_until(sim.now() + 2 * kMillisecond);
    node.inject(ConfigBitAddress::from_flat(rng.uniform(std::uint64_t{used} * kFrameBits)));
  }
  EXPECT_GT(node.scrubber().repairs().size(), 0u);
  EXPECT_GT(node.dpr().reloads().size(), 0u);
  // Reload and repair spans never overlap.
  std::vector<std::pair<SimTime, SimTime>> spans;
  for (const auto& r : node.dpr().reloads()) spans.emplace_back(r.started_at, r.completed_at);
  for (const auto& r : node.scrubber().repairs()) {
    spans.emplace_back(r.completed_at - cfg.scrub.frame_repair_latency, r.completed_at);
  }
  std::ranges::sort(spans);
  for (std::size_t i = 1; i < spans.size(); ++i) EXPECT_LE(spans[i - 1].second, spans[i].first);
}

TEST(Watchdog, ExpiresWithoutKicks) {
  Simulator sim;
  int fired = 0;
  Watchdog wd(sim, 100, [&] { ++fired; });
  wd.arm();
  sim.run_until(90);
  wd.kick();
  sim.run_until(189);
  EXPECT_EQ(fired, 0);
  sim.run_until(190);
  EXPECT_EQ(fired, 1);
  EXPECT_FALSE(wd.armed());
}

TEST(Watchdog, ScrubbedHangNeedsNoReset) {
  Simulator sim;
  FpgaNode node(sim, config_for("CMS+DPR+TMR+WD"));
  node.start();
  node.inject(node.fabric().essential().bits(Component::kVoterIn).front());
  for (SimTime t = kMillisecond; t <= 300 * kMillisecond; t += kMillisecond) {
    sim.run_until(t);
    node.checkpoint();
  }
  EXPECT_EQ(node.stats().resets, 0u);
  EXPECT_TRUE(node.fabric().all_healthy());
}

TEST(Watchdog, UncorrectableDamageTriggersFullReset) {
  Simulator sim;
  FpgaNode node(sim, config_for("CMS+DPR+TMR+WD"));
  node.start();
  // Two flips in one 32-bit word defeat the ECC; enhanced repair reports it
  // and the heartbeat stops.
  const std::uint32_t frame = node.fabric().layout().region(Component::kVoterIn)->first_frame;
  node.inject({frame, 64});
  node.inject({frame, 65});
  SimTime t = 0;
  while (node.stats().resets == 0 && t < 400 * kMillisecond) {
    t += kMillisecond;
    sim.run_until(t);
    node.checkpoint();
  }
  EXPECT_EQ(node.stats().resets, 1u);
  EXPECT_TRUE(node.in_reset());
  EXPECT_EQ(node.checkpoint().cls, WindowClass::kDown);
  // Last heartbeat near the start, so expiry lands 100-110 ms in.
  EXPECT_GE(t, 100 * kMillisecond);
  EXPECT_LE(t, 111 * kMillisecond);
  sim.run_until(t + node.reset_duration());
  EXPECT_FALSE(node.in_reset());
  EXPECT_TRUE(node.fabric().memory().damaged_frames().empty());
  EXPECT_EQ(node.checkpoint().cls, WindowClass::kCorrect);
}

TEST(FpgaNode, NoInjectionsStayCorrect) {
  for (const auto& arch : Architecture::table_rows()) {
    Simulator sim;
    FpgaConfig cfg;
    cfg.arch = arch;
    FpgaNode node(sim, cfg);
    node.start();
    for (int i = 1; i <= 200; ++i) {
      sim.run_until(i * 4 * kMillisecond);
      ASSERT_EQ(node.checkpoint().cls, WindowClass::kCorrect) << arch.name();
    }
    EXPECT_EQ(node.stats().resets, 0u) << arch.name();
  }
}

}  // namespace
}  // namespace seusim
