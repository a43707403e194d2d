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

#include "seusim/frame_link.hpp"

#include <gtest/gtest.h>

#include <array>
#include <string>
#include <vector>

#include "seusim/sim_engine.hpp"

namespace seusim {
namespace {

// Shift-register reference: one bit at a time, MSB first.
Crc16 crc_bitwise(const std::vector<std::uint8_t>& bytes) {
  std::uint16_t reg = 0;
  for (std::uint8_t b : bytes) {
    for (int i = 7; i >= 0; --i) {
      const bool in = (b >> i) & 1;
      const bool top = reg & 0x8000;
      reg = static_cast<std::uint16_t>(reg << 1);
      if (in != top) reg ^= 0x1021;
    }
  }
  return reg;
}

PixelFrame random_frame(std::uint32_t w, std::uint32_t h, PixelDepth d, SeededRng& rng) {
  PixelFrame f(w, h, d);
  for (auto& p : f.pixels) p = static_cast<std::uint32_t>(rng.uniform(std::uint64_t{f.max_value()} + 1));
  return f;
}

TEST(Crc16, CheckValue) {
  EXPECT_EQ(crc16_ccitt("123456789"), 0x31C3);
  EXPECT_EQ(crc16_ccitt(""), 0x0000);
}

TEST(Crc16, MatchesBitSerialOracle) {
  SeededRng rng(42);
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::uint8_t> bytes(rng.uniform(300));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.uniform(256));
    ASSERT_EQ(crc16_ccitt(bytes), crc_bitwise(bytes)) << "case " << i;
  }
}

TEST(PixelCrc, IncrementalEqualsBulk) {
  SeededRng rng(3);
  for (PixelDepth d : {PixelDepth::k8, PixelDepth::k16, PixelDepth::k24}) {
    PixelFrame f = random_frame(13, 7, d, rng);
    PixelCrc inc(d);
    for (auto p : f.pixels) inc.push(p);
    EXPECT_EQ(inc.value(), crc16_ccitt(serialize_pixels(f)));
  }
}

TEST(Serialize, BigEndianPerDepth) {
  PixelFrame f(2, 1, PixelDepth::k24);
  f.pixels = {0x123456, 0xABCDEF};
  EXPECT_EQ(serialize_pixels(f), (std::vector<std::uint8_t>{0x12, 0x34, 0x56, 0xAB, 0xCD, 0xEF}));
  EXPECT_EQ(deserialize_pixels(serialize_pixels(f), PixelDepth::k24), f.pixels);
}

TEST(FrameCodec, FooterLayout) {
  PixelFrame f(4, 2, PixelDepth::k8);
  f.pixels = {1, 2, 3, 4, 5, 6, 7, 8};
  FrameWire w = encode_frame(f);
  const Crc16 crc = crc_bitwise({1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(w.rows.size(), 12u);
  EXPECT_EQ(w.footer()[0], crc >> 8u);
  EXPECT_EQ(w.footer()[1], crc & 0xFFu);
  EXPECT_EQ(w.footer()[2], 0u);
  EXPECT_EQ(w.footer()[3], 0u);

  PixelFrame g(3, 1, PixelDepth::k16);
  g.pixels = {0x0102, 0x0304, 0x0506};
  EXPECT_EQ(encode_frame(g).footer()[0], crc_bitwise({1, 2, 3, 4, 5, 6}));
}

TEST(FrameCodec, RejectsBadGeometry) {
  EXPECT_THROW(encode_frame(PixelFrame(1, 4, PixelDepth::k8)), FrameError);
  EXPECT_THROW(encode_frame(PixelFrame(4, 0, PixelDepth::k8)), FrameError);
  PixelFrame f(2, 2, PixelDepth::k8);
  f.pixels[0] = 256;
  EXPECT_THROW(encode_frame(f), FrameError);
  FrameWire w = encode_frame(PixelFrame(2, 2, PixelDepth::k8));
  w.rows.pop_back();
  EXPECT_THROW(decode_frame(w), FrameError);
}

TEST(FrameCodec, RoundTripAllDepths) {
  SeededRng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const PixelDepth d = std::array{PixelDepth::k8, PixelDepth::k16, PixelDepth::k24}[i % 3];
    const auto w = static_cast<std::uint32_t>(2 + rng.uniform(40));
    const auto h = static_cast<std::uint32_t>(1 + rng.uniform(40));
    PixelFrame f = random_frame(w, h, d, rng);
    DecodeResult r = decode_frame(encode_frame(f));
    ASSERT_TRUE(r.crc_ok);
    ASSERT_TRUE(r.padding_ok);
    ASSERT_EQ(r.frame, f);
  }
}

// Bits covered by the CRC (active rows and the CRC field) flip crc_ok; the
// zero padding is checked on its own.
bool in_crc_field(const FrameWire& w, std::uint64_t bit) {
  const std::uint64_t foot = footer_bit_offset(w);
  if (bit < foot) return true;
  const std::uint64_t rel = bit - foot;
  switch (w.depth) {
    case PixelDepth::k8: return rel < 16;
    case PixelDepth::k16: return rel < 16;
    case PixelDepth::k24: return rel >= 8 && rel < 24;
  }
  return false;
}

TEST(FrameCodec, EverySingleBitFlipDetected) {
  SeededRng rng(5);
  for (PixelDepth d : {PixelDepth::k8, PixelDepth::k16, PixelDepth::k24}) {
    for (std::uint32_t size : {2u, 5u, 16u}) {
      const FrameWire clean = encode_frame(random_frame(size, size, d, rng));
      for (std::uint64_t bit = 0; bit < clean.total_bits(); ++bit) {
        FrameWire w = clean;
        flip_wire_bit(w, bit);
        DecodeResult r = decode_frame(w);
        ASSERT_FALSE(r.ok()) << "bit " << bit;
        if (in_crc_field(w, bit)) {
          ASSERT_FALSE(r.crc_ok) << "bit " << bit;
        } else {
          ASSERT_FALSE(r.padding_ok) << "bit " << bit;
        }
      }
    }
  }
}

TEST(FrameCodec, BurstsUpTo16BitsDetected) {
  SeededRng rng(9);
  for (PixelDepth d : {PixelDepth::k8, PixelDepth::k16, PixelDepth::k24}) {
    const FrameWire clean = encode_frame(random_frame(64, 48, d, rng));
    for (int trial = 0; trial < 2000; ++trial) {
      const auto len = 1 + rng.uniform(16);
      const auto start = rng.uniform(clean.total_bits() - len + 1);
      FrameWire w = clean;
      // Burst: first and last bit flipped, interior random.
      flip_wire_bit(w, start);
      for (std::uint64_t b = 1; b + 1 < len; ++b) {
        if (rng.bernoulli(0.5)) flip_wire_bit(w, start + b);
      }
      if (len > 1) flip_wire_bit(w, start + len - 1);
      ASSERT_FALSE(decode_frame(w).ok()) << "start " << start << " len " << len;
    }
  }
}

TEST(FrameCodec, PaddingFlipLeavesCrcIntact) {
  PixelFrame f(8, 2, PixelDepth::k16);
  FrameWire w = encode_frame(f);
  flip_wire_bit(w, footer_bit_offset(w) + 16 * 3 + 2);  // pixel 3 of the footer
  DecodeResult r = decode_frame(w);
  EXPECT_TRUE(r.crc_ok);
  EXPECT_FALSE(r.padding_ok);
  EXPECT_FALSE(r.ok());
}

TEST(FrameCodec, FlipBitIsMsbFirst) {
  FrameWire w = encode_frame(PixelFrame(2, 1, PixelDepth::k8));
  flip_wire_bit(w, 0);
  EXPECT_EQ(w.rows[0], 0x80u);
  flip_wire_bit(w, 15);
  EXPECT_EQ(w.rows[1], 0x01u);
  EXPECT_THROW(flip_wire_bit(w, w.total_bits()), FrameError);
}

TEST(FrameCodec, DumpRoundTrip) {
  SeededRng rng(1);
  FrameWire w = encode_frame(random_frame(3, 2, PixelDepth::k16, rng));
  const std::string text = dump_wire(w);
  EXPECT_EQ(text.substr(0, 7), "3 2 16\n");
  EXPECT_EQ(parse_wire_dump(text), w);
}

TEST(Link, LatencyRoundsUp) {
  EXPECT_EQ(transfer_latency(1, {1'000'000}), 1u);
  EXPECT_EQ(transfer_latency(1'000'001, {1'000'000}), 1'000'001u);
  EXPECT_EQ(transfer_latency(3, {2'000'000}), 2u);
  EXPECT_EQ(LinkConfig::from_pixel_clock(27'000'000, PixelDepth::k16).bits_per_second, 432'000'000u);
}

TEST(Link, DeliversInOrderBackToBack) {
  Simulator sim;
  std::vector<std::pair<SimTime, std::uint32_t>> got;
  FrameLink link(sim, LinkId::kCif, {1'000'000}, [&](const DecodeResult& r, SimTime t) {
    got.emplace_back(t, r.frame.pixels[0]);
  });
  for (std::uint32_t i = 0; i < 3; ++i) {
    PixelFrame f(4, 4, PixelDepth::k8);
    f.pixels[0] = i;
    link.transmit(encode_frame(f), 0);
  }
  EXPECT_EQ(link.in_flight(), 3u);
  sim.run_until(1000);
  ASSERT_EQ(got.size(), 3u);
  // 20 pixels * 8 bits at 1 Mbit/s = 160 us each.
  EXPECT_EQ(got[0], (std::pair<SimTime, std::uint32_t>{160, 0}));
  EXPECT_EQ(got[1], (std::pair<SimTime, std::uint32_t>{320, 1}));
  EXPECT_EQ(got[2], (std::pair<SimTime, std::uint32_t>{480, 2}));
  EXPECT_EQ(link.status().delivered, 3u);
  EXPECT_EQ(link.status().crc_failures, 0u);
}

TEST(Link, InFlightCorruptionCounted) {
  Simulator sim;
  int bad = 0;
  FrameLink link(sim, LinkId::kLcd, {1'000'000}, [&](const DecodeResult& r, SimTime) { bad += !r.crc_ok; });
  EXPECT_FALSE(link.corrupt_in_flight(0));
  link.transmit(encode_frame(PixelFrame(4, 4, PixelDepth::k8)), 0);
  EXPECT_TRUE(link.corrupt_in_flight(3));
  sim.run_until(1000);
  EXPECT_EQ(bad, 1);
  EXPECT_EQ(link.status().crc_failures, 1u);
  EXPECT_THROW(link.transmit(FrameWire{}, sim.now()), FrameError);
}

}  // namespace
}  // namespace seusim
