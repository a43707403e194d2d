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

// CRC-footer frame protocol used on the CIF (FPGA->VPU) and LCD (VPU->FPGA)
// pixel links. Each frame carries one extra footer row whose first pixel(s)
// hold a CRC-16-CCITT (poly 0x1021, init 0, unreflected, no final XOR) over
// the active rows; the rest of the footer is zero.
//
// The CRC input is the canonical serialization: row-major, each pixel
// big-endian in 1, 2 or 3 bytes for depth 8, 16 or 24.

#ifndef SEUSIM_FRAME_LINK_HPP_
#define SEUSIM_FRAME_LINK_HPP_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "seusim/sim_engine.hpp"

namespace seusim {

using Crc16 = std::uint16_t;

class FrameError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class PixelDepth : std::uint8_t { k8 = 8, k16 = 16, k24 = 24 };

constexpr unsigned bits_of(PixelDepth d) { return static_cast<unsigned>(d); }
constexpr unsigned bytes_of(PixelDepth d) { return bits_of(d) / 8; }
PixelDepth depth_from_bits(unsigned bits);

struct PixelFrame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  PixelDepth depth = PixelDepth::k8;
  std::vector<std::uint32_t> pixels;  // row-major, width * height

  PixelFrame() = default;
  PixelFrame(std::uint32_t w, std::uint32_t h, PixelDepth d)
      : width(w), height(h), depth(d), pixels(std::size_t{w} * h, 0) {}

  std::uint32_t& at(std::uint32_t x, std::uint32_t y) {
    return pixels[std::size_t{y} * width + x];
  }
  std::uint32_t at(std::uint32_t x, std::uint32_t y) const {
    return pixels[std::size_t{y} * width + x];
  }
  std::uint32_t max_value() const {
    return static_cast<std::uint32_t>((std::uint64_t{1} << bits_of(depth)) - 1);
  }
  // Throws FrameError when geometry or pixel range is inconsistent.
  void validate() const;

  bool operator==(const PixelFrame&) const = default;
};

// Active rows plus one footer row (the last `width` pixels of `rows`).
struct FrameWire {
  std::uint32_t width = 0;
  std::uint32_t height = 0;  // active rows, footer excluded
  PixelDepth depth = PixelDepth::k8;
  std::vector<std::uint32_t> rows;  // (height + 1) * width

  std::size_t total_pixels() const { return rows.size(); }
  std::uint64_t total_bits() const {
    return std::uint64_t{rows.size()} * bits_of(depth);
  }
  std::span<const std::uint32_t> footer() const;

  bool operator==(const FrameWire&) const = default;
};

struct DecodeResult {
  PixelFrame frame;
  bool crc_ok = false;
  // Footer pixels past the CRC field must be zero. They are outside the CRC
  // domain, so this is checked and reported separately.
  bool padding_ok = false;
  Crc16 received_crc = 0;
  Crc16 computed_crc = 0;

  bool ok() const { return crc_ok && padding_ok; }
};

// Table-driven CRC-16-CCITT with init 0 (the XMODEM variant).
Crc16 crc16_ccitt(std::span<const std::uint8_t> bytes);
inline Crc16 crc16_ccitt(std::string_view text) {
  return crc16_ccitt(std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                               text.size()));
}

// Incremental CRC calculator fed one pixel at a time, one instance per pixel
// depth, the way the link hardware computes the footer on the fly.
class PixelCrc {
 public:
  explicit PixelCrc(PixelDepth depth) : depth_(depth) {}
  void reset() { crc_ = 0; }
  void push(std::uint32_t pixel);
  Crc16 value() const { return crc_; }
  PixelDepth depth() const { return depth_; }

 private:
  PixelDepth depth_;
  Crc16 crc_ = 0;
};

std::vector<std::uint8_t> serialize_pixels(const PixelFrame& frame);
void serialize_pixels_into(std::span<const std::uint32_t> pixels,
                           PixelDepth depth, std::vector<std::uint8_t>& out);
std::vector<std::uint32_t> deserialize_pixels(std::span<const std::uint8_t> bytes,
                                              PixelDepth depth);

// Minimum width able to carry the CRC footer at this depth.
constexpr std::uint32_t min_width(PixelDepth d) { return d == PixelDepth::k8 ? 2 : 1; }

FrameWire encode_frame(const PixelFrame& frame);
DecodeResult decode_frame(const FrameWire& wire);

// Bit addressing over the wire: pixel index = bit / depth, MSB first within
// the pixel.
void flip_wire_bit(FrameWire& wire, std::uint64_t bit);
// Bit index of the first footer bit.
std::uint64_t footer_bit_offset(const FrameWire& wire);

// Golden dump: "width height depth" header, then one line of space-separated
// fixed-width lowercase hex pixels per row; footer last.
std::string dump_wire(const FrameWire& wire);
FrameWire parse_wire_dump(std::string_view text);

enum class LinkId : std::uint8_t { kCif, kLcd };
std::string_view link_name(LinkId id);

struct LinkConfig {
  std::uint64_t bits_per_second = 0;

  // One pixel per clock on a parallel bus.
  static LinkConfig from_pixel_clock(std::uint64_t hz, PixelDepth depth) {
    return {hz * bits_of(depth)};
  }
};

// Transfer time rounded up to whole microseconds.
SimTime transfer_latency(std::uint64_t bits, const LinkConfig& cfg);

struct LinkStatus {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t crc_failures = 0;
  std::uint64_t padding_violations = 0;
  Crc16 last_received_crc = 0;
  Crc16 last_computed_crc = 0;
};

// Ordered, lossless frame link. Frames are serialized one after another, so
// delivery order equals send order. Bits of a frame can be flipped while it
// is in flight.
class FrameLink {
 public:
  using DeliveryHandler = std::function<void(const DecodeResult&, SimTime)>;

  FrameLink(Simulator& sim, LinkId id, LinkConfig cfg, DeliveryHandler on_delivery);

  // Throws FrameError for an empty wire.
  EventId transmit(FrameWire wire, SimTime at);

  // Flips one bit of the frame at the head of the link. Returns false if no
  // frame is in flight.
  bool corrupt_in_flight(std::uint64_t bit);
  std::size_t in_flight() const { return in_flight_.size(); }
  const FrameWire* head() const;

  LinkId id() const { return id_; }
  const LinkStatus& status() const { return status_; }
  const LinkConfig& config() const { return cfg_; }

 private:
  void deliver();

  Simulator& sim_;
  LinkId id_;
  LinkConfig cfg_;
  DeliveryHandler on_delivery_;
  std::deque<FrameWire> in_flight_;
  SimTime busy_until_ = 0;
  LinkStatus status_;
};

}  // namespace seusim

#endif  // SEUSIM_FRAME_LINK_HPP_
