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

#include <array>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace seusim {

namespace {

constexpr std::uint16_t kPoly = 0x1021;

constexpr std::array<std::uint16_t, 256> make_table() {
  std::array<std::uint16_t, 256> table{};
  for (unsigned i = 0; i < 256; ++i) {
    std::uint16_t r = static_cast<std::uint16_t>(i << 8);
    for (int b = 0; b < 8; ++b) {
      r = (r & 0x8000) ? static_cast<std::uint16_t>((r << 1) ^ kPoly)
                       : static_cast<std::uint16_t>(r << 1);
    }
    table[i] = r;
  }
  return table;
}

constexpr auto kTable = make_table();

inline std::uint16_t crc_byte(std::uint16_t crc, std::uint8_t byte) {
  return static_cast<std::uint16_t>((crc << 8) ^ kTable[((crc >> 8) ^ byte) & 0xFF]);
}

}  // namespace

PixelDepth depth_from_bits(unsigned bits) {
  switch (bits) {
    case 8: return PixelDepth::k8;
    case 16: return PixelDepth::k16;
    case 24: return PixelDepth::k24;
    default: throw FrameError("unsupported pixel depth " + std::to_string(bits));
  }
}

void PixelFrame::validate() const {
  if (width < min_width(depth)) {
    throw FrameError("frame width " + std::to_string(width) +
                     " cannot carry a CRC footer at depth " +
                     std::to_string(bits_of(depth)));
  }
  if (height == 0) throw FrameError("frame has no active rows");
  if (pixels.size() != std::size_t{width} * height) {
    throw FrameError("pixel count does not match geometry");
  }
  const std::uint32_t limit = max_value();
  for (std::uint32_t p : pixels) {
    if (p > limit) throw FrameError("pixel value exceeds depth");
  }
}

std::span<const std::uint32_t> FrameWire::footer() const {
  return std::span(rows).subspan(std::size_t{height} * width, width);
}

Crc16 crc16_ccitt(std::span<const std::uint8_t> bytes) {
  std::uint16_t crc = 0;
  for (std::uint8_t b : bytes) crc = crc_byte(crc, b);
  return crc;
}

void PixelCrc::push(std::uint32_t pixel) {
  for (int shift = static_cast<int>(bits_of(depth_)) - 8; shift >= 0; shift -= 8) {
    crc_ = crc_byte(crc_, static_cast<std::uint8_t>(pixel >> shift));
  }
}

void serialize_pixels_into(std::span<const std::uint32_t> pixels, PixelDepth depth,
                           std::vector<std::uint8_t>& out) {
  const unsigned n = bytes_of(depth);
  out.reserve(out.size() + pixels.size() * n);
  for (std::uint32_t p : pixels) {
    for (int shift = static_cast<int>(n - 1) * 8; shift >= 0; shift -= 8) {
      out.push_back(static_cast<std::uint8_t>(p >> shift));
    }
  }
}

std::vector<std::uint8_t> serialize_pixels(const PixelFrame& frame) {
  std::vector<std::uint8_t> out;
  serialize_pixels_into(frame.pixels, frame.depth, out);
  return out;
}

std::vector<std::uint32_t> deserialize_pixels(std::span<const std::uint8_t> bytes,
                                              PixelDepth depth) {
  const unsigned n = bytes_of(depth);
  if (bytes.size() % n != 0) throw FrameError("byte count not a multiple of pixel size");
  std::vector<std::uint32_t> out(bytes.size() / n);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t v = 0;
    for (unsigned k = 0; k < n; ++k) v = (v << 8) | bytes[i * n + k];
    out[i] = v;
  }
  return out;
}

FrameWire encode_frame(const PixelFrame& frame) {
  frame.validate();
  PixelCrc crc(frame.depth);
  for (std::uint32_t p : frame.pixels) crc.push(p);

  FrameWire wire{frame.width, frame.height, frame.depth, frame.pixels};
  wire.rows.resize(std::size_t{frame.height + 1} * frame.width, 0);
  auto footer = wire.rows.begin() + static_cast<std::ptrdiff_t>(std::size_t{frame.height} * frame.width);
  if (frame.depth == PixelDepth::k8) {
    footer[0] = crc.value() >> 8;
    footer[1] = crc.value() & 0xFF;
  } else {
    footer[0] = crc.value();
  }
  return wire;
}

DecodeResult decode_frame(const FrameWire& wire) {
  if (wire.width < min_width(wire.depth)) {
    throw FrameError("wire width too small for a CRC footer");
  }
  if (wire.height == 0 || wire.rows.size() != std::size_t{wire.height + 1} * wire.width) {
    throw FrameError("malformed wire geometry (footer missing)");
  }
  DecodeResult out;
  out.frame.width = wire.width;
  out.frame.height = wire.height;
  out.frame.depth = wire.depth;
  out.frame.pixels.assign(wire.rows.begin(),
                          wire.rows.begin() + static_cast<std::ptrdiff_t>(std::size_t{wire.height} * wire.width));

  PixelCrc crc(wire.depth);
  for (std::uint32_t p : out.frame.pixels) crc.push(p);
  out.computed_crc = crc.value();

  auto footer = wire.footer();
  std::size_t crc_pixels = 1;
  if (wire.depth == PixelDepth::k8) {
    out.received_crc = static_cast<Crc16>(((footer[0] & 0xFF) << 8) | (footer[1] & 0xFF));
    // Bits above the 8-bit pixel range cannot exist on the wire; treat them as
    // padding violations.
    out.padding_ok = (footer[0] >> 8) == 0 && (footer[1] >> 8) == 0;
    crc_pixels = 2;
  } else {
    out.received_crc = static_cast<Crc16>(footer[0] & 0xFFFF);
    out.padding_ok = (footer[0] >> 16) == 0;
  }
  for (std::size_t i = crc_pixels; i < footer.size(); ++i) {
    if (footer[i] != 0) out.padding_ok = false;
  }
  out.crc_ok = out.received_crc == out.computed_crc;
  return out;
}

void flip_wire_bit(FrameWire& wire, std::uint64_t bit) {
  const unsigned depth = bits_of(wire.depth);
  if (bit >= wire.total_bits()) throw FrameError("wire bit out of range");
  const std::size_t pixel = static_cast<std::size_t>(bit / depth);
  const unsigned within = static_cast<unsigned>(bit % depth);
  wire.rows[pixel] ^= 1U << (depth - 1 - within);
}

std::uint64_t footer_bit_offset(const FrameWire& wire) {
  return std::uint64_t{wire.height} * wire.width * bits_of(wire.depth);
}

std::string dump_wire(const FrameWire& wire) {
  std::string out = std::to_string(wire.width) + ' ' + std::to_string(wire.height) +
                    ' ' + std::to_string(bits_of(wire.depth)) + '\n';
  const int digits = static_cast<int>(bits_of(wire.depth) / 4);
  char buf[16];
  for (std::size_t r = 0; r <= wire.height; ++r) {
    for (std::size_t x = 0; x < wire.width; ++x) {
      if (x) out += ' ';
      std::snprintf(buf, sizeof buf, "%0*x", digits, wire.rows[r * wire.width + x]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

FrameWire parse_wire_dump(std::string_view text) {
  std::istringstream in{std::string(text)};
  FrameWire wire;
  unsigned depth_bits = 0;
  if (!(in >> wire.width >> wire.height >> depth_bits)) {
    throw FrameError("wire dump: bad header");
  }
  wire.depth = depth_from_bits(depth_bits);
  const std::size_t count = std::size_t{wire.height + 1} * wire.width;
  wire.rows.reserve(count);
  std::string token;
  while (in >> token) {
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v, 16);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      throw FrameError("wire dump: bad pixel '" + token + "'");
    }
    wire.rows.push_back(v);
  }
  if (wire.rows.size() != count) throw FrameError("wire dump: pixel count mismatch");
  return wire;
}

std::string_view link_name(LinkId id) { return id == LinkId::kCif ? "cif" : "lcd"; }

SimTime transfer_latency(std::uint64_t bits, const LinkConfig& cfg) {
  if (cfg.bits_per_second == 0) throw FrameError("link bitrate is zero");
  const std::uint64_t num = bits * kSecond;
  return (num + cfg.bits_per_second - 1) / cfg.bits_per_second;
}

FrameLink::FrameLink(Simulator& sim, LinkId id, LinkConfig cfg, DeliveryHandler on_delivery)
    : sim_(sim), id_(id), cfg_(cfg), on_delivery_(std::move(on_delivery)) {}

EventId FrameLink::transmit(FrameWire wire, SimTime at) {
  if (wire.rows.empty() || wire.width == 0) throw FrameError("zero-size frame");
  const SimTime start = std::max({at, busy_until_, sim_.now()});
  busy_until_ = start + transfer_latency(wire.total_bits(), cfg_);
  in_flight_.push_back(std::move(wire));
  ++status_.sent;
  return sim_.schedule(busy_until_, std::string(link_name(id_)), "deliver",
                       [this] { deliver(); });
}

bool FrameLink::corrupt_in_flight(std::uint64_t bit) {
  if (in_flight_.empty()) return false;
  flip_wire_bit(in_flight_.front(), bit % in_flight_.front().total_bits());
  return true;
}

const FrameWire* FrameLink::head() const {
  return in_flight_.empty() ? nullptr : &in_flight_.front();
}

void FrameLink::deliver() {
  FrameWire wire = std::move(in_flight_.front());
  in_flight_.pop_front();
  DecodeResult res = decode_frame(wire);
  ++status_.delivered;
  if (!res.crc_ok) ++status_.crc_failures;
  if (!res.padding_ok) ++status_.padding_violations;
  status_.last_received_crc = res.received_crc;
  status_.last_computed_crc = res.computed_crc;
  if (on_delivery_) on_delivery_(res, sim_.now());
}

}  // namespace seusim
