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

#include <algorithm>
#include <bit>
#include <stdexcept>

#include "seusim/frame_link.hpp"

namespace seusim {

namespace {

constexpr std::array<std::string_view, kComponentCount> kComponentNames = {
    "fir_0", "fir_1", "fir_2", "voter_in", "voter_out", "dpr_ctrl", "cms_ctrl", "wd_uart"};

std::uint32_t load_word(std::span<const std::uint8_t> frame, std::size_t w) {
  return (std::uint32_t{frame[4 * w]} << 24) | (std::uint32_t{frame[4 * w + 1]} << 16) |
         (std::uint32_t{frame[4 * w + 2]} << 8) | std::uint32_t{frame[4 * w + 3]};
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view component_name(Component c) { return kComponentNames[index_of(c)]; }

std::optional<Component> parse_component(std::string_view name) {
  for (Component c : kAllComponents) {
    if (component_name(c) == name) return c;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

std::uint8_t word_ecc(std::uint32_t word) {
  std::uint8_t syndrome = 0;
  for (std::uint32_t w = word; w != 0; w &= w - 1) {
    syndrome ^= static_cast<std::uint8_t>(std::countr_zero(w) + 1);
  }
  const auto parity = static_cast<std::uint8_t>(std::popcount(word) & 1);
  return static_cast<std::uint8_t>((parity << 6) | syndrome);
}

ConfigMemory::ConfigMemory(std::vector<std::uint8_t> golden_image)
    : frames_(golden_image), golden_(std::move(golden_image)) {
  if (golden_.empty() || golden_.size() % kFrameBytes != 0) {
    throw std::invalid_argument("configuration image must be a whole number of 404-byte frames");
  }
  const std::uint32_t n = frame_count();
  stored_crc_.resize(n);
  stored_ecc_.resize(std::size_t{n} * kFrameWords);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto f = golden_frame(i);
    stored_crc_[i] = crc16_ccitt(f);
    for (std::size_t w = 0; w < kFrameWords; ++w) {
      stored_ecc_[std::size_t{i} * kFrameWords + w] = word_ecc(load_word(f, w));
    }
  }
}

ConfigMemory ConfigMemory::random(std::uint32_t frames, SeededRng& rng) {
  std::vector<std::uint8_t> image(std::size_t{frames} * kFrameBytes);
  for (std::size_t i = 0; i < image.size(); i += 8) {
    std::uint64_t r = rng.next_u64();
    for (std::size_t k = 0; k < 8 && i + k < image.size(); ++k, r >>= 8) {
      image[i + k] = static_cast<std::uint8_t>(r);
    }
  }
  return ConfigMemory(std::move(image));
}

void ConfigMemory::check_index(std::uint32_t i) const {
  if (i >= frame_count()) throw std::out_of_range("frame index " + std::to_string(i));
}

std::span<const std::uint8_t> ConfigMemory::frame(std::uint32_t i) const {
  check_index(i);
  return std::span(frames_).subspan(std::size_t{i} * kFrameBytes, kFrameBytes);
}

std::span<const std::uint8_t> ConfigMemory::golden_frame(std::uint32_t i) const {
  check_index(i);
  return std::span(golden_).subspan(std::size_t{i} * kFrameBytes, kFrameBytes);
}

bool ConfigMemory::bit(ConfigBitAddress a) const {
  check_index(a.frame);
  return (frames_[a.flat() / 8] >> (7 - a.bit % 8)) & 1;
}

bool ConfigMemory::golden_bit(ConfigBitAddress a) const {
  check_index(a.frame);
  return (golden_[a.flat() / 8] >> (7 - a.bit % 8)) & 1;
}

void ConfigMemory::flip_bit(ConfigBitAddress a) {
  check_index(a.frame);
  if (a.bit >= kFrameBits) throw std::out_of_range("bit offset " + std::to_string(a.bit));
  frames_[a.flat() / 8] ^= static_cast<std::uint8_t>(0x80 >> (a.bit % 8));
}

bool ConfigMemory::frame_matches_golden(std::uint32_t i) const {
  return std::ranges::equal(frame(i), golden_frame(i));
}

std::vector<std::uint32_t> ConfigMemory::damaged_frames() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < frame_count(); ++i) {
    if (!frame_matches_golden(i)) out.push_back(i);
  }
  return out;
}

FrameCheck ConfigMemory::check_frame(std::uint32_t i) const {
  auto f = frame(i);
  FrameCheck out;
  out.crc_mismatch = crc16_ccitt(f) != stored_crc_[i];
  for (std::size_t w = 0; w < kFrameWords; ++w) {
    const std::uint8_t diff = word_ecc(load_word(f, w)) ^ stored_ecc_[std::size_t{i} * kFrameWords + w];
    if (diff == 0) continue;
    const bool parity_flip = (diff >> 6) & 1;
    const unsigned syndrome = diff & 0x3F;
    if (parity_flip && syndrome >= 1 && syndrome <= 32) {
      out.correctable_words.push_back(static_cast<std::uint32_t>(w));
    } else {
      out.uncorrectable_words.push_back(static_cast<std::uint32_t>(w));
    }
  }
  return out;
}

EccOutcome ConfigMemory::correct_frame(std::uint32_t i) {
  const FrameCheck chk = check_frame(i);
  EccOutcome out;
  for (std::uint32_t w : chk.correctable_words) {
    const std::uint8_t diff =
        word_ecc(load_word(frame(i), w)) ^ stored_ecc_[std::size_t{i} * kFrameWords + w];
    const unsigned value_bit = (diff & 0x3F) - 1;
    flip_bit({i, w * 32 + (31 - value_bit)});
    ++out.corrected_bits;
  }
  out.uncorrectable_words = chk.uncorrectable_words;
  out.crc_ok_after = crc16_ccitt(frame(i)) == stored_crc_[i];
  return out;
}

void ConfigMemory::restore_frame(std::uint32_t i) {
  check_index(i);
  std::ranges::copy(golden_frame(i), frames_.begin() + static_cast<std::ptrdiff_t>(std::size_t{i} * kFrameBytes));
}

void ConfigMemory::restore_all() { frames_ = golden_; }

std::uint64_t ConfigMemory::golden_digest() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::uint8_t b : golden_) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------

void EssentialBitMap::add(Component c, ConfigBitAddress a) {
  auto [it, inserted] = index_.emplace(a.flat(), c);
  if (!inserted) throw std::invalid_argument("essential bit assigned to two components");
  bits_[index_of(c)].push_back(a);
}

std::optional<Component> EssentialBitMap::owner(ConfigBitAddress a) const {
  auto it = index_.find(a.flat());
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

std::string Architecture::name() const {
  std::string out;
  auto add = [&](bool on, std::string_view tag) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += tag;
  };
  add(cms, "CMS");
  add(dpr, "DPR");
  add(tmr, "TMR");
  add(wd, "WD");
  return out.empty() ? "No FT" : out;
}

Architecture Architecture::parse(std::string_view text) {
  const std::string t = upper(trim(text));
  Architecture a;
  if (t == "NO FT" || t == "NONE" || t == "NO-FT" || t == "NOFT") return a;
  std::size_t pos = 0;
  while (pos <= t.size()) {
    const std::size_t end = std::min(t.find('+', pos), t.size());
    const std::string tok = trim(std::string_view(t).substr(pos, end - pos));
    if (tok == "TMR") a.tmr = true;
    else if (tok == "DPR") a.dpr = true;
    else if (tok == "CMS") a.cms = true;
    else if (tok == "WD") a.wd = true;
    else throw std::invalid_argument("unknown architecture token '" + tok + "'");
    pos = end + 1;
  }
  return a;
}

std::vector<Architecture> Architecture::table_rows() {
  return {
      {},
      {.tmr = true},
      {.dpr = true},
      {.cms = true},
      {.tmr = true, .dpr = true},
      {.tmr = true, .cms = true},
      {.tmr = true, .dpr = true, .cms = true},
      {.tmr = true, .dpr = true, .cms = true, .wd = true},
  };
}

std::vector<Component> Architecture::components() const {
  std::vector<Component> out = {Component::kFir0};
  if (tmr) {
    out.insert(out.end(), {Component::kFir1, Component::kFir2, Component::kVoterIn, Component::kVoterOut});
  }
  if (dpr) out.push_back(Component::kDprCtrl);
  if (cms) out.push_back(Component::kCmsCtrl);
  if (wd) out.push_back(Component::kWdUart);
  return out;
}

std::array<ComponentSpec, kComponentCount> FabricConfig::default_components() {
  std::array<ComponentSpec, kComponentCount> c{};
  c[index_of(Component::kFir0)] = {4, 0.06};
  c[index_of(Component::kFir1)] = {4, 0.06};
  c[index_of(Component::kFir2)] = {4, 0.06};
  c[index_of(Component::kVoterIn)] = {1, 0.02};
  c[index_of(Component::kVoterOut)] = {0, 0.06};  // processor-side vote
  c[index_of(Component::kDprCtrl)] = {5, 0.008};
  c[index_of(Component::kCmsCtrl)] = {9, 0.004};
  c[index_of(Component::kWdUart)] = {2, 0.02};
  return c;
}

FabricLayout FabricLayout::build(const Architecture& arch, const FabricConfig& cfg) {
  FabricLayout out;
  out.cfg_ = cfg;
  out.total_frames_ = cfg.total_frames;
  out.owner_.assign(cfg.total_frames, -1);
  std::uint32_t next = 0;
  const auto wanted = arch.components();
  for (Component c : kAllComponents) {
    if (std::ranges::find(wanted, c) == wanted.end()) continue;
    const ComponentSpec& spec = cfg.components[index_of(c)];
    if (spec.frames == 0) continue;  // implemented outside the programmable logic
    if (next + spec.frames > cfg.total_frames) {
      throw std::invalid_argument("components do not fit in the configuration memory");
    }
    out.regions_.push_back({c, next, spec.frames});
    for (std::uint32_t f = next; f < next + spec.frames; ++f) out.owner_[f] = static_cast<std::int8_t>(c);
    next += spec.frames;
  }
  return out;
}

std::optional<ComponentRegion> FabricLayout::region(Component c) const {
  for (const auto& r : regions_) {
    if (r.id == c) return r;
  }
  return std::nullopt;
}

std::optional<Component> FabricLayout::owner_of_frame(std::uint32_t frame) const {
  if (frame >= owner_.size() || owner_[frame] < 0) return std::nullopt;
  return static_cast<Component>(owner_[frame]);
}

std::uint32_t FabricLayout::utilized_frames() const {
  std::uint32_t n = 0;
  for (const auto& r : regions_) n += r.frame_count;
  return n;
}

// ---------------------------------------------------------------------------

FpgaFabric::FpgaFabric(FabricLayout layout, std::uint64_t content_seed)
    : layout_(std::move(layout)),
      mem_([&] {
        SeededRng rng = SeededRng(content_seed).fork("config-image");
        return ConfigMemory::random(layout_.total_frames(), rng);
      }()) {
  const SeededRng root(content_seed);
  for (const auto& r : layout_.regions()) {
    SeededRng rng = root.fork("essential/" + std::string(component_name(r.id)));
    const double density = layout_.config().components[index_of(r.id)].essential_density;
    for (std::uint32_t f = r.first_frame; f < r.first_frame + r.frame_count; ++f) {
      for (std::uint32_t b = 0; b < kFrameBits; ++b) {
        if (rng.bernoulli(density)) essential_.add(r.id, {f, b});
      }
    }
  }
}

FlipEffect FpgaFabric::flip(ConfigBitAddress a) {
  mem_.flip_bit(a);
  FlipEffect e;
  e.owner = layout_.owner_of_frame(a.frame);
  e.now_flipped = mem_.bit(a) != mem_.golden_bit(a);
  if (auto c = essential_.owner(a)) {
    e.essential = true;
    auto& set = flipped_[index_of(*c)];
    if (e.now_flipped) {
      set.insert(a.flat());
    } else {
      set.erase(a.flat());
    }
    digest_[index_of(*c)].toggle(a.flat());
  }
  return e;
}

void FpgaFabric::resync(std::uint32_t frame) {
  const auto c = layout_.owner_of_frame(frame);
  if (!c) return;
  auto& set = flipped_[index_of(*c)];
  auto& digest = digest_[index_of(*c)];
  const std::uint64_t lo = std::uint64_t{frame} * kFrameBits;
  auto first = set.lower_bound(lo);
  auto last = set.lower_bound(lo + kFrameBits);
  for (auto it = first; it != last; ++it) digest.toggle(*it);
  set.erase(first, last);

  auto cur = mem_.frame(frame);
  auto gold = mem_.golden_frame(frame);
  for (std::size_t byte = 0; byte < kFrameBytes; ++byte) {
    std::uint8_t diff = cur[byte] ^ gold[byte];
    while (diff) {
      const int k = std::countl_zero(static_cast<std::uint8_t>(diff));
      diff &= static_cast<std::uint8_t>(~(0x80 >> k));
      const ConfigBitAddress a{frame, static_cast<std::uint32_t>(byte * 8 + k)};
      if (essential_.contains(a)) {
        set.insert(a.flat());
        digest.toggle(a.flat());
      }
    }
  }
}

void FpgaFabric::restore_frame(std::uint32_t frame) {
  mem_.restore_frame(frame);
  resync(frame);
}

void FpgaFabric::restore_region(Component c) {
  const auto r = layout_.region(c);
  if (!r) throw std::invalid_argument(std::string(component_name(c)) + " is not placed");
  for (std::uint32_t f = r->first_frame; f < r->first_frame + r->frame_count; ++f) restore_frame(f);
}

void FpgaFabric::restore_all() {
  mem_.restore_all();
  for (auto& s : flipped_) s.clear();
  digest_ = {};
}

EccOutcome FpgaFabric::ecc_correct(std::uint32_t frame) {
  EccOutcome out = mem_.correct_frame(frame);
  resync(frame);
  return out;
}

ComponentHealth FpgaFabric::health(Component c) const {
  const auto& set = flipped_[index_of(c)];
  return {c, set.empty(), digest_[index_of(c)].tag(), set.size()};
}

bool FpgaFabric::all_healthy() const {
  return std::ranges::all_of(flipped_, [](const auto& s) { return s.empty(); });
}

std::size_t FpgaFabric::flipped_essential_bits() const {
  std::size_t n = 0;
  for (const auto& s : flipped_) n += s.size();
  return n;
}

// ---------------------------------------------------------------------------

std::vector<std::int64_t> fir_filter(const ComponentHealth& health,
                                     std::span<const std::int64_t> input,
                                     std::span<const std::int64_t> coeffs) {
  if (coeffs.empty()) throw std::invalid_argument("fir_filter: empty coefficient set");
  std::vector<std::int64_t> out(input.size(), 0);
  for (std::size_t n = 0; n < input.size(); ++n) {
    std::int64_t acc = 0;
    for (std::size_t k = 0; k < coeffs.size() && k <= n; ++k) acc += coeffs[k] * input[n - k];
    out[n] = acc;
  }
  if (!health.healthy) corrupt_samples(out, health.corruption_tag);
  return out;
}

// ---------------------------------------------------------------------------

std::string_view icap_owner_name(IcapOwner o) { return o == IcapOwner::kCms ? "cms" : "dpr"; }

IcapArbiter::Outcome IcapArbiter::acquire(IcapOwner owner, GrantHandler on_grant) {
  const bool queued = std::ranges::any_of(queue_, [&](const auto& e) { return e.first == owner; });
  if (holder_ == owner || queued) {
    throw std::logic_error("ICAP: re-entrant request by " + std::string(icap_owner_name(owner)));
  }
  if (!holder_) {
    grant(owner, std::move(on_grant));
    return Outcome::kGranted;
  }
  queue_.emplace_back(owner, std::move(on_grant));
  return Outcome::kQueued;
}

void IcapArbiter::grant(IcapOwner owner, GrantHandler handler) {
  if (holders_ != 0) throw InvariantViolation("ICAP granted while already held");
  holder_ = owner;
  holders_ = 1;
  ++grants_;
  if (handler) handler();
}

void IcapArbiter::release(IcapOwner owner) {
  if (holder_ != owner) {
    throw std::logic_error("ICAP: release by non-holder " + std::string(icap_owner_name(owner)));
  }
  holder_.reset();
  holders_ = 0;
  ++releases_;
  if (!queue_.empty()) {
    auto [next, handler] = std::move(queue_.front());
    queue_.pop_front();
    grant(next, std::move(handler));
  }
}

void IcapArbiter::reset() {
  holder_.reset();
  holders_ = 0;
  queue_.clear();
}

// ---------------------------------------------------------------------------

std::string_view scrub_mode_name(ScrubMode m) {
  return m == ScrubMode::kReplace ? "replace" : "enhanced_repair";
}

Scrubber::Scrubber(Simulator& sim, FpgaFabric& fabric, IcapArbiter& icap, ScrubberConfig cfg)
    : sim_(sim), fabric_(fabric), icap_(icap), cfg_(cfg) {}

void Scrubber::start() {
  running_ = true;
  if (!pending_ && !busy_) schedule_step(cfg_.scan_period);
}

void Scrubber::reset() {
  ++generation_;
  if (pending_) sim_.cancel(*pending_);
  pending_.reset();
  busy_ = false;
  running_ = false;
  pointer_ = 0;
  uncorrectable_.clear();
}

void Scrubber::schedule_step(SimTime delay) {
  pending_ = sim_.schedule_after(delay, "cms", "scan", [this, gen = generation_] {
    if (gen != generation_) return;
    pending_.reset();
    step();
    if (running_ && !busy_ && !pending_) schedule_step(cfg_.scan_period);
  });
}

void Scrubber::advance() { pointer_ = (pointer_ + 1) % fabric_.memory().frame_count(); }

ScrubReport Scrubber::step() {
  ScrubReport r;
  r.time = sim_.now();
  r.frame = pointer_;
  if (busy_) {
    r.busy = true;
    return r;
  }
  if (!fabric_.health(Component::kCmsCtrl).healthy) {
    r.controller_faulty = true;
    return r;
  }
  const FrameCheck chk = fabric_.memory().check_frame(pointer_);
  if (!chk.damaged()) {
    advance();
    return r;
  }
  r.detected = true;
  ++detections_;
  if (cfg_.mode == ScrubMode::kEnhancedRepair) {
    r.uncorrectable_words = chk.uncorrectable_words;
    if (chk.correctable_words.empty()) {
      uncorrectable_.insert(pointer_);
      ++uncorrectable_reports_;
      advance();
      return r;
    }
  }
  r.repair_scheduled = true;
  begin_repair(pointer_, r.time);
  return r;
}

void Scrubber::begin_repair(std::uint32_t frame, SimTime detected_at) {
  busy_ = true;
  icap_.acquire(IcapOwner::kCms, [this, frame, detected_at, gen = generation_] {
    if (gen != generation_) {
      icap_.release(IcapOwner::kCms);
      return;
    }
    pending_ = sim_.schedule_after(cfg_.frame_repair_latency, "cms", "repair",
                                   [this, frame, detected_at, gen] {
                                     if (gen != generation_) return;
                                     finish_repair(frame, detected_at);
                                   });
  });
}

void Scrubber::finish_repair(std::uint32_t frame, SimTime detected_at) {
  pending_.reset();
  RepairRecord rec{frame, detected_at, sim_.now(), 0, true};
  if (cfg_.mode == ScrubMode::kReplace) {
    fabric_.restore_frame(frame);
    uncorrectable_.erase(frame);
  } else {
    const EccOutcome ecc = fabric_.ecc_correct(frame);
    rec.corrected_bits = ecc.corrected_bits;
    rec.fully_repaired = ecc.crc_ok_after && ecc.uncorrectable_words.empty();
    if (rec.fully_repaired) {
      uncorrectable_.erase(frame);
    } else {
      uncorrectable_.insert(frame);
      ++uncorrectable_reports_;
    }
  }
  repairs_.push_back(rec);
  busy_ = false;
  icap_.release(IcapOwner::kCms);
  advance();
  if (running_) schedule_step(cfg_.scan_period);
}

bool Scrubber::has_uncorrectable() {
  std::erase_if(uncorrectable_, [&](std::uint32_t f) { return !fabric_.memory().check_frame(f).damaged(); });
  return !uncorrectable_.empty();
}

// ---------------------------------------------------------------------------

SimTime reload_duration(std::size_t bytes, std::uint64_t bytes_per_second) {
  if (bytes_per_second == 0) throw std::invalid_argument("reload throughput is zero");
  const std::uint64_t num = std::uint64_t{bytes} * kSecond;
  return (num + bytes_per_second - 1) / bytes_per_second;
}

DprController::DprController(Simulator& sim, FpgaFabric& fabric, IcapArbiter& icap,
                             std::uint64_t bytes_per_second, std::optional<std::size_t> partial_bytes)
    : sim_(sim),
      fabric_(fabric),
      icap_(icap),
      bytes_per_second_(bytes_per_second),
      partial_bytes_(partial_bytes) {}

bool DprController::request_reload(Component region) {
  if (!is_reconfigurable(region) || !fabric_.layout().has(region)) return false;
  if (!fabric_.health(Component::kDprCtrl).healthy) return false;
  const bool merged = (active_ && active_->region == region) ||
                      std::ranges::any_of(queue_, [&](const auto& r) { return r.region == region; });
  if (!merged) queue_.push_back({region, sim_.now(), 0, 0});
  pump();
  return true;
}

void DprController::pump() {
  if (active_ || waiting_icap_ || queue_.empty()) return;
  waiting_icap_ = true;
  icap_.acquire(IcapOwner::kDpr, [this, gen = generation_] {
    if (gen != generation_) {
      icap_.release(IcapOwner::kDpr);
      return;
    }
    on_grant();
  });
}

void DprController::on_grant() {
  waiting_icap_ = false;
  active_ = queue_.front();
  queue_.pop_front();
  if (!fabric_.health(Component::kDprCtrl).healthy) {
    // Controller died while waiting; nothing is reloaded.
    active_.reset();
    icap_.release(IcapOwner::kDpr);
    pump();
    return;
  }
  active_->started_at = sim_.now();
  const auto bytes = partial_bytes_.value_or(fabric_.layout().region(active_->region)->bytes());
  pending_ = sim_.schedule_after(reload_duration(bytes, bytes_per_second_), "dpr", "reload",
                                 [this, gen = generation_] { finish(gen); });
}

void DprController::finish(std::uint64_t generation) {
  if (generation != generation_) return;
  pending_.reset();
  fabric_.restore_region(active_->region);
  active_->completed_at = sim_.now();
  reloads_.push_back(*active_);
  active_.reset();
  icap_.release(IcapOwner::kDpr);
  pump();
}

void DprController::reset() {
  ++generation_;
  if (pending_) sim_.cancel(*pending_);
  pending_.reset();
  queue_.clear();
  active_.reset();
  waiting_icap_ = false;
}

// ---------------------------------------------------------------------------

Watchdog::Watchdog(Simulator& sim, SimTime timeout, std::function<void()> on_expire)
    : sim_(sim), timeout_(timeout), on_expire_(std::move(on_expire)) {}

void Watchdog::arm() {
  if (pending_) sim_.cancel(*pending_);
  pending_ = sim_.schedule_after(timeout_, "wd", "expire", [this] {
    pending_.reset();
    ++expirations_;
    if (on_expire_) on_expire_();
  });
}

void Watchdog::disarm() {
  if (pending_) sim_.cancel(*pending_);
  pending_.reset();
}

// ---------------------------------------------------------------------------

std::string_view window_class_name(WindowClass c) {
  switch (c) {
    case WindowClass::kDown: return "down";
    case WindowClass::kErroneous: return "erroneous";
    case WindowClass::kCorrect: return "correct";
  }
  return "?";
}

PipelineOutcome run_app_pipeline(const HealthLookup& health, std::span<const std::int64_t> input,
                                 std::span<const std::int64_t> coeffs, double hang_fraction) {
  PipelineOutcome out;
  const ComponentHealth h = health(Component::kFir0);
  if (!h.healthy && CorruptionMask(h.corruption_tag).hangs(hang_fraction)) return out;
  out.output = fir_filter(h, input, coeffs);
  return out;
}

PipelineOutcome run_tmr_pipeline(const HealthLookup& health, std::span<const std::int64_t> input,
                                 std::span<const std::int64_t> coeffs, double hang_fraction) {
  PipelineOutcome out;
  const ComponentHealth vin = health(Component::kVoterIn);
  if (!vin.healthy && CorruptionMask(vin.corruption_tag).hangs(hang_fraction)) return out;

  // The three input copies are identical; a faulty input voter damages the
  // voted stream that every replica then consumes.
  std::vector<std::int64_t> voted_in = tmr_vote<std::int64_t>(input, input, input).values;
  if (!vin.healthy) corrupt_samples(voted_in, vin.corruption_tag);

  constexpr std::array<Component, 3> kReplicas = {Component::kFir0, Component::kFir1, Component::kFir2};
  std::array<std::vector<std::int64_t>, 3> outputs;
  std::array<bool, 3> live{};
  int live_count = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const ComponentHealth h = health(kReplicas[k]);
    if (!h.healthy && CorruptionMask(h.corruption_tag).hangs(hang_fraction)) {
      outputs[k].assign(input.size(), 0);
      continue;
    }
    outputs[k] = fir_filter(h, voted_in, coeffs);
    live[k] = true;
    ++live_count;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    if (!live[k]) out.repair_requests.push_back(kReplicas[k]);
  }
  if (live_count < 2) return out;

  auto vote = tmr_vote<std::int64_t>(outputs[0], outputs[1], outputs[2]);
  out.corrected = vote.corrected;
  out.uncorrectable = vote.uncorrectable;
  for (std::size_t k = 0; k < 3; ++k) {
    if (!live[k]) continue;
    bool suspect = false;
    for (std::size_t i = 0; i < vote.values.size() && !suspect; ++i) {
      suspect = vote.status[i] == VoteStatus::kUncorrectable ||
                (vote.status[i] == VoteStatus::kCorrected && outputs[k][i] != vote.values[i]);
    }
    if (suspect) out.repair_requests.push_back(kReplicas[k]);
  }

  const ComponentHealth vout = health(Component::kVoterOut);
  if (!vout.healthy) {
    if (CorruptionMask(vout.corruption_tag).hangs(hang_fraction)) {
      out.repair_requests.clear();
      return out;
    }
    corrupt_samples(vote.values, vout.corruption_tag);
  }
  out.output = std::move(vote.values);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

FpgaConfig normalized(FpgaConfig cfg) {
  if (cfg.arch.wd) cfg.scrub.mode = ScrubMode::kEnhancedRepair;
  return cfg;
}

}  // namespace

FpgaNode::FpgaNode(Simulator& sim, FpgaConfig cfg)
    : sim_(sim),
      cfg_(normalized(std::move(cfg))),
      fabric_(FabricLayout::build(cfg_.arch, cfg_.fabric), cfg_.fabric.layout_seed),
      scrubber_(sim, fabric_, icap_, cfg_.scrub),
      dpr_(sim, fabric_, icap_, cfg_.icap_bytes_per_second, cfg_.dpr_partial_bytes),
      watchdog_(sim, cfg_.watchdog_timeout, [this] { full_reset(); }) {
  SeededRng rng = SeededRng(cfg_.fabric.layout_seed).fork("fir-input");
  input_.resize(cfg_.batch_length);
  for (auto& x : input_) x = rng.uniform_int(-1000, 1000);
  golden_ = fir_filter(ComponentHealth{Component::kFir0}, input_, cfg_.fir_coeffs);
  for (Component c : {Component::kFir0, Component::kFir1, Component::kFir2}) {
    if (fabric_.layout().has(c)) sweep_regions_.push_back(c);
  }
}

SimTime FpgaNode::reset_duration() const {
  return cfg_.reset_duration.value_or(
      reload_duration(fabric_.memory().byte_size(), cfg_.icap_bytes_per_second));
}

void FpgaNode::start() {
  if (cfg_.arch.cms) scrubber_.start();
  if (cfg_.arch.dpr && cfg_.dpr_sweep_period > 0 && !sweep_regions_.empty()) {
    sim_.schedule_after(cfg_.dpr_sweep_period, "dpr", "sweep", [this] { sweep_tick(); });
  }
  if (cfg_.arch.wd) {
    watchdog_.arm();
    sim_.schedule_after(cfg_.heartbeat_period, "wd", "heartbeat", [this] { heartbeat_tick(); });
  }
}

void FpgaNode::sweep_tick() {
  if (!in_reset_) {
    dpr_.request_reload(sweep_regions_[sweep_next_]);
    sweep_next_ = (sweep_next_ + 1) % sweep_regions_.size();
  }
  sim_.schedule_after(cfg_.dpr_sweep_period, "dpr", "sweep", [this] { sweep_tick(); });
}

void FpgaNode::heartbeat_tick() {
  if (!in_reset_) {
    bool alive = output_alive_ && fabric_.health(Component::kWdUart).healthy;
    if (cfg_.arch.cms) {
      alive = alive && fabric_.health(Component::kCmsCtrl).healthy && !scrubber_.has_uncorrectable();
    }
    if (alive) {
      watchdog_.kick();
      ++stats_.heartbeats;
    }
  }
  sim_.schedule_after(cfg_.heartbeat_period, "wd", "heartbeat", [this] { heartbeat_tick(); });
}

CheckpointResult FpgaNode::checkpoint() {
  ++stats_.checkpoints;
  CheckpointResult res;
  if (in_reset_) {
    res.cls = WindowClass::kDown;
    return res;
  }
  const HealthLookup lookup = [this](Component c) { return fabric_.health(c); };
  PipelineOutcome o = cfg_.arch.tmr
                          ? run_tmr_pipeline(lookup, input_, cfg_.fir_coeffs, cfg_.hang_fraction)
                          : run_app_pipeline(lookup, input_, cfg_.fir_coeffs, cfg_.hang_fraction);
  output_alive_ = o.output.has_value();
  if (!o.output) {
    res.cls = WindowClass::kDown;
  } else {
    res.cls = *o.output == golden_ ? WindowClass::kCorrect : WindowClass::kErroneous;
  }
  res.repair_requests = std::move(o.repair_requests);
  stats_.repair_requests += res.repair_requests.size();
  if (cfg_.arch.dpr) {
    for (Component c : res.repair_requests) dpr_.request_reload(c);
  }
  return res;
}

FlipEffect FpgaNode::inject(ConfigBitAddress a) { return fabric_.flip(a); }

void FpgaNode::full_reset() {
  if (in_reset_) return;
  in_reset_ = true;
  ++stats_.resets;
  scrubber_.reset();
  dpr_.reset();
  icap_.reset();
  watchdog_.disarm();
  sim_.schedule_after(reset_duration(), "fpga", "reset-done", [this, e = ++epoch_] {
    if (e == epoch_) finish_reset();
  });
}

void FpgaNode::finish_reset() {
  fabric_.restore_all();
  in_reset_ = false;
  output_alive_ = true;
  if (cfg_.arch.cms) scrubber_.start();
  if (cfg_.arch.wd) watchdog_.arm();
}

}  // namespace seusim
