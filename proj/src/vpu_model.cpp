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

#include "seusim/vpu_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <sstream>

#include "seusim/fault_semantics.hpp"
#include "seusim/voting.hpp"

namespace seusim {

namespace {

std::uint32_t load_be32(std::span<const std::uint8_t> b) {
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void store_be32(std::span<std::uint8_t> b, std::uint32_t v) {
  b[0] = static_cast<std::uint8_t>(v >> 24);
  b[1] = static_cast<std::uint8_t>(v >> 16);
  b[2] = static_cast<std::uint8_t>(v >> 8);
  b[3] = static_cast<std::uint8_t>(v);
}

std::uint32_t halo_of(KernelKind k) { return k == KernelKind::kConv2d ? 1 : 0; }
std::uint32_t align_of(KernelKind k) { return k == KernelKind::kConv2d ? 1 : 2; }

SimTime ns_to_us(std::uint64_t ns) { return (ns + 999) / 1000; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view kernel_name(KernelKind k) { return k == KernelKind::kConv2d ? "conv2d" : "binning2d"; }

KernelKind parse_kernel(std::string_view name) {
  const std::string n = lower(name);
  if (n == "conv2d" || n == "conv") return KernelKind::kConv2d;
  if (n == "binning2d" || n == "binn2d" || n == "binning") return KernelKind::kBinning2d;
  throw VpuError("unknown kernel '" + std::string(name) + "'");
}

std::string_view run_phase_name(RunPhase p) {
  switch (p) {
    case RunPhase::kInputLoaded: return "input_loaded";
    case RunPhase::kTilesAssigned: return "tiles_assigned";
    case RunPhase::kTilesResident: return "tiles_resident";
  }
  return "?";
}

// ---------------------------------------------------------------------------

std::vector<Tile> partition_workload(const PixelFrame& image, std::size_t workers,
                                     std::uint32_t halo, std::uint32_t align) {
  if (workers == 0) throw VpuError("partition_workload: no workers");
  if (align == 0) throw VpuError("partition_workload: zero alignment");
  if (image.height < workers) throw VpuError("partition_workload: image has fewer rows than workers");
  if (image.height % align != 0) throw VpuError("partition_workload: height not a multiple of alignment");
  const std::uint32_t units = image.height / align;
  if (units < workers) throw VpuError("partition_workload: too few row units for the workers");

  std::vector<Tile> tiles;
  tiles.reserve(workers);
  const std::uint32_t base = units / static_cast<std::uint32_t>(workers);
  const std::uint32_t extra = units % static_cast<std::uint32_t>(workers);
  std::uint32_t row = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    Tile t;
    t.worker = w;
    t.first_row = row;
    t.row_count = (base + (w < extra ? 1 : 0)) * align;
    t.halo_top = std::min(halo, t.first_row);
    t.halo_bottom = std::min(halo, image.height - (t.first_row + t.row_count));
    t.width = image.width;
    t.image_height = image.height;
    t.depth = image.depth;
    const auto begin = image.pixels.begin() + static_cast<std::ptrdiff_t>(std::size_t{t.first_row - t.halo_top} * image.width);
    t.input.assign(begin, begin + static_cast<std::ptrdiff_t>(std::size_t{t.input_rows()} * image.width));
    std::vector<std::uint8_t> bytes;
    serialize_pixels_into(t.input, t.depth, bytes);
    t.crc = crc16_ccitt(bytes);
    tiles.push_back(std::move(t));
    row += tiles.back().row_count;
  }
  return tiles;
}

std::vector<double> conv2d(const Tile& tile, const Kernel3x3& kernel) {
  if ((tile.first_row > 0 && tile.halo_top == 0) ||
      (tile.first_row + tile.row_count < tile.image_height && tile.halo_bottom == 0)) {
    throw VpuError("conv2d: tile is missing its halo rows");
  }
  if (tile.input.size() != std::size_t{tile.input_rows()} * tile.width) {
    throw VpuError("conv2d: tile input size does not match geometry");
  }
  const auto w = static_cast<std::int64_t>(tile.width);
  const auto rows = static_cast<std::int64_t>(tile.input_rows());
  std::vector<double> out(std::size_t{tile.row_count} * tile.width, 0.0);
  for (std::int64_t y = 0; y < tile.row_count; ++y) {
    const std::int64_t cy = y + tile.halo_top;  // row in tile.input
    for (std::int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < 3; ++i) {
        const std::int64_t sy = cy + i - 1;
        if (sy < 0 || sy >= rows) continue;
        for (std::int64_t j = 0; j < 3; ++j) {
          const std::int64_t sx = x + j - 1;
          if (sx < 0 || sx >= w) continue;
          acc += kernel[static_cast<std::size_t>(i * 3 + j)] *
                 static_cast<double>(tile.input[static_cast<std::size_t>(sy * w + sx)]);
        }
      }
      out[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }
  return out;
}

std::vector<double> binning2d(const Tile& tile, std::uint32_t factor) {
  if (factor == 0 || tile.row_count % factor != 0 || tile.width % factor != 0) {
    throw VpuError("binning2d: stripe dimensions not divisible by the binning factor");
  }
  const std::uint32_t ow = tile.width / factor;
  const std::uint32_t oh = tile.row_count / factor;
  const std::uint64_t area = std::uint64_t{factor} * factor;
  std::vector<double> out(std::size_t{ow} * oh);
  for (std::uint32_t oy = 0; oy < oh; ++oy) {
    for (std::uint32_t ox = 0; ox < ow; ++ox) {
      std::uint64_t sum = 0;
      for (std::uint32_t dy = 0; dy < factor; ++dy) {
        const std::size_t row = std::size_t{tile.halo_top + oy * factor + dy} * tile.width;
        for (std::uint32_t dx = 0; dx < factor; ++dx) sum += tile.input[row + ox * factor + dx];
      }
      out[std::size_t{oy} * ow + ox] = static_cast<double>((2 * sum + area) / (2 * area));
    }
  }
  return out;
}

double error_rate(const Image& output, const Image& golden) {
  if (output.width != golden.width || output.height != golden.height ||
      output.values.size() != golden.values.size()) {
    throw VpuError("error_rate: dimension mismatch");
  }
  if (golden.values.empty()) return 0.0;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < golden.values.size(); ++i) {
    bad += std::memcmp(&output.values[i], &golden.values[i], sizeof(double)) != 0;
  }
  return static_cast<double>(bad) / static_cast<double>(golden.values.size());
}

Image reference_output(const PixelFrame& image, KernelKind kernel, const Kernel3x3& conv_kernel) {
  image.validate();
  Tile whole;
  whole.row_count = image.height;
  whole.width = image.width;
  whole.image_height = image.height;
  whole.depth = image.depth;
  whole.input = image.pixels;
  Image out;
  if (kernel == KernelKind::kConv2d) {
    out = {image.width, image.height, conv2d(whole, conv_kernel)};
  } else {
    out = {image.width / 2, image.height / 2, binning2d(whole, 2)};
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t MemorySpace::cmx_alloc(std::size_t bytes) {
  if (cmx_used + bytes > cmx.size()) {
    throw VpuError("CMX allocation of " + std::to_string(bytes) + " bytes exceeds the 2 MB scratchpad");
  }
  const std::size_t off = cmx_used;
  cmx_used += bytes;
  return off;
}

std::span<std::uint8_t> MemorySpace::instr(std::size_t worker) {
  return std::span(ddr_instr).subspan(worker * kInstrBytes, kInstrBytes);
}

std::span<const std::uint8_t> MemorySpace::golden_instr_of(std::size_t worker) const {
  return std::span(golden_instr).subspan(worker * kInstrBytes, kInstrBytes);
}

NmrConfig NmrConfig::make(std::size_t n) {
  if (n != 1 && n != 3 && n != 5) throw VpuError("NMR supports n in {1, 3, 5}");
  NmrConfig cfg;
  cfg.n = n;
  const std::size_t groups = kWorkerCount / n;
  for (std::size_t g = 0; g < groups; ++g) {
    std::vector<std::size_t> members;
    for (std::size_t m = 0; m < n; ++m) members.push_back(g * n + m);
    cfg.groups.push_back(std::move(members));
  }
  for (std::size_t w = groups * n; w < kWorkerCount; ++w) cfg.unused.push_back(w);
  return cfg;
}

std::span<std::uint8_t> VpuState::descriptor(std::size_t worker) {
  return std::span(shared).subspan(worker * kDescriptorBytes, kDescriptorBytes);
}

std::span<std::uint8_t> VpuState::cmx_tile(std::size_t worker) {
  const auto& w = workers.at(worker);
  return std::span(mem.cmx).subspan(w.cmx_offset, w.cmx_bytes);
}

bool VpuState::instr_pristine(std::size_t worker) const {
  return std::ranges::equal(std::span(mem.ddr_instr).subspan(worker * kInstrBytes, kInstrBytes),
                            mem.golden_instr_of(worker));
}

std::uint64_t VpuState::instr_damage_tag(std::size_t worker) const {
  DamageDigest d;
  const auto gold = mem.golden_instr_of(worker);
  for (std::size_t i = 0; i < kInstrBytes; ++i) {
    const std::uint8_t diff = mem.ddr_instr[worker * kInstrBytes + i] ^ gold[i];
    if (diff) d.toggle((std::uint64_t{worker} << 40) | (std::uint64_t{i} << 8) | diff);
  }
  return d.tag();
}

std::string FtMode::name() const {
  if (nmr > 1) return "NMR" + std::to_string(nmr);
  if (imr && dmr) return "IMR+DMR";
  if (imr) return "IMR";
  if (dmr) return "DMR";
  return "none";
}

FtMode FtMode::parse(std::string_view text) {
  const std::string t = lower(text);
  FtMode m;
  if (t == "none" || t == "no ft" || t == "noft") return m;
  if (t == "imr") m.imr = true;
  else if (t == "dmr") m.dmr = true;
  else if (t == "imr+dmr" || t == "dmr+imr") m.imr = m.dmr = true;
  else if (t == "nmr3" || t == "nmr-3") m.nmr = 3;
  else if (t == "nmr5" || t == "nmr-5") m.nmr = 5;
  else throw VpuError("unknown VPU FT mode '" + std::string(text) + "'");
  return m;
}

// ---------------------------------------------------------------------------

struct VpuNode::Context {
  KernelKind kernel = KernelKind::kConv2d;
  FtMode mode;
  std::vector<Tile> stripes;  // supervisor's record, one per worker
  std::vector<bool> tile_failed;
  std::vector<bool> impaired;
  std::vector<bool> done;
  Image output;
  bool completed = true;
  TimingReport timing;
};

VpuNode::VpuNode(VpuConfig cfg) : cfg_(std::move(cfg)) {
  SeededRng rng = SeededRng(cfg_.code_seed).fork("shave-code");
  state_.mem.golden_instr.resize(kWorkerCount * kInstrBytes);
  for (auto& b : state_.mem.golden_instr) b = static_cast<std::uint8_t>(rng.next_u64());
  state_.mem.ddr_instr = state_.mem.golden_instr;
  for (std::size_t w = 0; w < kWorkerCount; ++w) {
    state_.workers[w].id = w;
    state_.workers[w].instr_offset = w * kInstrBytes;
    state_.instr_crc[w] = crc16_ccitt(state_.mem.golden_instr_of(w));
  }
}

void VpuNode::load_input(const PixelFrame& image) {
  image.validate();
  input_ = image;
  state_.image_width = image.width;
  state_.image_height = image.height;
  state_.depth = image.depth;
  state_.mem.golden_input = serialize_pixels(image);
  state_.mem.ddr_input = state_.mem.golden_input;
}

SimTime VpuNode::stripe_cost(const Tile& t, KernelKind kernel) const {
  const std::uint64_t px = std::uint64_t{t.row_count} * t.width;
  const std::uint64_t ns =
      kernel == KernelKind::kConv2d ? cfg_.timing.conv_ns_per_pixel : cfg_.timing.binning_ns_per_pixel;
  return ns_to_us(px * ns);
}

SimTime VpuNode::dma_cost(const Tile& t) const {
  const std::uint64_t bytes = std::uint64_t{t.input_rows()} * t.width * bytes_of(t.depth);
  return ns_to_us(bytes * cfg_.timing.dma_ns_per_byte);
}

SimTime VpuNode::baseline_latency(KernelKind kernel) const {
  if (!input_) throw VpuError("no input loaded");
  const auto tiles = partition_workload(*input_, kWorkerCount, halo_of(kernel), align_of(kernel));
  SimTime dma = 0, compute = 0;
  for (const auto& t : tiles) {
    dma = std::max(dma, dma_cost(t));
    compute = std::max(compute, stripe_cost(t, kernel));
  }
  return dma + compute;
}

void VpuNode::write_descriptor(std::size_t worker, const Tile& t) {
  auto d = state_.descriptor(worker);
  store_be32(d.subspan(0, 4), t.first_row);
  store_be32(d.subspan(4, 4), t.row_count);
}

// Worker-side DMA driven by the (possibly corrupted) descriptor. Returns
// nullopt and marks the worker faulted when the descriptor is unusable.
std::optional<Tile> VpuNode::dma_tile(std::size_t worker, const Tile& expected, bool from_golden) {
  auto d = state_.descriptor(worker);
  const std::uint32_t first = load_be32(d.subspan(0, 4));
  const std::uint32_t count = load_be32(d.subspan(4, 4));
  const std::uint32_t h = state_.image_height;
  const std::uint32_t align = align_of(active_);
  const std::uint32_t halo = halo_of(active_);
  if (count == 0 || first >= h || count > h - first || first % align != 0 || count % align != 0) {
    state_.workers[worker].faulted = true;
    return std::nullopt;
  }
  Tile t;
  t.worker = worker;
  t.first_row = first;
  t.row_count = count;
  t.width = state_.image_width;
  t.image_height = h;
  t.depth = state_.depth;
  t.halo_top = std::min(halo, first);
  t.halo_bottom = std::min(halo, h - (first + count));
  t.crc = expected.crc;

  const std::size_t row_bytes = std::size_t{t.width} * bytes_of(t.depth);
  const std::size_t bytes = std::size_t{t.input_rows()} * row_bytes;
  auto& wc = state_.workers[worker];
  if (wc.cmx_bytes < bytes || wc.cmx_bytes == 0) {
    wc.cmx_offset = state_.mem.cmx_alloc(bytes);
  }
  wc.cmx_bytes = bytes;
  const auto& src = from_golden ? state_.mem.golden_input : state_.mem.ddr_input;
  std::memcpy(state_.mem.cmx.data() + wc.cmx_offset,
              src.data() + std::size_t{first - t.halo_top} * row_bytes, bytes);
  return t;
}

std::vector<double> VpuNode::execute(std::size_t worker, const Tile& tile, KernelKind kernel) const {
  std::vector<double> out =
      kernel == KernelKind::kConv2d ? conv2d(tile, cfg_.conv_kernel) : binning2d(tile, 2);
  if (!state_.instr_pristine(worker)) corrupt_samples(out, state_.instr_damage_tag(worker));
  return out;
}

void VpuNode::place(Image& out, const Tile& t, const std::vector<double>& stripe, KernelKind kernel) const {
  const std::size_t offset = kernel == KernelKind::kConv2d
                                 ? std::size_t{t.first_row} * out.width
                                 : std::size_t{t.first_row / 2} * out.width;
  const std::size_t expected = kernel == KernelKind::kConv2d
                                   ? std::size_t{t.row_count} * out.width
                                   : std::size_t{t.row_count / 2} * out.width;
  const std::size_t n = std::min(expected, stripe.size());
  std::copy_n(stripe.begin(), n, out.values.begin() + static_cast<std::ptrdiff_t>(offset));
}

namespace {

Tile read_resident(VpuState& state, const Tile& t) {
  Tile r = t;
  r.input = deserialize_pixels(state.cmx_tile(t.worker), t.depth);
  return r;
}

}  // namespace

VpuRunResult VpuNode::run(KernelKind kernel, FtMode mode, const InjectionHook& hook) {
  if (!input_) throw VpuError("run: no input loaded");
  if (kernel == KernelKind::kBinning2d && (input_->width % 2 != 0 || input_->height % 2 != 0)) {
    throw VpuError("run: binning needs even image dimensions");
  }
  active_ = kernel;
  state_.mem.ddr_input = state_.mem.golden_input;
  state_.mem.cmx_reset();
  for (auto& w : state_.workers) {
    w.cmx_bytes = 0;
    w.cmx_offset = 0;
    w.faulted = false;
    w.status = WorkerStatus::kFunctional;
  }
  std::ranges::fill(state_.shared, 0);
  if (hook) hook(RunPhase::kInputLoaded, state_);

  VpuRunResult res = mode.nmr > 1 ? run_nmr(kernel, NmrConfig::make(mode.nmr), hook)
                                  : run_parallel(kernel, mode, hook);
  res.baseline_latency = baseline_latency(kernel);
  return res;
}

VpuRunResult VpuNode::run_parallel(KernelKind kernel, FtMode mode, const InjectionHook& hook) {
  Context ctx;
  ctx.kernel = kernel;
  ctx.mode = mode;
  ctx.stripes = partition_workload(*input_, kWorkerCount, halo_of(kernel), align_of(kernel));
  const Image ref_shape = kernel == KernelKind::kConv2d
                              ? Image{input_->width, input_->height, {}}
                              : Image{input_->width / 2, input_->height / 2, {}};
  ctx.output = {ref_shape.width, ref_shape.height,
                std::vector<double>(std::size_t{ref_shape.width} * ref_shape.height, 0.0)};
  ctx.tile_failed.assign(kWorkerCount, false);
  ctx.impaired.assign(kWorkerCount, false);
  ctx.done.assign(kWorkerCount, false);

  for (std::size_t w = 0; w < kWorkerCount; ++w) write_descriptor(w, ctx.stripes[w]);
  if (hook) hook(RunPhase::kTilesAssigned, state_);

  std::vector<std::optional<Tile>> resident(kWorkerCount);
  for (std::size_t w = 0; w < kWorkerCount; ++w) {
    resident[w] = dma_tile(w, ctx.stripes[w], false);
    ctx.timing.dma = std::max(ctx.timing.dma, dma_cost(ctx.stripes[w]));
  }
  if (hook) hook(RunPhase::kTilesResident, state_);

  for (std::size_t w = 0; w < kWorkerCount; ++w) {
    if (!resident[w]) {
      if (mode.dmr) {
        ctx.tile_failed[w] = true;
      } else {
        ctx.completed = false;  // worker never signals completion
      }
      continue;
    }
    if (mode.dmr && crc16_ccitt(state_.cmx_tile(w)) != resident[w]->crc) {
      ctx.tile_failed[w] = true;
      continue;
    }
    const Tile t = read_resident(state_, *resident[w]);
    place(ctx.output, ctx.stripes[w], execute(w, t, kernel), kernel);
    ctx.done[w] = true;
    ctx.timing.compute = std::max(ctx.timing.compute, stripe_cost(ctx.stripes[w], kernel));
  }

  VpuRunResult res;
  if (mode.imr) {
    for (std::size_t w = 0; w < kWorkerCount; ++w) {
      ctx.impaired[w] = crc16_ccitt(state_.mem.instr(w)) != state_.instr_crc[w];
    }
  }
  if (mode.dmr) res.dmr = dmr_cycle(ctx);
  if (mode.imr) res.imr = imr_cycle(ctx);

  res.output = std::move(ctx.output);
  res.completed = ctx.completed;
  res.timing = ctx.timing;
  return res;
}

void VpuNode::reexecute(Context& ctx, const std::vector<std::size_t>& stripes,
                        std::vector<std::size_t> functional, RecoveryReport& report) {
  if (stripes.empty()) return;
  if (functional.empty()) {
    report.degraded = true;
    for (std::size_t w = 0; w < kWorkerCount; ++w) {
      std::ranges::copy(state_.mem.golden_instr_of(w), state_.mem.instr(w).begin());
      functional.push_back(w);
    }
    state_.mem.ddr_input = state_.mem.golden_input;
    ctx.timing.restore += cfg_.timing.restore;
  }
  report.reschedule = cfg_.timing.reschedule;
  ctx.timing.reschedule += cfg_.timing.reschedule;
  std::vector<SimTime> busy(kWorkerCount, 0);
  for (std::size_t i = 0; i < stripes.size(); ++i) {
    const std::size_t s = stripes[i];
    const std::size_t w = functional[i % functional.size()];
    state_.workers[w].status = WorkerStatus::kFunctional;
    write_descriptor(w, ctx.stripes[s]);
    auto t = dma_tile(w, ctx.stripes[s], false);
    if (!t) continue;
    const Tile resident = read_resident(state_, *t);
    place(ctx.output, ctx.stripes[s], execute(w, resident, ctx.kernel), ctx.kernel);
    ctx.done[s] = true;
    busy[w] += dma_cost(ctx.stripes[s]) + stripe_cost(ctx.stripes[s], ctx.kernel);
    report.redispatched.push_back(s);
  }
  ctx.timing.reexecute += *std::ranges::max_element(busy);
}

RecoveryReport VpuNode::dmr_cycle(Context& ctx) {
  RecoveryReport rep;
  rep.crc_check = cfg_.timing.crc_check;
  ctx.timing.crc_check += cfg_.timing.crc_check;
  std::vector<std::size_t> failed;
  for (std::size_t w = 0; w < kWorkerCount; ++w) {
    if (ctx.tile_failed[w]) failed.push_back(w);
  }
  rep.impaired = failed;
  if (failed.empty()) return rep;

  // The golden copy must itself verify against the supervisor's tile CRCs.
  for (std::size_t s : failed) {
    const Tile& t = ctx.stripes[s];
    const std::size_t row_bytes = std::size_t{t.width} * bytes_of(t.depth);
    const auto golden = std::span(state_.mem.golden_input)
                            .subspan(std::size_t{t.first_row - t.halo_top} * row_bytes,
                                     std::size_t{t.input_rows()} * row_bytes);
    if (crc16_ccitt(golden) != t.crc) rep.unrecoverable_input = true;
  }
  state_.mem.ddr_input = state_.mem.golden_input;
  ctx.timing.restore += cfg_.timing.restore;

  std::vector<std::size_t> functional;
  for (std::size_t w = 0; w < kWorkerCount; ++w) {
    if (!ctx.tile_failed[w] && !ctx.impaired[w] && !state_.workers[w].faulted) functional.push_back(w);
  }
  reexecute(ctx, failed, std::move(functional), rep);
  return rep;
}

RecoveryReport VpuNode::imr_cycle(Context& ctx) {
  RecoveryReport rep;
  rep.crc_check = cfg_.timing.crc_check;
  ctx.timing.crc_check += cfg_.timing.crc_check;
  std::vector<std::size_t> impaired;
  for (std::size_t w = 0; w < kWorkerCount; ++w) {
    if (ctx.impaired[w]) {
      impaired.push_back(w);
      state_.workers[w].status = WorkerStatus::kImpaired;
    }
  }
  rep.impaired = impaired;
  if (impaired.empty()) return rep;

  std::vector<std::size_t> redo;
  for (std::size_t w : impaired) {
    // Stripe w is redone unless a DMR rescheduling already produced it on a
    // worker whose code verified.
    const bool redone_elsewhere = ctx.tile_failed[w] && ctx.done[w];
    if (!redone_elsewhere) redo.push_back(w);
  }
  std::vector<std::size_t> functional;
  for (std::size_t w = 0; w < kWorkerCount; ++w) {
    if (!ctx.impaired[w] && !state_.workers[w].faulted) functional.push_back(w);
  }
  if (functional.empty()) {
    // Restore-then-execute fallback when every worker is impaired.
    rep.degraded = true;
  }
  reexecute(ctx, redo, std::move(functional), rep);
  for (std::size_t w : impaired) {
    state_.workers[w].status = WorkerStatus::kRecovering;
    std::ranges::copy(state_.mem.golden_instr_of(w), state_.mem.instr(w).begin());
    state_.workers[w].status = WorkerStatus::kFunctional;
  }
  ctx.timing.restore += cfg_.timing.restore;
  if (!ctx.completed) {
    ctx.completed = std::ranges::all_of(ctx.done, [](bool d) { return d; });
  }
  return rep;
}

VpuRunResult VpuNode::run_nmr(KernelKind kernel, const NmrConfig& nmr, const InjectionHook& hook) {
  const std::size_t groups = nmr.groups.size();
  const auto stripes = partition_workload(*input_, groups, halo_of(kernel), align_of(kernel));
  VpuRunResult res;
  res.output = kernel == KernelKind::kConv2d ? Image{input_->width, input_->height, {}}
                                             : Image{input_->width / 2, input_->height / 2, {}};
  res.output.values.assign(std::size_t{res.output.width} * res.output.height, 0.0);

  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t m : nmr.groups[g]) write_descriptor(m, stripes[g]);
  }
  if (hook) hook(RunPhase::kTilesAssigned, state_);

  std::vector<std::optional<Tile>> resident(kWorkerCount);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t m : nmr.groups[g]) {
      resident[m] = dma_tile(m, stripes[g], false);
      res.timing.dma = std::max(res.timing.dma, dma_cost(stripes[g]));
    }
  }
  if (hook) hook(RunPhase::kTilesResident, state_);

  std::size_t voted_pixels = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t expected = kernel == KernelKind::kConv2d
                                     ? std::size_t{stripes[g].row_count} * stripes[g].width
                                     : std::size_t{stripes[g].row_count / 2} * (stripes[g].width / 2);
    std::vector<std::vector<double>> outputs;
    for (std::size_t m : nmr.groups[g]) {
      std::vector<double> o;
      if (resident[m]) o = execute(m, read_resident(state_, *resident[m]), kernel);
      o.resize(expected, 0.0);  // a stalled member leaves a stale zero buffer
      outputs.push_back(std::move(o));
    }
    std::vector<std::span<const double>> views(outputs.begin(), outputs.end());
    auto vote = majority_vote<double>(views);
    res.vote_flagged += vote.uncorrectable;
    place(res.output, stripes[g], vote.values, kernel);
    voted_pixels += expected * nmr.n;
    res.timing.compute = std::max(res.timing.compute, stripe_cost(stripes[g], kernel));
  }
  res.timing.voting = ns_to_us(voted_pixels * cfg_.timing.vote_ns_per_pixel);
  return res;
}

// ---------------------------------------------------------------------------

PixelFrame read_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok += static_cast<char>(bytes[pos++]);
    return tok;
  };
  if (next_token() != "P5") throw VpuError("PGM: expected binary P5 header");
  std::uint32_t w = 0, h = 0, maxval = 0;
  try {
    w = static_cast<std::uint32_t>(std::stoul(next_token()));
    h = static_cast<std::uint32_t>(std::stoul(next_token()));
    maxval = static_cast<std::uint32_t>(std::stoul(next_token()));
  } catch (const std::exception&) {
    throw VpuError("PGM: malformed header");
  }
  if (maxval == 0 || maxval > 65535) throw VpuError("PGM: maxval out of range");
  ++pos;  // single whitespace before the raster
  const PixelDepth depth = maxval < 256 ? PixelDepth::k8 : PixelDepth::k16;
  const std::size_t need = std::size_t{w} * h * bytes_of(depth);
  if (pos + need > bytes.size()) throw VpuError("PGM: truncated raster");
  PixelFrame f(w, h, depth);
  f.pixels = deserialize_pixels(bytes.subspan(pos, need), depth);
  for (auto p : f.pixels) {
    if (p > maxval) throw VpuError("PGM: sample exceeds maxval");
  }
  return f;
}

std::vector<std::uint8_t> write_pgm(const PixelFrame& frame) {
  if (frame.depth == PixelDepth::k24) throw VpuError("PGM: 24-bit depth not representable");
  std::ostringstream header;
  header << "P5\n" << frame.width << ' ' << frame.height << '\n' << frame.max_value() << '\n';
  const std::string h = header.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  serialize_pixels_into(frame.pixels, frame.depth, out);
  return out;
}

PixelFrame to_pixel_frame(const Image& image, PixelDepth depth) {
  PixelFrame f(image.width, image.height, depth);
  const double hi = static_cast<double>(f.max_value());
  for (std::size_t i = 0; i < image.values.size(); ++i) {
    const double v = std::clamp(std::floor(image.values[i] + 0.5), 0.0, hi);
    f.pixels[i] = static_cast<std::uint32_t>(v);
  }
  return f;
}

}  // namespace seusim
