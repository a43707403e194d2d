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

#include "seusim/fault_injector.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace seusim {

namespace {

constexpr std::array<std::string_view, kInjectionKindCount> kKindNames = {
    "fpga_config_bit", "vpu_ddr_input", "vpu_worker_local", "vpu_shared_var", "vpu_instr", "link_bit"};

std::string address_text(std::size_t worker, std::size_t offset, std::size_t len) {
  return "worker=" + std::to_string(worker) + ",offset=" + std::to_string(offset) +
         ",len=" + std::to_string(len);
}

// XORs a burst into `region` starting at offset % size; returns the resolved
// (offset, length), clipped at the region end.
std::pair<std::size_t, std::size_t> xor_burst(std::span<std::uint8_t> region, const VpuAddress& a) {
  if (region.empty()) return {0, 0};
  const std::size_t off = static_cast<std::size_t>(a.offset % region.size());
  const std::size_t len = std::min<std::size_t>(a.burst, region.size() - off);
  SeededRng bytes(a.pattern);
  for (std::size_t i = 0; i < len; ++i) {
    region[off + i] ^= static_cast<std::uint8_t>(1 + bytes.uniform(255));  // never zero
  }
  return {off, len};
}

std::uint64_t hash_bytes(std::uint64_t h, std::span<const std::uint8_t> bytes) {
  return mix64(h ^ hash_label(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
}

}  // namespace

std::string_view kind_name(InjectionKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

InjectionKind parse_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<InjectionKind>(i);
  }
  throw CampaignError("unknown injection kind '" + std::string(name) + "'");
}

bool is_vpu_kind(InjectionKind k) {
  return k == InjectionKind::kVpuDdrInput || k == InjectionKind::kVpuWorkerLocal ||
         k == InjectionKind::kVpuSharedVar || k == InjectionKind::kVpuInstr;
}

std::string_view domain_name(AddressDomain d) {
  return d == AddressDomain::kEssential ? "essential" : "utilized";
}

AddressDomain parse_domain(std::string_view name) {
  if (name == "essential") return AddressDomain::kEssential;
  if (name == "utilized") return AddressDomain::kUtilized;
  throw CampaignError("unknown address domain '" + std::string(name) + "'");
}

InjectionCampaign build_campaign(const CampaignSpec& spec, const CampaignTargets& targets,
                                 SeededRng& rng) {
  if (spec.targets.empty()) throw CampaignError("campaign has no target classes");
  double total_weight = 0.0;
  bool wants_fpga = false, wants_vpu = false, wants_link = false;
  for (const auto& t : spec.targets) {
    if (!(t.weight > 0.0) || !std::isfinite(t.weight)) {
      throw CampaignError("target weight for " + std::string(kind_name(t.kind)) + " must be positive");
    }
    total_weight += t.weight;
    wants_fpga |= t.kind == InjectionKind::kFpgaConfigBit;
    wants_vpu |= is_vpu_kind(t.kind);
    wants_link |= t.kind == InjectionKind::kLinkBit;
  }

  std::vector<SimTime> times = spec.explicit_times;
  if (times.empty()) {
    if (spec.period == 0) throw CampaignError("campaign period must be positive");
    for (SimTime t = 0; t < spec.duration; t += spec.period) times.push_back(t);
  } else {
    std::ranges::sort(times);
    if (times.back() >= spec.duration) throw CampaignError("explicit event time beyond duration");
  }

  // FPGA address pool.
  std::vector<ConfigBitAddress> essential_pool;
  std::vector<ComponentRegion> regions;
  std::uint64_t utilized_bits = 0;
  if (wants_fpga) {
    if (targets.fabric == nullptr) throw CampaignError("FPGA injection requested without a fabric");
    const FabricLayout& layout = targets.fabric->layout();
    std::vector<Component> comps = spec.components;
    if (comps.empty()) {
      for (const auto& r : layout.regions()) comps.push_back(r.id);
    }
    for (Component c : comps) {
      const auto r = layout.region(c);
      if (!r) {
        throw CampaignError("component " + std::string(component_name(c)) + " is not in the design");
      }
      regions.push_back(*r);
      utilized_bits += std::uint64_t{r->frame_count} * kFrameBits;
      const auto& bits = targets.fabric->essential().bits(c);
      essential_pool.insert(essential_pool.end(), bits.begin(), bits.end());
    }
    if (spec.domain == AddressDomain::kEssential && essential_pool.empty()) {
      throw CampaignError("targeted components have no essential bits");
    }
    if (utilized_bits == 0) throw CampaignError("targeted components occupy no frames");
  }

  std::vector<std::size_t> workers = spec.workers;
  if (wants_vpu) {
    if (workers.empty()) {
      for (std::size_t w = 0; w < kWorkerCount; ++w) workers.push_back(w);
    }
    for (std::size_t w : workers) {
      if (w >= kWorkerCount) throw CampaignError("worker index out of range");
    }
    if (spec.burst_min == 0 || spec.burst_min > spec.burst_max) throw CampaignError("bad burst range");
  }
  if (wants_link && spec.links.empty()) throw CampaignError("link injection requested without links");

  InjectionCampaign c;
  c.seed = spec.seed;
  c.duration = spec.duration;
  c.targets = spec.targets;
  c.schedule.reserve(times.size());
  for (SimTime t : times) {
    InjectionEvent ev;
    ev.time = t;
    ev.kind = spec.targets.front().kind;
    if (spec.targets.size() > 1) {
      double u = rng.uniform_real() * total_weight;
      for (const auto& tw : spec.targets) {
        ev.kind = tw.kind;
        if (u < tw.weight) break;
        u -= tw.weight;
      }
    }
    if (ev.kind == InjectionKind::kFpgaConfigBit) {
      if (spec.domain == AddressDomain::kEssential) {
        ev.address = essential_pool[rng.uniform(essential_pool.size())];
      } else {
        std::uint64_t k = rng.uniform(utilized_bits);
        for (const auto& r : regions) {
          const std::uint64_t bits = std::uint64_t{r.frame_count} * kFrameBits;
          if (k < bits) {
            ev.address = ConfigBitAddress::from_flat(std::uint64_t{r.first_frame} * kFrameBits + k);
            break;
          }
          k -= bits;
        }
      }
    } else if (ev.kind == InjectionKind::kLinkBit) {
      ev.address = LinkBitAddress{spec.links[rng.uniform(spec.links.size())], rng.next_u64()};
    } else {
      ev = make_vpu_event(ev.kind, workers[rng.uniform(workers.size())], t, rng, spec.burst_min,
                          spec.burst_max);
    }
    c.schedule.push_back(std::move(ev));
  }
  return c;
}

std::string MutationRecord::line() const {
  std::string s = std::to_string(time) + " " + std::string(kind_name(kind)) + " " + address;
  if (noop) s += " noop";
  return s;
}

std::string MutationLog::text() const {
  std::string out;
  for (const auto& r : records_) {
    out += r.line();
    out += '\n';
  }
  return out;
}

std::uint64_t MutationLog::digest() const { return hash_label(text()); }

MutationRecord inject_config_bit(FpgaFabric& fabric, SimTime time, ConfigBitAddress addr) {
  if (addr.frame >= fabric.memory().frame_count() || addr.bit >= kFrameBits) {
    throw CampaignError("configuration bit address outside memory");
  }
  const FlipEffect e = fabric.flip(addr);
  MutationRecord r;
  r.time = time;
  r.kind = InjectionKind::kFpgaConfigBit;
  r.address = "frame=" + std::to_string(addr.frame) + ",bit=" + std::to_string(addr.bit) +
              ",component=" + (e.owner ? std::string(component_name(*e.owner)) : "none") +
              ",essential=" + (e.essential ? "1" : "0");
  return r;
}

MutationRecord inject_config_bit(FpgaNode& node, SimTime time, ConfigBitAddress addr) {
  return inject_config_bit(node.fabric(), time, addr);
}

MutationRecord corrupt_vpu(const InjectionEvent& event, VpuState& vpu) {
  const auto* a = std::get_if<VpuAddress>(&event.address);
  if (a == nullptr || !is_vpu_kind(event.kind)) throw CampaignError("corrupt_vpu: not a VPU event");
  if (a->worker >= kWorkerCount) throw CampaignError("corrupt_vpu: worker out of range");
  MutationRecord r;
  r.time = event.time;
  r.kind = event.kind;

  std::span<std::uint8_t> region;
  std::size_t base = 0;  // reported offsets are relative to the region's owner
  switch (event.kind) {
    case InjectionKind::kVpuDdrInput: {
      // Aim at the rows the worker was told to fetch; fall back to the whole
      // input if its descriptor is already unusable.
      region = vpu.mem.ddr_input;
      const auto d = vpu.descriptor(a->worker);
      const std::uint32_t first = (std::uint32_t{d[0]} << 24) | (std::uint32_t{d[1]} << 16) |
                                  (std::uint32_t{d[2]} << 8) | d[3];
      const std::uint32_t count = (std::uint32_t{d[4]} << 24) | (std::uint32_t{d[5]} << 16) |
                                  (std::uint32_t{d[6]} << 8) | d[7];
      const std::size_t row_bytes = std::size_t{vpu.image_width} * bytes_of(vpu.depth);
      if (count > 0 && first < vpu.image_height && count <= vpu.image_height - first) {
        base = std::size_t{first} * row_bytes;
        region = region.subspan(base, std::size_t{count} * row_bytes);
      }
      break;
    }
    case InjectionKind::kVpuWorkerLocal:
      if (vpu.workers[a->worker].cmx_bytes > 0) region = vpu.cmx_tile(a->worker);
      break;
    case InjectionKind::kVpuSharedVar:
      region = vpu.descriptor(a->worker);
      break;
    case InjectionKind::kVpuInstr:
      region = vpu.mem.instr(a->worker);
      break;
    default:
      break;
  }
  if (region.empty()) {
    r.address = address_text(a->worker, 0, 0);
    r.noop = true;
    return r;
  }
  const auto [off, len] = xor_burst(region, *a);
  r.address = address_text(a->worker, base + off, len);
  return r;
}

MutationRecord corrupt_link_bit(FrameLink& link, SimTime time, std::uint64_t bit) {
  MutationRecord r;
  r.time = time;
  r.kind = InjectionKind::kLinkBit;
  const FrameWire* head = link.head();
  if (head == nullptr) {
    r.address = std::string(link_name(link.id())) + ":bit=-";
    r.noop = true;
    return r;
  }
  const std::uint64_t resolved = bit % head->total_bits();
  link.corrupt_in_flight(resolved);
  r.address = std::string(link_name(link.id())) + ":bit=" + std::to_string(resolved);
  return r;
}

std::vector<std::size_t> choose_workers(std::size_t count, SeededRng& rng) {
  if (count > kWorkerCount) throw CampaignError("cannot impair more than 12 workers");
  std::vector<std::size_t> all(kWorkerCount);
  for (std::size_t i = 0; i < kWorkerCount; ++i) all[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(all[i], all[i + rng.uniform(kWorkerCount - i)]);
  }
  all.resize(count);
  std::ranges::sort(all);
  return all;
}

InjectionEvent make_vpu_event(InjectionKind kind, std::size_t worker, SimTime time, SeededRng& rng,
                              std::uint32_t burst_min, std::uint32_t burst_max) {
  if (!is_vpu_kind(kind)) throw CampaignError("make_vpu_event: not a VPU kind");
  VpuAddress a;
  a.worker = worker;
  a.offset = rng.next_u64();
  a.burst = static_cast<std::uint32_t>(rng.uniform_int(burst_min, burst_max));
  a.pattern = rng.next_u64();
  return {time, kind, a};
}

InjectionHook make_vpu_hook(std::vector<InjectionEvent> events, MutationLog& log) {
  // Data and code are hit before descriptors so a ddr_input burst still finds
  // the worker's intended rows.
  std::ranges::stable_sort(events, [](const InjectionEvent& a, const InjectionEvent& b) {
    auto rank = [](InjectionKind k) {
      switch (k) {
        case InjectionKind::kVpuDdrInput: return 0;
        case InjectionKind::kVpuInstr: return 1;
        case InjectionKind::kVpuSharedVar: return 2;
        default: return 3;
      }
    };
    return rank(a.kind) < rank(b.kind);
  });
  return [events = std::move(events), &log](RunPhase phase, VpuState& vpu) {
    for (const auto& ev : events) {
      const bool resident = ev.kind == InjectionKind::kVpuWorkerLocal;
      if ((phase == RunPhase::kTilesResident) != resident || phase == RunPhase::kInputLoaded) continue;
      const std::uint64_t before = golden_digest(vpu);
      log.add(corrupt_vpu(ev, vpu));
      if (golden_digest(vpu) != before) throw InvariantViolation("injection altered a golden copy");
    }
  };
}

std::uint64_t golden_digest(const VpuState& vpu) {
  return hash_bytes(hash_bytes(0, vpu.mem.golden_input), vpu.mem.golden_instr);
}

}  // namespace seusim
