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

#include "seusim/campaign_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace seusim {

using nlohmann::json;

SimTime FunctionalityTimeline::time_in(WindowClass c) const {
  SimTime t = 0;
  for (const auto& iv : intervals) {
    if (iv.cls == c) t += iv.end - iv.start;
  }
  return t;
}

double FunctionalityTimeline::percent(WindowClass c) const {
  if (duration == 0) return 0.0;
  return 100.0 * static_cast<double>(time_in(c)) / static_cast<double>(duration);
}

FunctionalityTimeline classify_timeline(std::span<const WindowSample> windows) {
  FunctionalityTimeline tl;
  SimTime cursor = 0;
  for (const auto& w : windows) {
    if (w.start != cursor || w.end <= w.start) {
      throw InvariantViolation("timeline windows must tile the run without gaps or overlap");
    }
    if (!tl.intervals.empty() && tl.intervals.back().cls == w.cls) {
      tl.intervals.back().end = w.end;
    } else {
      tl.intervals.push_back({w.start, w.end, w.cls});
    }
    cursor = w.end;
  }
  tl.duration = cursor;
  return tl;
}

double ReliabilityModel::reliability(double t_seconds) const { return std::exp(-lambda * t_seconds); }

std::vector<std::pair<double, double>> reliability_curve(double lambda, double horizon_s,
                                                         std::size_t samples) {
  std::vector<std::pair<double, double>> curve;
  if (samples == 0) return curve;
  curve.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = samples == 1 ? 0.0 : horizon_s * static_cast<double>(i) / static_cast<double>(samples - 1);
    curve.emplace_back(t, i == 0 ? 1.0 : std::exp(-lambda * t));
  }
  return curve;
}

ReliabilityModel fit_lambda_from_counts(std::uint64_t failures, double correct_seconds,
                                        double horizon_s, std::size_t samples) {
  if (!(correct_seconds > 0.0)) {
    throw std::domain_error("fit_lambda: no correct operating time, failure rate undefined");
  }
  ReliabilityModel m;
  m.failures = failures;
  m.correct_seconds = correct_seconds;
  m.lambda = static_cast<double>(failures) / correct_seconds;
  m.curve = reliability_curve(m.lambda, horizon_s, samples);
  return m;
}

ReliabilityModel fit_lambda(std::span<const FunctionalityTimeline> pooled, double horizon_s,
                            std::size_t samples) {
  std::uint64_t failures = 0;
  SimTime correct = 0;
  for (const auto& tl : pooled) {
    for (std::size_t i = 0; i < tl.intervals.size(); ++i) {
      if (tl.intervals[i].cls != WindowClass::kCorrect) continue;
      correct += tl.intervals[i].end - tl.intervals[i].start;
      if (i + 1 < tl.intervals.size()) ++failures;  // merged, so the next one is bad
    }
  }
  return fit_lambda_from_counts(failures, static_cast<double>(correct) / kSecond, horizon_s, samples);
}

ReliabilityModel fit_lambda(const FunctionalityTimeline& timeline, double horizon_s, std::size_t samples) {
  return fit_lambda(std::span<const FunctionalityTimeline>(&timeline, 1), horizon_s, samples);
}

// ---------------------------------------------------------------------------

FpgaRunReport run_fpga(const Architecture& arch, std::uint64_t seed, const FpgaHarnessConfig& cfg) {
  for (const auto& t : cfg.campaign.targets) {
    if (t.kind != InjectionKind::kFpgaConfigBit) {
      throw ConfigError("FPGA campaigns only accept fpga_config_bit targets");
    }
  }
  const SimTime window = cfg.window ? cfg.window : cfg.campaign.period;
  if (window == 0) throw ConfigError("evaluation window must be positive");
  if (cfg.campaign.duration == 0) throw ConfigError("campaign duration must be positive");

  Simulator sim(seed);
  FpgaConfig fc = cfg.fpga;
  fc.arch = arch;
  FpgaNode node(sim, fc);

  CampaignSpec spec = cfg.campaign;
  spec.seed = seed;
  SeededRng rng = sim.fork_rng("campaign");
  const InjectionCampaign campaign = build_campaign(spec, {&node.fabric()}, rng);
  const std::uint64_t golden_before = node.fabric().memory().golden_digest();

  FpgaRunReport rep;
  rep.arch = arch;
  rep.seed = seed;
  rep.injections = campaign.schedule.size();

  // Checkpoints go in first so that, at a shared instant, a window is
  // classified before the next injection lands.
  std::vector<WindowSample> samples;
  for (SimTime start = 0; start < spec.duration; start += window) {
    const SimTime end = std::min(start + window, spec.duration);
    samples.push_back({start, end, WindowClass::kCorrect});
  }
  for (std::size_t k = 0; k < samples.size(); ++k) {
    sim.schedule(samples[k].end, "harness", "checkpoint",
                 [&, k] { samples[k].cls = node.checkpoint().cls; });
  }
  node.start();
  for (const auto& ev : campaign.schedule) {
    const auto addr = std::get<ConfigBitAddress>(ev.address);
    sim.schedule(ev.time, "injector", "config-bit", [&, addr, t = ev.time] {
      MutationRecord r = inject_config_bit(node, t, addr);
      if (r.address.ends_with("essential=1")) ++rep.essential_hits;
      rep.log.add(std::move(r));
    });
  }
  sim.run_until(spec.duration);

  if (node.fabric().memory().golden_digest() != golden_before) {
    throw InvariantViolation("golden configuration image changed during the run");
  }
  rep.timeline = classify_timeline(samples);
  rep.stats = node.stats();
  rep.scrub_repairs = node.scrubber().repairs().size();
  rep.dpr_reloads = node.dpr().reloads().size();
  return rep;
}

std::vector<FpgaRunReport> run_matrix(const std::vector<Architecture>& archs,
                                      const std::vector<std::uint64_t>& seeds,
                                      const FpgaHarnessConfig& cfg, unsigned threads) {
  const std::size_t cells = archs.size() * seeds.size();
  std::vector<FpgaRunReport> out(cells);
  std::vector<std::exception_ptr> errors(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells; i = next++) {
      try {
        out[i] = run_fpga(archs[i / seeds.size()], seeds[i % seeds.size()], cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cells)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::ranges::sort(v);
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<ArchSummary> summarize(const std::vector<FpgaRunReport>& reports) {
  std::vector<ArchSummary> out;
  for (const auto& r : reports) {
    auto it = std::ranges::find_if(out, [&](const ArchSummary& s) { return s.arch == r.arch; });
    if (it == out.end()) {
      out.push_back({});
      out.back().arch = r.arch;
      it = out.end() - 1;
    }
    ++it->runs;
  }
  for (auto& s : out) {
    std::vector<double> down, err, ok;
    std::vector<FunctionalityTimeline> tls;
    for (const auto& r : reports) {
      if (!(r.arch == s.arch)) continue;
      down.push_back(r.timeline.percent(WindowClass::kDown));
      err.push_back(r.timeline.percent(WindowClass::kErroneous));
      ok.push_back(r.timeline.percent(WindowClass::kCorrect));
      tls.push_back(r.timeline);
      try {
        s.seed_lambda.push_back(fit_lambda(r.timeline).lambda);
      } catch (const std::domain_error&) {
        s.seed_lambda.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    s.down = median(down);
    s.erroneous = median(err);
    s.correct = median(ok);
    s.correct_min = *std::ranges::min_element(ok);
    s.correct_max = *std::ranges::max_element(ok);
    try {
      s.pooled = fit_lambda(tls);
      s.lambda_defined = true;
    } catch (const std::domain_error&) {
      s.lambda_defined = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

PixelFrame synthetic_image(std::uint32_t width, std::uint32_t height, PixelDepth depth,
                           std::uint64_t seed) {
  PixelFrame f(width, height, depth);
  SeededRng rng = SeededRng(seed).fork("image");
  const std::uint64_t span = std::uint64_t{f.max_value()} + 1;
  for (auto& p : f.pixels) p = static_cast<std::uint32_t>(rng.uniform(span));
  return f;
}

VpuRunReport run_vpu(const FtMode& mode, KernelKind kernel, std::size_t impaired, std::uint64_t seed,
                     const VpuHarnessConfig& cfg, const std::optional<std::vector<std::size_t>>& workers) {
  if (cfg.kinds.empty()) throw ConfigError("VPU campaign needs at least one injection kind");
  for (InjectionKind k : cfg.kinds) {
    if (!is_vpu_kind(k)) throw ConfigError("VPU campaigns only accept vpu_* injection kinds");
  }
  const PixelFrame image = cfg.image ? *cfg.image : synthetic_image(cfg.width, cfg.height, cfg.depth, seed);
  VpuNode node(cfg.vpu);
  node.load_input(image);

  SeededRng rng = SeededRng(seed).fork("vpu-campaign");
  VpuRunReport rep;
  rep.mode = mode;
  rep.kernel = kernel;
  rep.seed = seed;
  rep.workers = workers ? *workers : choose_workers(impaired, rng);
  rep.impaired = rep.workers.size();
  std::vector<InjectionEvent> events;
  for (std::size_t w : rep.workers) {
    const InjectionKind k = cfg.kinds.size() == 1 ? cfg.kinds[0] : cfg.kinds[rng.uniform(cfg.kinds.size())];
    events.push_back(make_vpu_event(k, w, 0, rng, cfg.burst_min, cfg.burst_max));
  }
  const std::uint64_t golden_before = golden_digest(node.state());
  VpuRunResult res = node.run(kernel, mode, make_vpu_hook(std::move(events), rep.log));
  if (golden_digest(node.state()) != golden_before) {
    throw InvariantViolation("golden VPU store changed during the run");
  }
  const Image golden = reference_output(image, kernel, cfg.vpu.conv_kernel);
  rep.error_rate = error_rate(res.output, golden);
  rep.completed = res.completed;
  rep.cls = !res.completed ? WindowClass::kDown
                           : (rep.error_rate > 0.0 ? WindowClass::kErroneous : WindowClass::kCorrect);
  rep.vote_flagged = res.vote_flagged;
  rep.timing = res.timing;
  rep.baseline_latency = res.baseline_latency;
  return rep;
}

std::vector<VpuRunReport> run_vpu_matrix(const std::vector<std::uint64_t>& seeds,
                                         const VpuHarnessConfig& cfg) {
  std::vector<FtMode> modes = cfg.modes;
  if (modes.empty()) {
    for (const char* m : {"none", "IMR", "DMR", "IMR+DMR", "NMR3", "NMR5"}) modes.push_back(FtMode::parse(m));
  }
  std::vector<VpuRunReport> out;
  for (const auto& mode : modes) {
    for (KernelKind k : cfg.kernels) {
      for (std::size_t n : cfg.impaired_counts) {
        for (std::uint64_t s : seeds) out.push_back(run_vpu(mode, k, n, s, cfg));
      }
    }
  }
  return out;
}

std::vector<ErrorRow> summarize_vpu(const std::vector<VpuRunReport>& reports) {
  std::vector<ErrorRow> rows;
  for (const auto& r : reports) {
    const std::string mode = r.mode.name();
    auto it = std::ranges::find_if(rows, [&](const ErrorRow& e) {
      return e.mode == mode && e.kernel == r.kernel && e.impaired == r.impaired;
    });
    if (it == rows.end()) {
      rows.push_back({mode, r.kernel, r.impaired, r.error_rate, r.error_rate, 0, 0});
      it = rows.end() - 1;
    }
    it->min = std::min(it->min, r.error_rate);
    it->max = std::max(it->max, r.error_rate);
    ++it->runs;
    it->stalled += !r.completed;
  }
  return rows;
}

// ---------------------------------------------------------------------------

LinkRunReport run_link(std::uint64_t seed, const LinkHarnessConfig& cfg) {
  for (const auto& t : cfg.campaign.targets) {
    if (t.kind != InjectionKind::kLinkBit) throw ConfigError("link campaigns only accept link_bit targets");
  }
  Simulator sim(seed);
  LinkRunReport rep;
  rep.seed = seed;
  std::array<std::deque<PixelFrame>, 2> sent;
  auto on_delivery = [&](std::size_t idx) {
    return [&, idx](const DecodeResult& d, SimTime) {
      const PixelFrame expect = std::move(sent[idx].front());
      sent[idx].pop_front();
      if (d.ok() && d.frame.pixels != expect.pixels) ++rep.undetected;
    };
  };
  std::array<FrameLink, 2> links = {
      FrameLink(sim, LinkId::kCif, {cfg.bits_per_second}, on_delivery(0)),
      FrameLink(sim, LinkId::kLcd, {cfg.bits_per_second}, on_delivery(1))};

  CampaignSpec spec = cfg.campaign;
  spec.seed = seed;
  SeededRng rng = sim.fork_rng("campaign");
  const InjectionCampaign campaign = build_campaign(spec, {}, rng);
  rep.injections = campaign.schedule.size();

  // One frame per link at every event instant, queued before the event so
  // there is always something in flight to hit.
  SeededRng pixels = sim.fork_rng("frames");
  for (const auto& ev : campaign.schedule) {
    for (std::size_t i = 0; i < 2; ++i) {
      PixelFrame f = synthetic_image(cfg.width, cfg.height, cfg.depth, pixels.next_u64());
      sim.schedule(ev.time, "harness", "send", [&, i, f = std::move(f)]() mutable {
        links[i].transmit(encode_frame(f), sim.now());
        sent[i].push_back(std::move(f));
      });
    }
  }
  for (const auto& ev : campaign.schedule) {
    const auto a = std::get<LinkBitAddress>(ev.address);
    sim.schedule(ev.time, "injector", "link-bit", [&, a, t = ev.time] {
      MutationRecord r = corrupt_link_bit(links[static_cast<std::size_t>(a.link)], t, a.bit);
      rep.noops += r.noop;
      rep.log.add(std::move(r));
    });
  }
  sim.run_until(spec.duration);
  // Drain frames still on the wire.
  while (links[0].in_flight() + links[1].in_flight() > 0) sim.run_until(sim.now() + kSecond);
  rep.cif = links[0].status();
  rep.lcd = links[1].status();
  return rep;
}

// ---------------------------------------------------------------------------
// Campaign files

namespace {

SimTime ms_field(const json& j, const char* key, SimTime fallback) {
  if (!j.contains(key)) return fallback;
  const double v = j.at(key).get<double>();
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(key) + " must be non-negative");
  return static_cast<SimTime>(std::llround(v * kMillisecond));
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (std::ranges::find(allowed, k) == allowed.end()) {
      throw ConfigError("unknown key '" + k + "' in " + std::string(where));
    }
  }
}

PixelDepth depth_field(const json& j) {
  try {
    return depth_from_bits(j.get<unsigned>());
  } catch (const FrameError& e) {
    throw ConfigError(e.what());
  }
}

void parse_fpga_overrides(const json& j, FpgaConfig& f) {
  check_keys(j,
             {"hang_fraction", "watchdog_timeout_ms", "heartbeat_period_ms", "dpr_sweep_period_ms",
              "scrub_repair_ms", "scan_period_us", "scrub_mode", "reset_duration_ms", "icap_bytes_per_second",
              "total_frames", "layout_seed", "components", "batch_length", "dpr_partial_bytes"},
             "fpga");
  if (j.contains("hang_fraction")) {
    f.hang_fraction = j.at("hang_fraction").get<double>();
    if (f.hang_fraction < 0.0 || f.hang_fraction > 1.0) throw ConfigError("hang_fraction must be in [0, 1]");
  }
  f.watchdog_timeout = ms_field(j, "watchdog_timeout_ms", f.watchdog_timeout);
  f.heartbeat_period = ms_field(j, "heartbeat_period_ms", f.heartbeat_period);
  f.dpr_sweep_period = ms_field(j, "dpr_sweep_period_ms", f.dpr_sweep_period);
  f.scrub.frame_repair_latency = ms_field(j, "scrub_repair_ms", f.scrub.frame_repair_latency);
  if (j.contains("scan_period_us")) f.scrub.scan_period = j.at("scan_period_us").get<SimTime>();
  if (j.contains("scrub_mode")) {
    const auto m = j.at("scrub_mode").get<std::string>();
    if (m == "replace") f.scrub.mode = ScrubMode::kReplace;
    else if (m == "enhanced") f.scrub.mode = ScrubMode::kEnhancedRepair;
    else throw ConfigError("scrub_mode must be replace or enhanced");
  }
  if (j.contains("reset_duration_ms")) f.reset_duration = ms_field(j, "reset_duration_ms", 0);
  if (j.contains("icap_bytes_per_second")) f.icap_bytes_per_second = j.at("icap_bytes_per_second").get<std::uint64_t>();
  if (j.contains("total_frames")) f.fabric.total_frames = j.at("total_frames").get<std::uint32_t>();
  if (j.contains("layout_seed")) f.fabric.layout_seed = j.at("layout_seed").get<std::uint64_t>();
  if (j.contains("batch_length")) f.batch_length = j.at("batch_length").get<std::size_t>();
  if (j.contains("dpr_partial_bytes")) f.dpr_partial_bytes = j.at("dpr_partial_bytes").get<std::size_t>();
  if (j.contains("components")) {
    for (const auto& [name, spec] : j.at("components").items()) {
      const auto c = parse_component(name);
      if (!c) throw ConfigError("unknown component '" + name + "'");
      check_keys(spec, {"frames", "essential_density"}, name);
      auto& cs = f.fabric.components[index_of(*c)];
      if (spec.contains("frames")) cs.frames = spec.at("frames").get<std::uint32_t>();
      if (spec.contains("essential_density")) cs.essential_density = spec.at("essential_density").get<double>();
      if (cs.essential_density < 0.0 || cs.essential_density > 1.0) {
        throw ConfigError("essential_density must be in [0, 1]");
      }
    }
  }
}

}  // namespace

CampaignFile parse_campaign(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("campaign file is not valid JSON: ") + e.what());
  }
  try {
    check_keys(j,
               {"node", "seed", "seeds", "architectures", "threads", "duration_ms", "period_ms", "window_ms",
                "event_times_ms", "targets", "components", "address_domain", "burst", "workers", "fpga", "vpu",
                "link"},
               "campaign");
    CampaignFile cf;
    const std::string node = j.value("node", "fpga");
    if (node == "fpga") cf.node = NodeKind::kFpga;
    else if (node == "vpu") cf.node = NodeKind::kVpu;
    else if (node == "link") cf.node = NodeKind::kLink;
    else throw ConfigError("node must be fpga, vpu or link");

    if (j.contains("seeds")) cf.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    else if (j.contains("seed")) cf.seeds = {j.at("seed").get<std::uint64_t>()};
    if (cf.seeds.empty()) throw ConfigError("at least one seed is required");
    cf.threads = j.value("threads", 1u);

    CampaignSpec spec;
    spec.seed = cf.seeds.front();
    spec.duration = ms_field(j, "duration_ms", spec.duration);
    spec.period = ms_field(j, "period_ms", spec.period);
    if (j.contains("event_times_ms")) {
      for (double t : j.at("event_times_ms").get<std::vector<double>>()) {
        spec.explicit_times.push_back(static_cast<SimTime>(std::llround(t * kMillisecond)));
      }
    }
    if (j.contains("targets")) {
      spec.targets.clear();
      for (const auto& [k, w] : j.at("targets").items()) {
        const double weight = w.get<double>();
        if (!(weight > 0.0) || !std::isfinite(weight)) throw ConfigError("target weight for " + k + " must be positive");
        spec.targets.push_back({parse_kind(k), weight});
      }
    } else if (cf.node == NodeKind::kLink) {
      spec.targets = {{InjectionKind::kLinkBit, 1.0}};
    }
    if (j.contains("components")) {
      for (const auto& n : j.at("components").get<std::vector<std::string>>()) {
        const auto c = parse_component(n);
        if (!c) throw ConfigError("unknown component '" + n + "'");
        spec.components.push_back(*c);
      }
    }
    if (j.contains("address_domain")) spec.domain = parse_domain(j.at("address_domain").get<std::string>());
    if (j.contains("burst")) {
      const auto b = j.at("burst").get<std::vector<std::uint32_t>>();
      if (b.size() != 2 || b[0] == 0 || b[0] > b[1]) throw ConfigError("burst must be [min, max] with 1 <= min <= max");
      spec.burst_min = b[0];
      spec.burst_max = b[1];
    }
    if (j.contains("workers")) spec.workers = j.at("workers").get<std::vector<std::size_t>>();

    if (j.contains("architectures")) {
      const json& a = j.at("architectures");
      if (a.is_string() && a.get<std::string>() == "all") {
        cf.archs = Architecture::table_rows();
      } else {
        for (const auto& n : a.get<std::vector<std::string>>()) cf.archs.push_back(Architecture::parse(n));
      }
    } else {
      cf.archs = Architecture::table_rows();
    }

    cf.fpga.campaign = spec;
    cf.fpga.window = ms_field(j, "window_ms", 0);
    if (j.contains("fpga")) parse_fpga_overrides(j.at("fpga"), cf.fpga.fpga);

    cf.vpu.burst_min = spec.burst_min;
    cf.vpu.burst_max = spec.burst_max;
    if (j.contains("vpu")) {
      const json& v = j.at("vpu");
      check_keys(v, {"width", "height", "depth", "pgm", "impaired", "kinds", "modes", "kernels"}, "vpu");
      cf.vpu.width = v.value("width", cf.vpu.width);
      cf.vpu.height = v.value("height", cf.vpu.height);
      if (v.contains("depth")) cf.vpu.depth = depth_field(v.at("depth"));
      if (v.contains("pgm")) {
        std::ifstream in(v.at("pgm").get<std::string>(), std::ios::binary);
        if (!in) throw ConfigError("cannot open PGM image");
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        cf.vpu.image = read_pgm(bytes);
      }
      if (v.contains("impaired")) cf.vpu.impaired_counts = v.at("impaired").get<std::vector<std::size_t>>();
      if (v.contains("kinds")) {
        cf.vpu.kinds.clear();
        for (const auto& k : v.at("kinds").get<std::vector<std::string>>()) cf.vpu.kinds.push_back(parse_kind(k));
      }
      if (v.contains("modes")) {
        for (const auto& m : v.at("modes").get<std::vector<std::string>>()) cf.vpu.modes.push_back(FtMode::parse(m));
      }
      if (v.contains("kernels")) {
        cf.vpu.kernels.clear();
        for (const auto& k : v.at("kernels").get<std::vector<std::string>>()) cf.vpu.kernels.push_back(parse_kernel(k));
      }
    }

    cf.link.campaign = spec;
    if (j.contains("link")) {
      const json& l = j.at("link");
      check_keys(l, {"width", "height", "depth", "bits_per_second"}, "link");
      cf.link.width = l.value("width", cf.link.width);
      cf.link.height = l.value("height", cf.link.height);
      if (l.contains("depth")) cf.link.depth = depth_field(l.at("depth"));
      cf.link.bits_per_second = l.value("bits_per_second", cf.link.bits_per_second);
    }
    return cf;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("campaign file: ") + e.what());
  } catch (const CampaignError& e) {
    throw ConfigError(e.what());
  } catch (const VpuError& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

CampaignFile load_campaign(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open campaign file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_campaign(ss.str());
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string fixed(double v, int digits = 3) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string sci(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::scientific << std::setprecision(9) << v;
  return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

json lambda_json(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace

void emit_fpga_report(const std::filesystem::path& dir, const std::vector<FpgaRunReport>& reports) {
  ensure_dir(dir);
  const auto rows = summarize(reports);

  std::string table = "architecture,runs,down_pct,erroneous_pct,correct_pct,correct_min,correct_max,lambda_per_s\n";
  for (const auto& s : rows) {
    table += s.arch.name() + "," + std::to_string(s.runs) + "," + fixed(s.down) + "," + fixed(s.erroneous) +
             "," + fixed(s.correct) + "," + fixed(s.correct_min) + "," + fixed(s.correct_max) + "," +
             (s.lambda_defined ? sci(s.pooled.lambda) : "nan") + "\n";
  }
  write_file(dir / "table.csv", table);

  std::string curve = "architecture,t_s,reliability\n";
  for (const auto& s : rows) {
    if (!s.lambda_defined) continue;
    for (const auto& [t, r] : s.pooled.curve) curve += s.arch.name() + "," + fixed(t, 2) + "," + sci(r) + "\n";
  }
  write_file(dir / "reliability.csv", curve);

  json summary;
  summary["node"] = "fpga";
  summary["columns"] = {"down_pct", "erroneous_pct", "correct_pct"};
  for (const auto& s : rows) {
    json a;
    a["architecture"] = s.arch.name();
    a["runs"] = s.runs;
    a["down_pct"] = s.down;
    a["erroneous_pct"] = s.erroneous;
    a["correct_pct"] = s.correct;
    a["correct_min"] = s.correct_min;
    a["correct_max"] = s.correct_max;
    a["lambda_per_s"] = s.lambda_defined ? json(s.pooled.lambda) : json(nullptr);
    json per_seed = json::array();
    for (double l : s.seed_lambda) per_seed.push_back(lambda_json(l));
    a["seed_lambda_per_s"] = per_seed;
    summary["rows"].push_back(a);
  }
  std::string log;
  for (const auto& r : reports) {
    json run;
    run["architecture"] = r.arch.name();
    run["seed"] = r.seed;
    run["injections"] = r.injections;
    run["essential_hits"] = r.essential_hits;
    run["down_pct"] = r.timeline.percent(WindowClass::kDown);
    run["erroneous_pct"] = r.timeline.percent(WindowClass::kErroneous);
    run["correct_pct"] = r.timeline.percent(WindowClass::kCorrect);
    run["intervals"] = r.timeline.intervals.size();
    run["resets"] = r.stats.resets;
    run["scrub_repairs"] = r.scrub_repairs;
    run["dpr_reloads"] = r.dpr_reloads;
    std::ostringstream dig;
    dig << std::hex << std::setw(16) << std::setfill('0') << r.log.digest();
    run["mutation_digest"] = dig.str();
    summary["runs"].push_back(run);
    log += "# " + r.arch.name() + " seed=" + std::to_string(r.seed) + "\n" + r.log.text();
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "mutations.log", log);
}

void emit_vpu_report(const std::filesystem::path& dir, const std::vector<VpuRunReport>& reports) {
  ensure_dir(dir);
  const auto rows = summarize_vpu(reports);
  std::string table = "mode,kernel,impaired,runs,stalled,error_min_pct,error_max_pct\n";
  json summary;
  summary["node"] = "vpu";
  for (const auto& r : rows) {
    table += r.mode + "," + std::string(kernel_name(r.kernel)) + "," + std::to_string(r.impaired) + "," +
             std::to_string(r.runs) + "," + std::to_string(r.stalled) + "," + fixed(100 * r.min) + "," +
             fixed(100 * r.max) + "\n";
    summary["rows"].push_back({{"mode", r.mode},
                               {"kernel", kernel_name(r.kernel)},
                               {"impaired", r.impaired},
                               {"runs", r.runs},
                               {"stalled", r.stalled},
                               {"error_min_pct", 100 * r.min},
                               {"error_max_pct", 100 * r.max}});
  }
  write_file(dir / "table.csv", table);

  std::string timing = "mode,kernel,impaired,seed,dma_us,compute_us,crc_check_us,reschedule_us,reexecute_us,"
                       "restore_us,voting_us,total_us,baseline_us\n";
  std::string log;
  for (const auto& r : reports) {
    const auto& t = r.timing;
    timing += r.mode.name() + "," + std::string(kernel_name(r.kernel)) + "," + std::to_string(r.impaired) + "," +
              std::to_string(r.seed) + "," + std::to_string(t.dma) + "," + std::to_string(t.compute) + "," +
              std::to_string(t.crc_check) + "," + std::to_string(t.reschedule) + "," +
              std::to_string(t.reexecute) + "," + std::to_string(t.restore) + "," + std::to_string(t.voting) +
              "," + std::to_string(t.total()) + "," + std::to_string(r.baseline_latency) + "\n";
    json run{{"mode", r.mode.name()},   {"kernel", kernel_name(r.kernel)},
             {"impaired", r.impaired},  {"workers", r.workers},
             {"seed", r.seed},          {"error_rate", r.error_rate},
             {"class", window_class_name(r.cls)}, {"vote_flagged", r.vote_flagged},
             {"latency_us", t.total()}, {"baseline_us", r.baseline_latency}};
    summary["runs"].push_back(run);
    log += "# " + r.mode.name() + " " + std::string(kernel_name(r.kernel)) + " impaired=" +
           std::to_string(r.impaired) + " seed=" + std::to_string(r.seed) + "\n" + r.log.text();
  }
  write_file(dir / "timing.csv", timing);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "mutations.log", log);
}

void emit_link_report(const std::filesystem::path& dir, const std::vector<LinkRunReport>& reports) {
  ensure_dir(dir);
  json summary;
  summary["node"] = "link";
  std::string log;
  for (const auto& r : reports) {
    auto status = [](const LinkStatus& s) {
      return json{{"sent", s.sent},
                  {"delivered", s.delivered},
                  {"crc_failures", s.crc_failures},
                  {"padding_violations", s.padding_violations}};
    };
    summary["runs"].push_back({{"seed", r.seed},
                               {"injections", r.injections},
                               {"noops", r.noops},
                               {"undetected", r.undetected},
                               {"cif", status(r.cif)},
                               {"lcd", status(r.lcd)}});
    log += "# seed=" + std::to_string(r.seed) + "\n" + r.log.text();
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "mutations.log", log);
}

std::string render_summary(const std::filesystem::path& summary_json, std::string_view format) {
  std::ifstream in(summary_json);
  if (!in) throw ConfigError("cannot open " + summary_json.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("summary is not valid JSON: ") + e.what());
  }
  if (format == "json") return j.dump(2) + "\n";
  if (format != "csv") throw ConfigError("format must be csv or json");
  const json rows = j.contains("rows") ? j.at("rows") : j.value("runs", json::array());
  if (rows.empty()) return "";
  std::string out;
  std::vector<std::string> keys;
  for (const auto& [k, _] : rows.front().items()) keys.push_back(k);
  for (std::size_t i = 0; i < keys.size(); ++i) out += (i ? "," : "") + keys[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const json& v = row.at(keys[i]);
      std::string cell;
      if (v.is_string()) cell = v.get<std::string>();
      else if (v.is_number_float()) cell = fixed(v.get<double>());
      else if (v.is_null()) cell = "nan";
      else cell = v.dump();
      out += (i ? "," : "") + cell;
    }
    out += "\n";
  }
  return out;
}

}  // namespace seusim
