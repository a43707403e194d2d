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

#include "seusim/sim_engine.hpp"

#include <cmath>
#include <sstream>

namespace seusim {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}  // namespace

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t SeededRng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

std::uint64_t SeededRng::uniform(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("SeededRng::uniform: bound 0");
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = max() - (max() % bound + 1) % bound;
  std::uint64_t x = next_u64();
  while (x > limit) x = next_u64();
  return x % bound;
}

std::int64_t SeededRng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("SeededRng::uniform_int: hi < lo");
  const auto span = static_cast<std::uint64_t>(hi - lo);
  if (span == max()) return static_cast<std::int64_t>(next_u64());
  return lo + static_cast<std::int64_t>(uniform(span + 1));
}

double SeededRng::uniform_real() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

bool SeededRng::bernoulli(double p) { return uniform_real() < p; }

double SeededRng::exponential(double rate) {
  // 1 - u lies in (0, 1], so the log is finite.
  return -std::log(1.0 - uniform_real()) / rate;
}

SeededRng SeededRng::fork(std::string_view label) const {
  return SeededRng(mix64(key_ ^ mix64(hash_label(label))));
}

EventId Simulator::schedule(SimTime fire_at, std::string target,
                            std::string kind, Handler handler) {
  if (fire_at < now_) {
    throw SimError("schedule: fire time " + std::to_string(fire_at) +
                   " is before the clock " + std::to_string(now_));
  }
  const EventId id = next_seq_++;
  queue_.emplace(Key{fire_at, id},
                 Entry{std::move(target), std::move(kind), std::move(handler)});
  index_.emplace(id, fire_at);
  return id;
}

bool Simulator::cancel(EventId id) {
  auto it = index_.find(id);
  if (it == index_.end()) return false;
  queue_.erase(Key{it->second, id});
  index_.erase(it);
  ++cancelled_;
  return true;
}

bool Simulator::is_pending(EventId id) const { return index_.contains(id); }

std::size_t Simulator::run_until(SimTime t_end) {
  if (t_end < now_) {
    throw SimError("run_until: end time " + std::to_string(t_end) +
                   " is before the clock " + std::to_string(now_));
  }
  std::size_t count = 0;
  while (!queue_.empty()) {
    auto it = queue_.begin();
    if (it->first.first > t_end) break;
    now_ = it->first.first;
    Entry entry = std::move(it->second);
    index_.erase(it->first.second);
    queue_.erase(it);
    if (log_enabled_) log_.push_back({now_, entry.target, entry.kind});
    ++processed_;
    ++count;
    if (entry.handler) entry.handler();
  }
  now_ = t_end;
  return count;
}

SeededRng Simulator::fork_rng(std::string_view label) const {
  return SeededRng(mix64(seed_)).fork(label);
}

std::string Simulator::event_log_text() const {
  std::ostringstream out;
  for (const auto& r : log_) {
    out << r.time << ", " << r.target << ", " << r.kind << '\n';
  }
  return out.str();
}

}  // namespace seusim
