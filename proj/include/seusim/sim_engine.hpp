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

#ifndef SEUSIM_SIM_ENGINE_HPP_
#define SEUSIM_SIM_ENGINE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace seusim {

// Simulated time in microseconds since simulation start.
using SimTime = std::uint64_t;

inline constexpr SimTime kMicrosecond = 1;
inline constexpr SimTime kMillisecond = 1000;
inline constexpr SimTime kSecond = 1000 * kMillisecond;

using EventId = std::uint64_t;

// Thrown for contract violations against the engine (e.g. scheduling in the
// past).
class SimError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised by any model when a simulation-wide invariant is found broken.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SplitMix64 finalizer. Used for every hash/stream derivation in the
// simulator so that results do not depend on the standard library.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a over the label bytes.
std::uint64_t hash_label(std::string_view label);

// Counter-based random stream. Draw i of a stream is mix64(key + i * gamma),
// so a stream is fully described by (key, counter) and is identical on every
// platform. Distributions are implemented here rather than through <random>
// because libstdc++/libc++ distributions are not bit-compatible.
class SeededRng {
 public:
  using result_type = std::uint64_t;

  explicit SeededRng(std::uint64_t key = 0) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);
  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Uniform double in [0, 1) with 53 random bits.
  double uniform_real();
  bool bernoulli(double p);
  // Exponential waiting time with the given rate (per unit).
  double exponential(double rate);

  // Child stream keyed by (this stream's key, label). Does not advance this
  // stream.
  SeededRng fork(std::string_view label) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct EventRecord {
  SimTime time;
  std::string target;
  std::string kind;
};

// Single-threaded discrete-event loop. Events with equal fire time run in
// insertion order.
class Simulator {
 public:
  using Handler = std::function<void()>;

  explicit Simulator(std::uint64_t seed = 0) : seed_(seed) {}

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  // Throws SimError if fire_at < now().
  EventId schedule(SimTime fire_at, std::string target, std::string kind,
                   Handler handler);
  EventId schedule_after(SimTime delay, std::string target, std::string kind,
                         Handler handler) {
    return schedule(now_ + delay, std::move(target), std::move(kind),
                    std::move(handler));
  }

  // Returns false if the event already ran, was cancelled, or never existed.
  bool cancel(EventId id);
  bool is_pending(EventId id) const;

  // Processes every event with fire time <= t_end, then sets the clock to
  // t_end. Returns the number of processed events.
  std::size_t run_until(SimTime t_end);

  SimTime now() const { return now_; }
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t processed() const { return processed_; }
  std::uint64_t scheduled() const { return next_seq_; }
  std::uint64_t cancelled() const { return cancelled_; }
  std::uint64_t seed() const { return seed_; }

  SeededRng fork_rng(std::string_view label) const;

  void set_event_log(bool enabled) { log_enabled_ = enabled; }
  const std::vector<EventRecord>& event_log() const { return log_; }
  // "time_us, target, kind" per line.
  std::string event_log_text() const;

 private:
  struct Entry {
    std::string target;
    std::string kind;
    Handler handler;
  };
  using Key = std::pair<SimTime, std::uint64_t>;

  std::uint64_t seed_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::uint64_t cancelled_ = 0;
  std::map<Key, Entry> queue_;
  std::map<EventId, SimTime> index_;
  bool log_enabled_ = false;
  std::vector<EventRecord> log_;
};

}  // namespace seusim

#endif  // SEUSIM_SIM_ENGINE_HPP_
