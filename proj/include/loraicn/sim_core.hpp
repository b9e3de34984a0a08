#pragma once

// Deterministic discrete-event engine and seeded, named random streams.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace loraicn {

/// Simulated time in seconds.
using Seconds = double;

/// Node identifier. The gateway is always node 0.
using NodeId = std::uint32_t;
inline constexpr NodeId kGlobalTarget = std::numeric_limits<NodeId>::max();

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SimulationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// 64-bit FNV-1a; stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Independent random stream derived from (global seed, name).
class RngStream {
 public:
  RngStream(std::uint64_t global_seed, std::string name) : name_(std::move(name)) {
    const std::uint64_t h = fnv1a(name_, fnv1a(std::to_string(global_seed)));
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(global_seed),
                      static_cast<std::uint32_t>(global_seed >> 32)};
    engine_.seed(seq);
  }

  const std::string& name() const { return name_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  std::uint32_t u32() { return static_cast<std::uint32_t>(engine_() & 0xffffffffULL); }

  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<std::int64_t>(mean)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::string name_;
  std::mt19937_64 engine_;
};

/// Exponential sample with the given mean; throws ConfigError on non-positive mean.
inline Seconds draw_exponential(RngStream& stream, Seconds mean) {
  if (!(mean > 0.0)) throw ConfigError("exponential mean must be positive");
  Seconds x = 0.0;
  // exponential_distribution may return exactly 0 with probability ~2^-53
  while (x <= 0.0) x = std::exponential_distribution<double>(1.0 / mean)(stream.engine());
  return x;
}

struct SimEvent {
  Seconds time = 0.0;
  std::uint64_t seq = 0;
  std::string kind;
  NodeId target = kGlobalTarget;
};

struct EventHandle {
  std::uint64_t seq = 0;
  bool valid() const { return seq != 0; }
};

class Simulator {
 public:
  using Action = std::function<void()>;

  Seconds now() const { return now_; }
  std::uint64_t dispatched() const { return dispatched_; }
  /// Queued entries, including cancelled ones not yet popped.
  std::size_t queued() const { return queue_.size(); }

  /// Optional JSONL trace of dispatched events.
  void set_trace(std::ostream* out) { trace_ = out; }

  EventHandle schedule(Seconds time, std::string kind, NodeId target, Action action) {
    if (!(time >= now_) || !std::isfinite(time))
      throw SimulationError("event '" + kind + "' scheduled in the past");
    Entry e;
    e.ev = SimEvent{time, ++next_seq_, std::move(kind), target};
    e.action = std::move(action);
    const auto seq = e.ev.seq;
    queue_.push(std::move(e));
    return EventHandle{seq};
  }

  EventHandle schedule_in(Seconds delay, std::string kind, NodeId target, Action action) {
    return schedule(now_ + delay, std::move(kind), target, std::move(action));
  }

  void cancel(EventHandle h) {
    if (h.valid() && h.seq <= next_seq_) cancelled_.insert(h.seq);
  }

  /// Dispatches every event with time <= t_end; leaves the clock at t_end.
  std::uint64_t run_until(Seconds t_end) {
    if (t_end < now_) throw SimulationError("run_until target lies in the past");
    std::uint64_t count = 0;
    while (!queue_.empty() && queue_.top().ev.time <= t_end) {
      Entry e = std::move(const_cast<Entry&>(queue_.top()));
      queue_.pop();
      if (auto it = cancelled_.find(e.ev.seq); it != cancelled_.end()) {
        cancelled_.erase(it);
        continue;
      }
      now_ = e.ev.time;
      if (trace_) write_trace(e.ev);
      ++count;
      ++dispatched_;
      e.action();
    }
    now_ = t_end;
    return count;
  }

 private:
  struct Entry {
    SimEvent ev;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.ev.time != b.ev.time) return a.ev.time > b.ev.time;
      return a.ev.seq > b.ev.seq;
    }
  };

  void write_trace(const SimEvent& ev) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", ev.time);
    *trace_ << "{\"time\":" << buf << ",\"seq\":" << ev.seq << ",\"kind\":\"" << ev.kind
            << "\",\"target\":";
    if (ev.target == kGlobalTarget)
      *trace_ << "null";
    else
      *trace_ << ev.target;
    *trace_ << "}\n";
  }

  Seconds now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dispatched_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::unordered_set<std::uint64_t> cancelled_;
  std::ostream* trace_ = nullptr;
};

}  // namespace loraicn
