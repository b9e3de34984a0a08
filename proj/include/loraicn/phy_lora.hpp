#pragma once

// LoRa PHY model: frame airtime, a single collision domain per channel,
// sliding-window duty-cycle accounting and ideal channel activity detection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "loraicn/sim_core.hpp"

namespace loraicn {

struct PhyConfig {
  int sf = 7;
  double bw = 125000.0;
  int cr = 1;  // coding rate 4/(4+cr)
  int preamble_symbols = 8;
  bool explicit_header = true;
  bool crc = true;
  bool ldro = false;

  Seconds symbol_time() const { return std::ldexp(1.0, sf) / bw; }

  /// LDRO is mandatory once a symbol lasts 16 ms or longer.
  bool effective_ldro() const { return ldro || symbol_time() >= 0.016 - 1e-12; }

  void validate() const {
    if (sf < 7 || sf > 12) throw ConfigError("phy.sf must lie in [7,12]");
    if (bw != 125000.0 && bw != 250000.0 && bw != 500000.0)
      throw ConfigError("phy.bw must be one of 125000, 250000, 500000");
    if (cr < 1 || cr > 4) throw ConfigError("phy.cr must lie in [1,4]");
    if (preamble_symbols < 6 || preamble_symbols > 65535)
      throw ConfigError("phy.preamble_symbols out of range");
  }
};

inline constexpr int kMaxPhyPayload = 255;

/// Airtime of a LoRa frame carrying `payload_bytes` of PHY payload.
inline Seconds time_on_air(int payload_bytes, const PhyConfig& cfg) {
  cfg.validate();
  if (payload_bytes < 0 || payload_bytes > kMaxPhyPayload)
    throw ConfigError("payload of " + std::to_string(payload_bytes) +
                      " bytes outside [0,255]");
  const double tsym = cfg.symbol_time();
  const int de = cfg.effective_ldro() ? 1 : 0;
  const int ih = cfg.explicit_header ? 0 : 1;
  const double num = 8.0 * payload_bytes - 4.0 * cfg.sf + 28.0 + 16.0 * (cfg.crc ? 1 : 0) - 20.0 * ih;
  const double den = 4.0 * (cfg.sf - 2 * de);
  const double n_payload = 8.0 + std::max(std::ceil(num / den) * (cfg.cr + 4), 0.0);
  return (cfg.preamble_symbols + 4.25) * tsym + n_payload * tsym;
}

/// An on-air frame. `Payload` is opaque to the PHY.
template <typename Payload>
struct Transmission {
  std::uint64_t id = 0;
  NodeId sender = 0;
  int channel = 0;
  Seconds start = 0.0;
  Seconds duration = 0.0;
  Payload frame{};
  bool doomed = false;

  Seconds end() const { return start + duration; }
};

/// Star collision domain: all radios hear each other; overlapping frames on the
/// same channel destroy each other, frames on different channels never interact.
template <typename Payload>
class Medium {
 public:
  using Tx = Transmission<Payload>;
  /// Called at the end of every transmission; `delivered` is false when doomed.
  using EndHandler = std::function<void(const Tx&, bool delivered)>;

  Medium(Simulator& sim, int channels) : sim_(sim), active_(static_cast<std::size_t>(channels)) {}

  int channels() const { return static_cast<int>(active_.size()); }

  bool is_transmitting(NodeId node, int channel) const {
    for (const auto& tx : active_[static_cast<std::size_t>(channel)])
      if (tx.sender == node) return true;
    return false;
  }

  /// Starts a transmission now. Throws if the sender is already on air on that
  /// channel; how many channels a radio can use at once is the caller's concern.
  std::uint64_t transmit(NodeId sender, int channel, Seconds duration, Payload frame,
                         EndHandler on_end) {
    if (channel < 0 || channel >= channels()) throw SimulationError("invalid channel");
    if (!(duration > 0.0)) throw SimulationError("transmission duration must be positive");
    if (is_transmitting(sender, channel)) throw SimulationError("sender already transmitting");
    Tx tx;
    tx.id = ++next_id_;
    tx.sender = sender;
    tx.channel = channel;
    tx.start = sim_.now();
    tx.duration = duration;
    tx.frame = std::move(frame);
    auto& list = active_[static_cast<std::size_t>(channel)];
    for (auto& other : list) {
      if (other.end() > tx.start) {
        if (!other.doomed) ++collided_;
        other.doomed = true;
        if (!tx.doomed) ++collided_;
        tx.doomed = true;
      }
    }
    ++started_;
    const auto id = tx.id;
    list.push_back(std::move(tx));
    sim_.schedule(sim_.now() + duration, "phy_tx_end", sender,
                  [this, channel, id, h = std::move(on_end)] { finish(channel, id, h); });
    return id;
  }

  /// Ideal CAD: busy iff a transmission occupies the channel at `now`.
  bool cad_busy(int channel, Seconds now) const {
    for (const auto& tx : active_[static_cast<std::size_t>(channel)])
      if (tx.start <= now && now < tx.end()) return true;
    return false;
  }

  /// CAD over the window [from, to): busy iff an ongoing transmission started
  /// before `to` and ends after `from`. Evaluated at `to`.
  bool cad_busy(int channel, Seconds from, Seconds to) const {
    for (const auto& tx : active_[static_cast<std::size_t>(channel)])
      if (tx.start < to && tx.end() > from) return true;
    return false;
  }

  std::uint64_t started() const { return started_; }
  std::uint64_t collided() const { return collided_; }

 private:
  void finish(int channel, std::uint64_t id, const EndHandler& on_end) {
    auto& list = active_[static_cast<std::size_t>(channel)];
    auto it = std::find_if(list.begin(), list.end(), [id](const Tx& t) { return t.id == id; });
    if (it == list.end()) throw SimulationError("unknown transmission finished");
    Tx tx = std::move(*it);
    list.erase(it);
    if (on_end) on_end(tx, !tx.doomed);
  }

  Simulator& sim_;
  std::vector<std::vector<Tx>> active_;
  std::uint64_t next_id_ = 0;
  std::uint64_t started_ = 0;
  std::uint64_t collided_ = 0;
};

struct DutyDecision {
  bool allowed = false;
  Seconds next_allowed_at = 0.0;
};

/// Per-(node, band) airtime log over a sliding window. A band is either the
/// common channel or one CFP channel; each band carries its own limit.
class DutyCycleLedger {
 public:
  explicit DutyCycleLedger(Seconds window = 3600.0) : window_(window) {
    if (!(window > 0.0)) throw ConfigError("duty-cycle window must be positive");
  }

  Seconds window() const { return window_; }

  /// Admits and records `duration` starting at `now` iff the window ending at
  /// now+duration stays within limit*window. A radio sends one frame at a time
  /// per band, so requests must not overlap earlier admitted frames; the
  /// busiest window then always ends at some frame end and checking at
  /// admission is sufficient.
  DutyDecision permit(NodeId node, int band, double limit, Seconds duration, Seconds now) {
    if (!(duration > 0.0)) throw SimulationError("duty-cycle request needs positive duration");
    auto& log = logs_[{node, band}];
    if (!log.empty() && now < log.back().first + log.back().second - 1e-9)
      throw SimulationError("duty-cycle request overlaps an admitted frame");
    prune(log, now);
    const double cap = limit * window_;
    if (load(log, now, duration) <= cap + 1e-9) {
      log.emplace_back(now, duration);
      return {true, now};
    }
    return {false, next_allowed(log, now, duration, cap)};
  }

  /// Airtime recorded for (node, band) inside [t_end - window, t_end].
  Seconds airtime_in_window(NodeId node, int band, Seconds t_end) const {
    auto it = logs_.find({node, band});
    if (it == logs_.end()) return 0.0;
    Seconds sum = 0.0;
    for (const auto& [s, d] : it->second) sum += overlap(s, s + d, t_end - window_, t_end);
    return sum;
  }

  /// All recorded entries for (node, band), oldest first (pruned lazily).
  std::vector<std::pair<Seconds, Seconds>> entries(NodeId node, int band) const {
    auto it = logs_.find({node, band});
    if (it == logs_.end()) return {};
    return {it->second.begin(), it->second.end()};
  }

 private:
  using Log = std::deque<std::pair<Seconds, Seconds>>;

  static Seconds overlap(Seconds a0, Seconds a1, Seconds b0, Seconds b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
  }

  void prune(Log& log, Seconds now) const {
    while (!log.empty() && log.front().first + log.front().second <= now - window_)
      log.pop_front();
  }

  Seconds load(const Log& log, Seconds t, Seconds duration) const {
    const Seconds w1 = t + duration;
    const Seconds w0 = w1 - window_;
    Seconds sum = duration;
    for (const auto& [s, d] : log) sum += overlap(s, s + d, w0, w1);
    return sum;
  }

  Seconds next_allowed(const Log& log, Seconds now, Seconds duration, double cap) const {
    if (duration > cap) return std::numeric_limits<Seconds>::infinity();
    // load(t) is piecewise linear with breakpoints where the window start meets
    // an entry boundary.
    std::vector<Seconds> bps{now};
    for (const auto& [s, d] : log) {
      for (Seconds b : {s + window_ - duration, s + d + window_ - duration})
        if (b > now) bps.push_back(b);
    }
    std::sort(bps.begin(), bps.end());
    Seconds prev_t = now;
    Seconds prev_v = load(log, now, duration);
    for (std::size_t i = 1; i < bps.size(); ++i) {
      const Seconds t = bps[i];
      const Seconds v = load(log, t, duration);
      if (v <= cap + 1e-9) {
        Seconds guess = t;
        if (prev_v > v) guess = prev_t + (prev_v - cap) / (prev_v - v) * (t - prev_t);
        guess = std::clamp(guess, prev_t, t);
        while (load(log, guess, duration) > cap + 1e-9 && guess < t) guess = std::min(t, guess + 1e-6);
        return guess;
      }
      prev_t = t;
      prev_v = v;
    }
    return bps.back();
  }

  Seconds window_;
  std::map<std::pair<NodeId, int>, Log> logs_;
};

}  // namespace loraicn
