#pragma once

// IEEE 802.15.4 DSME MAC over LoRa: beacon-anchored multi-superframes, a CAP on
// a common channel accessed with slotted CSMA-CA + CAD, and a CFP of 7 GTS per
// superframe usable on 16 channels, assigned statically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

#include "loraicn/icn.hpp"
#include "loraicn/phy_lora.hpp"
#include "loraicn/sim_core.hpp"

namespace loraicn::mac {

inline constexpr NodeId kGateway = 0;
inline constexpr NodeId kBroadcast = kGlobalTarget - 1;

inline constexpr int kMacFrameMax = 127;
inline constexpr int kMacHeader = 11;       // FC, seq, PAN, short src/dst, FCS
inline constexpr int kBeaconOverhead = 27;  // beacon header + DSME descriptors
inline constexpr int kAckBytes = 5;

class ScheduleInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Carrier { Beacon, Cap, Cfp };

inline const char* to_string(Carrier c) {
  switch (c) {
    case Carrier::Beacon: return "BEACON";
    case Carrier::Cap: return "CAP";
    default: return "CFP";
  }
}

struct SuperframeConfig {
  int superframes_per_msf = 4;
  int slots_per_superframe = 16;
  int cap_slots = 8;
  int cfp_slots = 7;
  Seconds slot_duration = 32.46 / (4.0 * 16.0);
  int beacon_interval_msf = 4;
  int channels = 16;  // CFP channels 0..channels-1
  int common_channel = 16;

  Seconds superframe_duration() const { return slots_per_superframe * slot_duration; }
  Seconds msf_duration() const { return superframes_per_msf * superframe_duration(); }
  Seconds beacon_interval() const { return beacon_interval_msf * msf_duration(); }
  int medium_channels() const { return std::max(channels, common_channel + 1); }

  void validate() const {
    if (superframes_per_msf < 1) throw ConfigError("superframes_per_msf must be >= 1");
    if (slots_per_superframe != 1 + cap_slots + cfp_slots)
      throw ConfigError("slots_per_superframe must equal 1 + cap_slots + cfp_slots");
    if (cfp_slots < 1 || cap_slots < 1) throw ConfigError("cap_slots and cfp_slots must be >= 1");
    if (!(slot_duration > 0.0)) throw ConfigError("slot_duration must be positive");
    if (beacon_interval_msf < 1) throw ConfigError("beacon_interval_msf must be >= 1");
    if (channels < 1) throw ConfigError("channels must be >= 1");
    if (common_channel < channels)
      throw ConfigError("common_channel must not coincide with a CFP channel");
  }

  /// Global superframe index containing t.
  std::int64_t superframe_at(Seconds t) const {
    return static_cast<std::int64_t>(std::floor(t / superframe_duration() + 1e-12));
  }
  Seconds superframe_start(std::int64_t k) const { return static_cast<double>(k) * superframe_duration(); }
  Seconds cap_start(std::int64_t k) const { return superframe_start(k) + slot_duration; }
  Seconds cap_end(std::int64_t k) const { return superframe_start(k) + (1 + cap_slots) * slot_duration; }

  bool in_cap(Seconds t) const {
    const auto k = superframe_at(t);
    return t >= cap_start(k) && t < cap_end(k);
  }

  /// Start of the CAP that contains t, or of the next one.
  Seconds next_cap_start(Seconds t) const {
    const auto k = superframe_at(t);
    if (t < cap_start(k)) return cap_start(k);
    if (t < cap_end(k)) return t;
    return cap_start(k + 1);
  }

  /// Offset of a CFP slot from the start of its multi-superframe.
  Seconds cfp_offset(int superframe_index, int slot_index) const {
    return superframe_index * superframe_duration() + (1 + cap_slots + slot_index) * slot_duration;
  }

  /// First occurrence of the given msf offset at or after t.
  Seconds next_occurrence(Seconds offset, Seconds t) const {
    const double msf = msf_duration();
    double k = std::ceil((t - offset) / msf - 1e-9);
    if (k < 0) k = 0;
    Seconds at = k * msf + offset;
    if (at < t) at += msf;
    return at;
  }

  Seconds next_beacon(Seconds t) const {
    const double bi = beacon_interval();
    double k = std::ceil(t / bi - 1e-12);
    return k * bi;
  }
};

struct CsmaConfig {
  int max_backoffs = 4;
  int be0 = 3;
  int max_be = 5;
  Seconds unit = 0.010;  // one CAD duration
  Seconds ack_turnaround = 0.010;
  int max_retries = 3;

  void validate() const {
    if (max_backoffs < 1) throw ConfigError("csma.max_backoffs must be >= 1");
    if (be0 < 0 || max_be < be0) throw ConfigError("csma requires 0 <= be0 <= max_be");
    if (!(unit > 0.0)) throw ConfigError("csma.unit must be positive");
    if (max_retries < 0) throw ConfigError("csma.max_retries must be >= 0");
  }
};

enum class GtsDirection { TxToGateway, RxFromGateway };

struct GtsCell {
  int superframe_index = 0;
  int slot_index = 0;
  int channel = 0;
  NodeId owner = 0;
  GtsDirection direction = GtsDirection::TxToGateway;
};

enum class SlotPattern { Unidirectional, PairedTxRx };

/// Round-robin static GTS assignment. Consecutive nodes rotate through the
/// superframes first, then CFP positions, then channels, so that nodes sharing
/// a superframe still transmit at distinct instants and the gateway's per-
/// channel airtime is spread over all channels.
///
/// Paired: each assigned slot is a tx cell immediately followed by an rx cell
/// in the same CFP and channel, so a CFP holds floor(cfp_slots/2) pairs per
/// channel. A node never gets two cells in the same time slot, and its k-th
/// slot search starts k/slots_per_node of an msf after its first cell.
inline std::vector<GtsCell> build_static_schedule(int n_nodes, int slots_per_node, SlotPattern pattern,
                                                  const SuperframeConfig& cfg,
                                                  GtsDirection uni_direction = GtsDirection::TxToGateway) {
  cfg.validate();
  if (n_nodes < 0) throw ConfigError("n_nodes must be >= 0");
  if (slots_per_node < 0 || slots_per_node > 2) throw ConfigError("slots_per_node must be 0, 1 or 2");
  std::vector<GtsCell> cells;
  if (n_nodes == 0 || slots_per_node == 0) return cells;

  const bool paired = pattern == SlotPattern::PairedTxRx;
  const int S = cfg.superframes_per_msf;
  const int P = paired ? cfg.cfp_slots / 2 : cfg.cfp_slots;
  const long capacity = static_cast<long>(S) * P * cfg.channels;
  const long needed = static_cast<long>(n_nodes) * slots_per_node;
  if (P == 0 || needed > capacity) {
    throw ScheduleInfeasible(
        std::to_string(needed) + (paired ? " paired tx/rx transactions" : " GTS cells") + " needed, " +
        std::to_string(capacity) + " available per multi-superframe (" + std::to_string(S) +
        " superframes x " + std::to_string(P) + (paired ? " pair positions" : " slots") + " x " +
        std::to_string(cfg.channels) + " channels)");
  }

  struct Pos {
    int sf, pos, ch;
  };
  // q -> position: superframe varies fastest, then CFP position; the channel
  // shifts with the time index so consecutive nodes also differ in channel
  auto at = [&](long q, int first) {
    const int tau = static_cast<int>(q % (S * P));
    const int layer = static_cast<int>(q / (S * P));
    const int sf = (first + tau % S) % S;
    const int pos = tau / S;
    return Pos{sf, pos, (sf + S * pos + layer) % cfg.channels};
  };
  auto index = [&](const Pos& p) { return (static_cast<long>(p.ch) * P + p.pos) * S + p.sf; };

  std::vector<bool> used(static_cast<std::size_t>(capacity), false);
  std::vector<std::vector<Pos>> own(static_cast<std::size_t>(n_nodes));
  for (int round = 0; round < slots_per_node; ++round) {
    for (int n = 0; n < n_nodes; ++n) {
      const NodeId owner = static_cast<NodeId>(n + 1);
      auto& mine = own[static_cast<std::size_t>(n)];
      const int first = round == 0 ? 0 : (mine.front().sf + round * S / slots_per_node) % S;
      bool placed = false;
      for (long q = 0; q < capacity; ++q) {
        const Pos p = at(q, first);
        if (used[static_cast<std::size_t>(index(p))]) continue;
        const bool clash = std::any_of(mine.begin(), mine.end(),
                                       [&](const Pos& o) { return o.sf == p.sf && o.pos == p.pos; });
        if (clash) continue;
        used[static_cast<std::size_t>(index(p))] = true;
        mine.push_back(p);
        if (paired) {
          cells.push_back({p.sf, 2 * p.pos, p.ch, owner, GtsDirection::TxToGateway});
          cells.push_back({p.sf, 2 * p.pos + 1, p.ch, owner, GtsDirection::RxFromGateway});
        } else {
          cells.push_back({p.sf, p.pos, p.ch, owner, uni_direction});
        }
        placed = true;
        break;
      }
      if (!placed)
        throw ScheduleInfeasible("node " + std::to_string(owner) +
                                 " cannot get a conflict-free GTS: every free cell overlaps its own slots");
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Frames and queues

struct MacFrame {
  std::uint64_t id = 0;
  NodeId src = 0;
  NodeId dst = kBroadcast;
  Carrier carrier = Carrier::Cap;
  bool ack_requested = false;
  bool is_ack = false;
  std::uint64_t ack_for = 0;
  icn::Bundle bundle;
  std::vector<NodeId> pending;  // beacon pending-address list

  int payload_bytes() const {
    return icn::bundle_size(bundle) + 2 * static_cast<int>(pending.size());
  }

  int phy_bytes() const {
    if (is_ack) return kAckBytes;
    return payload_bytes() + (carrier == Carrier::Beacon ? kBeaconOverhead : kMacHeader);
  }
};

/// Usable ICN bytes in a data frame.
inline constexpr int kMaxMacPayload = kMacFrameMax - kMacHeader;

class MacQueue {
 public:
  explicit MacQueue(std::size_t capacity = 8) : capacity_(capacity) {}

  /// FIFO append; returns false (and drops the frame) when full.
  bool enqueue(MacFrame f) {
    if (frames_.size() >= capacity_) return false;
    frames_.push_back(std::move(f));
    return true;
  }

  /// Inserts ahead of everything except the first `keep` frames.
  bool enqueue_priority(MacFrame f, std::size_t keep = 0) {
    if (frames_.size() >= capacity_) return false;
    const auto at = std::min(keep, frames_.size());
    frames_.insert(frames_.begin() + static_cast<std::ptrdiff_t>(at), std::move(f));
    return true;
  }

  bool empty() const { return frames_.empty(); }
  std::size_t size() const { return frames_.size(); }
  std::size_t capacity() const { return capacity_; }
  MacFrame& front() { return frames_.front(); }
  const MacFrame& front() const { return frames_.front(); }
  MacFrame pop() {
    MacFrame f = std::move(frames_.front());
    frames_.pop_front();
    return f;
  }

 private:
  std::size_t capacity_;
  std::deque<MacFrame> frames_;
};

// ---------------------------------------------------------------------------
// Per-radio MAC entity

using Medium = loraicn::Medium<MacFrame>;
using Tx = Transmission<MacFrame>;

struct MacEnv {
  Simulator& sim;
  Medium& medium;
  DutyCycleLedger& ledger;
  PhyConfig phy;
  SuperframeConfig sf;
  CsmaConfig csma;
  double cap_duty_limit = 0.10;
  double cfp_duty_limit = 0.01;
};

enum class DropReason { QueueFull, CsmaExhausted, AckRetriesExhausted };

struct MacCounters {
  std::uint64_t tx_cap = 0;
  std::uint64_t tx_cfp = 0;
  std::uint64_t tx_beacon = 0;
  std::uint64_t tx_ack = 0;
  std::uint64_t queue_drops = 0;
  std::uint64_t csma_failures = 0;
  std::uint64_t ack_failures = 0;
  std::uint64_t duty_denials = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t cap_deferrals = 0;
};

struct MacHooks {
  /// Every frame this entity puts on air (data, ACK, beacon).
  std::function<void(const Tx&)> on_transmit;
  /// Air end of every frame this entity sent; routed to receivers by the owner.
  std::function<void(const Tx&, bool delivered)> on_air_end;
  /// Frames given up by the MAC.
  std::function<void(const MacFrame&, DropReason)> on_drop;
  /// Data frames the MAC considers sent: acknowledged, or transmitted when no
  /// ACK was requested.
  std::function<void(const MacFrame&)> on_done;
};

class DsmeMac {
 public:
  DsmeMac(MacEnv& env, NodeId id, std::uint64_t seed, std::size_t cap_queue = 8, std::size_t cfp_queue = 8)
      : env_(env), id_(id), rng_(seed, "mac/" + std::to_string(id)), cap_queue_(cap_queue),
        cfp_capacity_(cfp_queue) {}

  NodeId id() const { return id_; }
  void set_hooks(MacHooks h) { hooks_ = std::move(h); }
  const MacCounters& counters() const { return counters_; }
  const MacQueue& cap_queue() const { return cap_queue_; }

  std::uint64_t next_frame_id() { return (static_cast<std::uint64_t>(id_) << 40) | ++frame_seq_; }

  // ---- CAP ---------------------------------------------------------------

  /// `priority` frames (control traffic) overtake queued data but never the
  /// frame currently in a CSMA-CA procedure.
  bool enqueue_cap(MacFrame f, bool priority = false) {
    f.carrier = Carrier::Cap;
    f.src = id_;
    if (f.id == 0) f.id = next_frame_id();
    if (f.dst == kBroadcast) f.ack_requested = false;
    const bool ok = priority ? cap_queue_.enqueue_priority(f, cap_active_ ? 1 : 0) : cap_queue_.enqueue(f);
    if (!ok) {
      ++counters_.queue_drops;
      if (hooks_.on_drop) hooks_.on_drop(f, DropReason::QueueFull);
      return false;
    }
    if (!cap_active_) start_cap_procedure();
    return true;
  }

  /// Called by the owner when a frame addressed to this entity arrives intact.
  /// Returns false for ACK frames and duplicate retransmissions, which are
  /// consumed here.
  bool receive(const Tx& tx) {
    const MacFrame& f = tx.frame;
    if (f.is_ack) {
      if (awaiting_ack_ && !cap_queue_.empty() && cap_queue_.front().id == f.ack_for) on_ack();
      return false;
    }
    if (f.carrier == Carrier::Cap && f.ack_requested && f.dst == id_) send_ack(f);
    if (f.carrier != Carrier::Beacon && f.dst == id_) {
      auto [it, fresh] = seen_.emplace(f.id, env_.sim.now());
      if (!fresh) return false;
      if (seen_.size() > 4096) prune_seen();
    }
    return true;
  }

  // ---- CFP ---------------------------------------------------------------

  /// Registers a cell in which this entity transmits toward `peer`.
  void add_tx_cell(const GtsCell& cell, NodeId peer) { tx_cells_[peer].push_back(cell); }

  bool has_tx_cells(NodeId peer) const { return tx_cells_.count(peer) && !tx_cells_.at(peer).empty(); }

  bool enqueue_cfp(MacFrame f, bool priority = false) {
    f.carrier = Carrier::Cfp;
    f.src = id_;
    f.ack_requested = false;
    if (f.id == 0) f.id = next_frame_id();
    if (!has_tx_cells(f.dst)) throw SimulationError("no GTS toward destination " + std::to_string(f.dst));
    auto [it, inserted] = cfp_queues_.try_emplace(f.dst, cfp_capacity_);
    auto& q = it->second;
    const NodeId peer = f.dst;
    if (q.size() >= q.capacity()) {
      ++counters_.queue_drops;
      if (hooks_.on_drop) hooks_.on_drop(f, DropReason::QueueFull);
      return false;
    }
    if (priority) {
      q.enqueue_priority(std::move(f));
    } else {
      q.enqueue(std::move(f));
    }
    if (!cfp_scheduled_[peer]) schedule_cfp(peer, env_.sim.now());
    return true;
  }

  std::size_t cfp_backlog(NodeId peer) const {
    auto it = cfp_queues_.find(peer);
    return it == cfp_queues_.end() ? 0 : it->second.size();
  }

  /// Next start of one of this entity's tx cells toward `peer`, at or after t.
  Seconds next_tx_cell(NodeId peer, Seconds t, GtsCell* which = nullptr) const {
    Seconds best = std::numeric_limits<Seconds>::infinity();
    for (const auto& c : tx_cells_.at(peer)) {
      const Seconds at = env_.sf.next_occurrence(env_.sf.cfp_offset(c.superframe_index, c.slot_index), t);
      if (at < best) {
        best = at;
        if (which) *which = c;
      }
    }
    return best;
  }

  // ---- Beacon (gateway) ----------------------------------------------------

  /// Sends a beacon now on the common channel. Returns false on duty denial.
  bool send_beacon(MacFrame beacon) {
    beacon.carrier = Carrier::Beacon;
    beacon.src = id_;
    beacon.dst = kBroadcast;
    beacon.id = next_frame_id();
    const Seconds toa = time_on_air(beacon.phy_bytes(), env_.phy);
    if (toa > env_.sf.slot_duration) throw ConfigError("beacon does not fit the beacon slot");
    if (env_.medium.is_transmitting(id_, env_.sf.common_channel)) return false;
    const auto d = env_.ledger.permit(id_, env_.sf.common_channel, env_.cap_duty_limit, toa, env_.sim.now());
    if (!d.allowed) {
      ++counters_.duty_denials;
      return false;
    }
    ++counters_.tx_beacon;
    put_on_air(env_.sf.common_channel, toa, std::move(beacon), nullptr);
    return true;
  }

 private:
  // Slotted CSMA-CA with CAD ---------------------------------------------------

  void start_cap_procedure() {
    if (cap_queue_.empty()) {
      cap_active_ = false;
      return;
    }
    cap_active_ = true;
    backoffs_ = 0;
    retries_ = 0;
    schedule_attempt();
  }

  void schedule_attempt() {
    Seconds t = std::max(env_.sim.now(), defer_until_);
    t = env_.sf.next_cap_start(t);
    if (t > env_.sim.now()) {
      env_.sim.schedule(t, "cap_wake", id_, [this] { backoff(); });
    } else {
      backoff();
    }
  }

  void backoff() {
    const int be = std::min(env_.csma.be0 + backoffs_, env_.csma.max_be);
    const auto slots = rng_.uniform_int(0, (std::int64_t{1} << be) - 1);
    const Seconds cad_at = env_.sim.now() + static_cast<double>(slots) * env_.csma.unit;
    const auto k = env_.sf.superframe_at(env_.sim.now());
    const Seconds toa = time_on_air(cap_queue_.front().phy_bytes(), env_.phy);
    if (cad_at + env_.csma.unit + toa > env_.sf.cap_end(k)) {
      defer_to_next_cap(k);
      return;
    }
    // the CAD occupies [cad_at, cad_at + unit) and is decided at its end
    env_.sim.schedule(cad_at + env_.csma.unit, "cad", id_, [this] { channel_activity_detection(); });
  }

  void defer_to_next_cap(std::int64_t k) {
    ++counters_.cap_deferrals;
    env_.sim.schedule(env_.sf.cap_start(k + 1), "cap_wake", id_, [this] { backoff(); });
  }

  void channel_activity_detection() {
    const int ch = env_.sf.common_channel;
    const Seconds now = env_.sim.now();
    if (env_.medium.cad_busy(ch, now - env_.csma.unit, now) || env_.medium.is_transmitting(id_, ch)) {
      channel_busy();
      return;
    }
    const Seconds toa = time_on_air(cap_queue_.front().phy_bytes(), env_.phy);
    const auto k = env_.sf.superframe_at(now - env_.csma.unit);
    if (now + toa > env_.sf.cap_end(k)) {
      defer_to_next_cap(k);
      return;
    }
    cap_transmit(toa);
  }

  void channel_busy() {
    ++backoffs_;
    if (backoffs_ >= env_.csma.max_backoffs) {
      ++counters_.csma_failures;
      attempt_failed(DropReason::CsmaExhausted);
    } else {
      backoff();
    }
  }

  void cap_transmit(Seconds toa) {
    const int ch = env_.sf.common_channel;
    // an ACK this station started after its CAD occupies the radio
    if (env_.medium.is_transmitting(id_, ch)) {
      channel_busy();
      return;
    }
    const auto d = env_.ledger.permit(id_, ch, env_.cap_duty_limit, toa, env_.sim.now());
    if (!d.allowed) {
      ++counters_.duty_denials;
      defer_until_ = d.next_allowed_at;
      schedule_attempt();
      return;
    }
    MacFrame frame = cap_queue_.front();
    ++counters_.tx_cap;
    if (retries_ > 0) ++counters_.retransmissions;
    put_on_air(ch, toa, std::move(frame), [this](const Tx& tx, bool) { cap_tx_done(tx); });
  }

  void cap_tx_done(const Tx& tx) {
    const MacFrame& f = tx.frame;
    if (!f.ack_requested) {
      MacFrame done = cap_queue_.pop();
      if (hooks_.on_done) hooks_.on_done(done);
      start_cap_procedure();
      return;
    }
    awaiting_ack_ = true;
    const Seconds ack_toa = time_on_air(kAckBytes, env_.phy);
    const Seconds wait = env_.csma.ack_turnaround + ack_toa + env_.csma.unit;
    ack_timer_ = env_.sim.schedule_in(wait, "ack_timeout", id_, [this] {
      awaiting_ack_ = false;
      ++counters_.ack_failures;
      attempt_failed(DropReason::AckRetriesExhausted);
    });
  }

  void on_ack() {
    env_.sim.cancel(ack_timer_);
    awaiting_ack_ = false;
    MacFrame done = cap_queue_.pop();
    if (hooks_.on_done) hooks_.on_done(done);
    start_cap_procedure();
  }

  void attempt_failed(DropReason reason) {
    MacFrame& f = cap_queue_.front();
    if (f.ack_requested && retries_ < env_.csma.max_retries) {
      ++retries_;
      backoffs_ = 0;
      schedule_attempt();
      return;
    }
    MacFrame dropped = cap_queue_.pop();
    if (hooks_.on_drop) hooks_.on_drop(dropped, reason);
    start_cap_procedure();
  }

  void send_ack(const MacFrame& f) {
    MacFrame ack;
    ack.id = next_frame_id();
    ack.src = id_;
    ack.dst = f.src;
    ack.carrier = Carrier::Cap;
    ack.is_ack = true;
    ack.ack_for = f.id;
    env_.sim.schedule_in(env_.csma.ack_turnaround, "ack_tx", id_, [this, ack]() mutable {
      const int ch = env_.sf.common_channel;
      if (env_.medium.is_transmitting(id_, ch)) return;
      const Seconds toa = time_on_air(kAckBytes, env_.phy);
      const auto d = env_.ledger.permit(id_, ch, env_.cap_duty_limit, toa, env_.sim.now());
      if (!d.allowed) {
        ++counters_.duty_denials;
        return;
      }
      ++counters_.tx_ack;
      put_on_air(ch, toa, std::move(ack), nullptr);
    });
  }

  void prune_seen() {
    const Seconds horizon = env_.sim.now() - 3600.0;
    for (auto it = seen_.begin(); it != seen_.end();) {
      if (it->second < horizon) it = seen_.erase(it);
      else ++it;
    }
  }

  // CFP service ----------------------------------------------------------------

  void schedule_cfp(NodeId peer, Seconds from) {
    GtsCell cell;
    const Seconds at = next_tx_cell(peer, from, &cell);
    cfp_scheduled_[peer] = true;
    env_.sim.schedule(at, "cfp_slot", id_, [this, peer, cell] { serve_cfp(peer, cell); });
  }

  void serve_cfp(NodeId peer, const GtsCell& cell) {
    cfp_scheduled_[peer] = false;
    auto& q = cfp_queues_.at(peer);
    if (q.empty()) return;
    const Seconds now = env_.sim.now();
    const Seconds toa = time_on_air(q.front().phy_bytes(), env_.phy);
    if (toa > env_.sf.slot_duration) throw ConfigError("frame does not fit a GTS");
    // cells of one radio never overlap in time, so a busy radio means a
    // misconfigured schedule; skip the cell rather than double-book airtime
    if (!env_.medium.is_transmitting(id_, cell.channel)) {
      const auto d = env_.ledger.permit(id_, cell.channel, env_.cfp_duty_limit, toa, now);
      if (!d.allowed) {
        ++counters_.duty_denials;
        schedule_cfp(peer, std::max(d.next_allowed_at, now + 1e-6));
        return;
      }
      ++counters_.tx_cfp;
      MacFrame f = q.pop();
      if (hooks_.on_done) hooks_.on_done(f);
      put_on_air(cell.channel, toa, std::move(f), nullptr);
    }
    if (!q.empty()) schedule_cfp(peer, now + 1e-6);
  }

  // Common ---------------------------------------------------------------------

  void put_on_air(int channel, Seconds toa, MacFrame frame, std::function<void(const Tx&, bool)> local) {
    if (hooks_.on_transmit) {
      Tx rec;
      rec.sender = id_;
      rec.channel = channel;
      rec.start = env_.sim.now();
      rec.duration = toa;
      rec.frame = frame;
      hooks_.on_transmit(rec);
    }
    auto hook = hooks_.on_air_end;
    env_.medium.transmit(id_, channel, toa, std::move(frame),
                         [hook, local = std::move(local)](const Tx& tx, bool ok) {
                           if (hook) hook(tx, ok);
                           if (local) local(tx, ok);
                         });
  }

  MacEnv& env_;
  NodeId id_;
  RngStream rng_;
  MacHooks hooks_;
  MacCounters counters_;
  std::uint64_t frame_seq_ = 0;

  MacQueue cap_queue_;
  bool cap_active_ = false;
  bool awaiting_ack_ = false;
  int backoffs_ = 0;
  int retries_ = 0;
  Seconds defer_until_ = 0.0;
  EventHandle ack_timer_;
  std::map<std::uint64_t, Seconds> seen_;

  std::size_t cfp_capacity_;
  std::map<NodeId, std::vector<GtsCell>> tx_cells_;
  std::map<NodeId, MacQueue> cfp_queues_;
  std::map<NodeId, bool> cfp_scheduled_;
};

}  // namespace loraicn::mac
