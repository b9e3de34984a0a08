#pragma once

// One gateway and n nodes in a star: ICN forwarders on top of DSME MAC
// entities, the gateway convergence layer, traffic generation and
// per-transaction metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "loraicn/icn.hpp"
#include "loraicn/mac_dsme.hpp"
#include "loraicn/mapping.hpp"
#include "loraicn/phy_lora.hpp"
#include "loraicn/sim_core.hpp"

namespace loraicn {

struct RetransmissionConfig {
  bool enabled = false;
  Seconds timeout = 0.0;  // 0: one beacon interval
  int max_retransmissions = 3;
  double lifetime_growth = 1.0;  // lifetime multiplier per retransmission
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::string scheme = "interest-cfp-data-cfp";
  int n_nodes = 14;
  Seconds interval = 60.0;  // mean exponential inter-production/request time per node
  Seconds duration = 0.0;   // 0: max(7200, 100 * interval)
  Seconds warmup = -1.0;    // < 0: one beacon interval
  Seconds drain = -1.0;     // < 0: long enough for every transaction to resolve
  std::uint64_t seed = 1;
  int replications = 20;
  RetransmissionConfig retx;
  bool link_ack = true;
  int slots_per_node = -1;  // < 0: 2 when the scheme uses the CFP, else 0

  PhyConfig phy;
  mac::SuperframeConfig superframe;
  mac::CsmaConfig csma;
  double cap_duty_limit = 0.10;
  double cfp_duty_limit = 0.01;
  Seconds duty_window = 3600.0;
  int queue_capacity = 8;
  int gateway_cap_queue = 32;

  int gateway_cs_capacity = 64;
  int node_cs_capacity = 8;
  Seconds cs_ttl = 300.0;
  Seconds gateway_interest_lifetime = 0.0;  // 0: 10 s per registered node
  Seconds node_interest_lifetime = 600.0;
  Seconds registration_lifetime = 3600.0;
  Seconds registration_jitter = 60.0;
  Seconds node_deadline = 600.0;  // horizon for push and indication transactions
  int data_payload = 10;
  /// Downstream content changes every window; requests in one window share an item (0 = interval).
  Seconds content_window = 0.0;
  int downstream_payload = 6;
  int beacon_data_items = 6;
  int icn_payload = 100;
  bool keep_tx_log = false;

  Seconds effective_duration() const { return duration > 0.0 ? duration : std::max(7200.0, 100.0 * interval); }
  Seconds effective_warmup() const { return warmup >= 0.0 ? warmup : superframe.beacon_interval(); }
  Seconds retx_timeout() const { return retx.timeout > 0.0 ? retx.timeout : superframe.beacon_interval(); }

  void validate() const {
    const MappingScheme& s = find_scheme(scheme);
    phy.validate();
    superframe.validate();
    csma.validate();
    if (n_nodes < 1) throw ConfigError("n_nodes must be >= 1");
    if (n_nodes > 999) throw ConfigError("n_nodes must be <= 999");
    if (!(interval > 0.0)) throw ConfigError("interval must be positive");
    if (duration < 0.0) throw ConfigError("duration must be >= 0");
    if (effective_duration() < 10.0 * interval - 1e-9)
      throw ConfigError("duration must be at least 10 x interval");
    if (effective_warmup() >= effective_duration()) throw ConfigError("warmup must be shorter than duration");
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (retx.max_retransmissions < 0) throw ConfigError("retransmissions.max must be >= 0");
    if (retx.timeout < 0.0) throw ConfigError("retransmissions.timeout must be >= 0");
    if (!(retx.lifetime_growth >= 1.0)) throw ConfigError("retransmissions.lifetime_growth must be >= 1");
    if (slots_per_node > 2) throw ConfigError("slots_per_node must be 0, 1 or 2");
    if (slots_per_node == 0 && (s.node_tx_cfp() || s.gateway_tx_cfp()))
      throw ConfigError("scheme '" + scheme + "' uses the CFP and needs slots_per_node >= 1");
    if (!(cap_duty_limit > 0.0 && cap_duty_limit <= 1.0)) throw ConfigError("cap_duty_limit must lie in (0,1]");
    if (!(cfp_duty_limit > 0.0 && cfp_duty_limit <= 1.0)) throw ConfigError("cfp_duty_limit must lie in (0,1]");
    if (!(duty_window > 0.0)) throw ConfigError("duty_window must be positive");
    if (queue_capacity < 1 || gateway_cap_queue < 1) throw ConfigError("queue capacities must be >= 1");
    if (gateway_cs_capacity < 1 || node_cs_capacity < 1) throw ConfigError("content store capacities must be >= 1");
    if (!(cs_ttl > 0.0)) throw ConfigError("cs_ttl must be positive");
    if (gateway_interest_lifetime < 0.0) throw ConfigError("gateway_interest_lifetime must be >= 0");
    if (!(node_interest_lifetime > 0.0)) throw ConfigError("node_interest_lifetime must be positive");
    if (!(registration_lifetime > registration_jitter + superframe.msf_duration()))
      throw ConfigError("registration_lifetime must exceed jitter plus one multi-superframe");
    if (registration_jitter < 0.0) throw ConfigError("registration_jitter must be >= 0");
    if (!(node_deadline > 0.0)) throw ConfigError("node_deadline must be positive");
    if (data_payload < 0 || downstream_payload < 0) throw ConfigError("payload sizes must be >= 0");
    if (content_window < 0.0) throw ConfigError("content_window must be >= 0");
    if (beacon_data_items < 1) throw ConfigError("beacon_data_items must be >= 1");
    if (icn_payload < 1 || icn_payload > mac::kMacFrameMax - mac::kBeaconOverhead)
      throw ConfigError("icn_payload must fit a beacon frame");
  }
};

enum class Outcome { Pending, Delivered, Lost };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Pending: return "pending";
    case Outcome::Delivered: return "delivered";
    default: return "lost";
  }
}

struct TransactionRecord {
  std::uint64_t id = 0;
  NodeId node = 0;
  std::string name;
  Seconds created_at = 0.0;
  std::optional<Seconds> first_tx_at;
  std::optional<Seconds> completed_at;
  int retransmissions = 0;
  Outcome outcome = Outcome::Pending;
  bool measured = false;  // created inside the measurement window
  Seconds deadline = 0.0;

  std::optional<Seconds> latency() const {
    if (!completed_at) return std::nullopt;
    return *completed_at - created_at;
  }
};

struct TxLogEntry {
  Seconds start = 0.0;
  Seconds duration = 0.0;
  NodeId sender = 0;
  NodeId dst = 0;
  int channel = 0;
  mac::Carrier carrier = mac::Carrier::Cap;
  bool is_ack = false;
  std::vector<std::pair<std::string, std::string>> messages;  // (type, name)
  int pending = 0;
};

struct BeaconRecord {
  Seconds time = 0.0;
  int interests = 0;
  int data = 0;
  int pending = 0;
  bool sent = false;
};

struct RunResult {
  std::string scenario;
  std::string scheme;
  int n_nodes = 0;
  Seconds interval = 0.0;
  std::uint64_t seed = 0;
  bool operable = true;
  std::string not_operable_reason;

  std::uint64_t produced = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t pending = 0;
  Seconds avg_latency = 0.0;
  Seconds max_latency = 0.0;
  double loss_pct = 0.0;
  double success_pct = 0.0;
  Seconds radio_on_mean = 0.0;
  std::uint64_t queue_drops = 0;
  std::uint64_t duty_denials = 0;
  Seconds measured_span = 0.0;  // length of the creation window

  std::vector<Seconds> radio_on;  // per node, index 0 is node 1
  std::vector<TransactionRecord> transactions;
  std::vector<TxLogEntry> tx_log;
  std::vector<BeaconRecord> beacons;
  std::uint64_t gateway_forwards = 0;
  std::uint64_t upstream_interests = 0;  // distinct Interests the gateway received from its Internet face
  std::uint64_t events = 0;
};

/// Violations of the carrier assignment declared by `scheme`, one line each.
std::vector<std::string> conformance_violations(const MappingScheme& scheme, const std::vector<TxLogEntry>& log);

/// Overlapping CFP transmissions on the same channel, one line each.
std::vector<std::string> cfp_overlaps(const std::vector<TxLogEntry>& log);

class Network {
 public:
  Network(const ScenarioConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), scheme_(find_scheme(cfg.scheme)), seed_(seed), ledger_(cfg.duty_window),
        medium_(sim_, cfg.superframe.medium_channels()),
        env_{sim_, medium_, ledger_, cfg.phy, cfg.superframe, cfg.csma, cfg.cap_duty_limit, cfg.cfp_duty_limit},
        rng_(seed, "gateway") {
    cfg_.validate();
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  Simulator& simulator() { return sim_; }

  RunResult run() {
    RunResult r;
    r.scenario = cfg_.name;
    r.scheme = scheme_.name;
    r.n_nodes = cfg_.n_nodes;
    r.interval = cfg_.interval;
    r.seed = seed_;
    try {
      build();
    } catch (const mac::ScheduleInfeasible& e) {
      r.operable = false;
      r.not_operable_reason = e.what();
      return r;
    }
    const Seconds end = t_end_ + drain();
    r.events = sim_.run_until(end);
    finish(r);
    return r;
  }

 private:
  // Faces: node 0 = app, 1 = gateway; gateway 0 = Internet, n = node n.
  static constexpr icn::FaceId kAppFace = 0;
  static constexpr icn::FaceId kUplinkFace = 1;

  struct Node {
    NodeId id = 0;
    icn::Name prefix;
    std::unique_ptr<mac::DsmeMac> mac;
    std::unique_ptr<icn::Forwarder> fwd;
    std::unique_ptr<RngStream> traffic;
    std::unique_ptr<RngStream> misc;
    std::map<icn::Name, icn::Data> produced;
    std::uint32_t seq = 0;
    std::vector<mac::GtsCell> rx_cells;
    std::map<icn::Name, std::vector<std::size_t>> open;  // downstream consumer
    Seconds radio_on = 0.0;
    bool registering = false;
  };

  // ---------------------------------------------------------------------------
  // construction

  void build() {
    const auto& sf = cfg_.superframe;
    t_end_ = cfg_.effective_duration();
    w0_ = cfg_.effective_warmup();

    gateway_mac_ = std::make_unique<mac::DsmeMac>(env_, mac::kGateway, seed_,
                                                  static_cast<std::size_t>(cfg_.gateway_cap_queue),
                                                  static_cast<std::size_t>(cfg_.queue_capacity));
    gateway_fwd_ = std::make_unique<icn::Forwarder>(
        icn::ForwarderConfig{static_cast<std::size_t>(cfg_.gateway_cs_capacity), cfg_.cs_ttl, 600.0});
    gateway_fwd_->fib().insert(icn::Name::parse("/inet"), 0, std::numeric_limits<Seconds>::infinity());
    reg_expiry_.assign(static_cast<std::size_t>(cfg_.n_nodes) + 1, -1.0);

    nodes_.resize(static_cast<std::size_t>(cfg_.n_nodes));
    for (int i = 0; i < cfg_.n_nodes; ++i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      n.id = static_cast<NodeId>(i + 1);
      n.prefix = node_prefix(n.id);
      n.mac = std::make_unique<mac::DsmeMac>(env_, n.id, seed_, static_cast<std::size_t>(cfg_.queue_capacity),
                                             static_cast<std::size_t>(cfg_.queue_capacity));
      n.fwd = std::make_unique<icn::Forwarder>(
          icn::ForwarderConfig{static_cast<std::size_t>(cfg_.node_cs_capacity), cfg_.cs_ttl, 600.0});
      n.fwd->fib().insert(icn::Name{}, kUplinkFace, std::numeric_limits<Seconds>::infinity());
      n.fwd->fib().insert(n.prefix, kAppFace, std::numeric_limits<Seconds>::infinity());
      n.traffic = std::make_unique<RngStream>(seed_, "traffic/" + std::to_string(n.id));
      n.misc = std::make_unique<RngStream>(seed_, "node/" + std::to_string(n.id));
    }

    // static GTS schedule
    const bool up = scheme_.node_tx_cfp();
    const bool down = scheme_.gateway_tx_cfp();
    int slots = cfg_.slots_per_node;
    if (slots < 0) slots = (up || down) ? 2 : 0;
    if (up || down) {
      const auto pattern = (up && down) ? mac::SlotPattern::PairedTxRx : mac::SlotPattern::Unidirectional;
      const auto dir = up ? mac::GtsDirection::TxToGateway : mac::GtsDirection::RxFromGateway;
      for (const auto& c : mac::build_static_schedule(cfg_.n_nodes, slots, pattern, sf, dir)) {
        Node& n = node(c.owner);
        if (c.direction == mac::GtsDirection::TxToGateway) {
          n.mac->add_tx_cell(c, mac::kGateway);
        } else {
          gateway_mac_->add_tx_cell(c, c.owner);
          n.rx_cells.push_back(c);
        }
      }
    }

    install_hooks(*gateway_mac_, mac::kGateway);
    for (auto& n : nodes_) install_hooks(*n.mac, n.id);

    // beacons
    sim_.schedule(0.0, "beacon", mac::kGateway, [this] { beacon(); });

    // registration bootstrap and traffic
    for (auto& n : nodes_) {
      const Seconds at = n.misc->uniform(0.0, 0.75 * sf.beacon_interval());
      sim_.schedule(at, "register", n.id, [this, id = n.id] { register_node(node(id), true); });
      schedule_next_item(n);
    }
  }

  static icn::Name node_prefix(NodeId id) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "n%03u", static_cast<unsigned>(id));
    return icn::Name::parse("/lora").append(buf);
  }

  Node& node(NodeId id) { return nodes_.at(id - 1); }

  Seconds drain() const {
    if (cfg_.drain >= 0.0) return cfg_.drain;
    const Seconds bi = cfg_.superframe.beacon_interval();
    return consumer_horizon(std::max(gateway_lifetime_bound(), cfg_.node_interest_lifetime)) +
           cfg_.node_deadline + 2.0 * bi;
  }

  Seconds gateway_lifetime_bound() const {
    return cfg_.gateway_interest_lifetime > 0.0 ? cfg_.gateway_interest_lifetime : 10.0 * cfg_.n_nodes;
  }

  /// Time from the first Interest of a consumer until it gives up.
  Seconds consumer_horizon(Seconds lifetime) const {
    if (!cfg_.retx.enabled) return lifetime;
    const Seconds t = cfg_.retx_timeout();
    Seconds last_lifetime = lifetime * std::pow(cfg_.retx.lifetime_growth, cfg_.retx.max_retransmissions);
    return cfg_.retx.max_retransmissions * t + std::max(t, last_lifetime);
  }

  // ---------------------------------------------------------------------------
  // MAC glue

  void install_hooks(mac::DsmeMac& m, NodeId owner) {
    mac::MacHooks h;
    h.on_transmit = [this, owner](const mac::Tx& tx) { on_transmit(owner, tx); };
    h.on_air_end = [this](const mac::Tx& tx, bool ok) { on_air_end(tx, ok); };
    h.on_drop = [this, owner](const mac::MacFrame& f, mac::DropReason) { on_drop(owner, f); };
    h.on_done = [this, owner](const mac::MacFrame& f) { on_done(owner, f); };
    m.set_hooks(std::move(h));
  }

  void on_transmit(NodeId owner, const mac::Tx& tx) {
    const mac::MacFrame& f = tx.frame;
    if (cfg_.keep_tx_log) {
      TxLogEntry e;
      e.start = tx.start;
      e.duration = tx.duration;
      e.sender = owner;
      e.dst = f.dst;
      e.channel = tx.channel;
      e.carrier = f.carrier;
      e.is_ack = f.is_ack;
      e.pending = static_cast<int>(f.pending.size());
      for (const auto& m : f.bundle) e.messages.emplace_back(icn::type_name(m), icn::name_of(m).to_uri());
      tx_log_.push_back(std::move(e));
    }
    if (owner != mac::kGateway) {
      Node& n = node(owner);
      // CFP rx cells and CAP listening are accounted separately
      if (f.carrier == mac::Carrier::Cfp) add_radio(n, tx.start, cfg_.superframe.slot_duration);
      else if (!scheme_.node_listens_cap()) {
        Seconds on = cfg_.csma.unit + tx.duration;
        if (f.ack_requested) on += cfg_.csma.ack_turnaround + time_on_air(mac::kAckBytes, cfg_.phy);
        add_radio(n, tx.start - cfg_.csma.unit, on);
      }
    }
    for (const auto& m : f.bundle) {
      const auto& name = icn::name_of(m);
      if (owner == mac::kGateway) {
        if (auto it = upstream_.find(name); it != upstream_.end()) mark_first_tx(it->second, tx.start);
      } else if (scheme_.direction == FlowDirection::GatewayToNode) {
        auto& open = node(owner).open;
        if (auto it = open.find(name); it != open.end())
          for (auto id : it->second) mark_first_tx(id, tx.start);
      } else if (auto it = upstream_.find(name); it != upstream_.end()) {
        mark_first_tx(it->second, tx.start);
      }
    }
  }

  void mark_first_tx(std::size_t id, Seconds t) {
    auto& rec = txs_[id];
    if (!rec.first_tx_at && t >= rec.created_at) rec.first_tx_at = t;
  }

  void on_air_end(const mac::Tx& tx, bool ok) {
    if (!ok) return;
    const mac::MacFrame& f = tx.frame;
    if (f.carrier == mac::Carrier::Beacon) {
      for (auto& n : nodes_) node_receive_bundle(n, f.bundle);
      return;
    }
    if (f.dst == mac::kBroadcast) {
      if (tx.sender == mac::kGateway)
        for (auto& n : nodes_) node_receive_bundle(n, f.bundle);
      return;
    }
    if (f.dst == mac::kGateway) {
      if (gateway_mac_->receive(tx) && !f.is_ack) gateway_receive(f);
      return;
    }
    if (f.dst >= 1 && f.dst <= nodes_.size()) {
      Node& n = node(f.dst);
      if (n.mac->receive(tx) && !f.is_ack) node_receive_bundle(n, f.bundle);
    }
  }

  void on_drop(NodeId owner, const mac::MacFrame& f) {
    if (owner == mac::kGateway) return;
    Node& n = node(owner);
    for (const auto& m : f.bundle)
      if (is_registration(icn::name_of(m))) retry_registration(n);
  }

  void on_done(NodeId owner, const mac::MacFrame& f) {
    if (owner == mac::kGateway) return;
    Node& n = node(owner);
    for (const auto& m : f.bundle)
      if (is_registration(icn::name_of(m))) registration_confirmed(n);
  }

  /// Sends `msg` from a node toward the gateway on carrier `w`.
  void node_send(Node& n, icn::Message msg, Way w, bool control = false) {
    mac::MacFrame f;
    f.dst = mac::kGateway;
    f.bundle = {std::move(msg)};
    check_frame(f);
    if (w == Way::Cfp) {
      n.mac->enqueue_cfp(std::move(f), control);
    } else {
      f.ack_requested = cfg_.link_ack || control;
      n.mac->enqueue_cap(std::move(f), control);
    }
  }

  /// Sends `msg` from the gateway to node `dst` on carrier `w`.
  void gateway_send(NodeId dst, icn::Message msg, Way w) {
    switch (w) {
      case Way::BeaconPayload:
        if (std::holds_alternative<icn::Data>(msg)) {
          const auto& d = std::get<icn::Data>(msg);
          if (!beacon_data_names_.count(d.name)) {
            beacon_data_names_.insert(d.name);
            beacon_data_.push_back(d);
          }
        } else {
          beacon_interests_.push_back({std::get<icn::Interest>(msg), dst});
        }
        return;
      case Way::BeaconIndirectCap:
        indirect_.push_back({std::get<icn::Interest>(msg), dst});
        return;
      case Way::Cap: {
        mac::MacFrame f;
        f.dst = dst;
        f.ack_requested = cfg_.link_ack;
        f.bundle = {std::move(msg)};
        check_frame(f);
        gateway_mac_->enqueue_cap(std::move(f));
        return;
      }
      case Way::Cfp: {
        mac::MacFrame f;
        f.dst = dst;
        f.bundle = {std::move(msg)};
        check_frame(f);
        gateway_mac_->enqueue_cfp(std::move(f));
        return;
      }
      case Way::None:
        throw SimulationError("scheme has no carrier for this message");
    }
  }

  void check_frame(const mac::MacFrame& f) const {
    if (f.payload_bytes() > cfg_.icn_payload)
      throw ConfigError("ICN message of " + std::to_string(f.payload_bytes()) + " bytes exceeds the " +
                        std::to_string(cfg_.icn_payload) + " byte frame budget");
  }

  // ---------------------------------------------------------------------------
  // beacons

  void beacon() {
    const auto& sf = cfg_.superframe;
    const Seconds now = sim_.now();
    for (auto& n : nodes_) add_radio(n, now, sf.slot_duration);

    mac::MacFrame b;
    std::vector<std::pair<icn::Interest, NodeId>> indirect_now;
    if (scheme_.interest == Way::BeaconIndirectCap) {
      // at most seven pending addresses per beacon
      std::set<NodeId> chosen;
      std::deque<std::pair<icn::Interest, NodeId>> rest;
      for (auto& item : indirect_) {
        if (!gateway_pit_live(item.first.name)) continue;
        if (chosen.count(item.second) || chosen.size() < 7) {
          chosen.insert(item.second);
          indirect_now.push_back(item);
        } else {
          rest.push_back(item);
        }
      }
      indirect_.swap(rest);
      b.pending.assign(chosen.begin(), chosen.end());
    }
    const int budget = cfg_.icn_payload - 2 * static_cast<int>(b.pending.size());
    std::vector<icn::Message> interests;
    {
      std::deque<std::pair<icn::Interest, NodeId>> live;
      for (auto& item : beacon_interests_)
        if (gateway_pit_live(item.first.name)) live.push_back(item);
      beacon_interests_.swap(live);
      for (auto& item : beacon_interests_) interests.emplace_back(item.first);
    }
    std::vector<icn::Message> data;
    for (auto& d : beacon_data_) data.emplace_back(d);

    std::size_t n_interests = 0, n_data = 0;
    if (!interests.empty()) {
      auto frames = icn::encode_bundle(interests, budget);
      b.bundle = frames.front();
      n_interests = b.bundle.size();
    } else if (!data.empty()) {
      auto frames = icn::encode_bundle(data, budget, cfg_.beacon_data_items);
      b.bundle = frames.front();
      n_data = b.bundle.size();
    }

    BeaconRecord rec;
    rec.time = now;
    rec.interests = static_cast<int>(n_interests);
    rec.data = static_cast<int>(n_data);
    rec.pending = static_cast<int>(b.pending.size());
    rec.sent = gateway_mac_->send_beacon(b);
    beacons_.push_back(rec);

    if (rec.sent) {
      // first-fit keeps the queue order, so the carried items are a prefix
      beacon_interests_.erase(beacon_interests_.begin(),
                              beacon_interests_.begin() + static_cast<std::ptrdiff_t>(n_interests));
      for (std::size_t i = 0; i < n_data; ++i) {
        beacon_data_names_.erase(beacon_data_.front().name);
        beacon_data_.pop_front();
      }
      const std::int64_t k = sf.superframe_at(now + 1e-9);
      for (NodeId id : b.pending) add_radio(node(id), sf.cap_start(k), sf.cap_end(k) - sf.cap_start(k));
      for (auto& [interest, dst] : indirect_now) {
        mac::MacFrame f;
        f.dst = mac::kBroadcast;
        f.bundle = {interest};
        check_frame(f);
        gateway_mac_->enqueue_cap(std::move(f));
      }
    } else {
      for (auto it = indirect_now.rbegin(); it != indirect_now.rend(); ++it) indirect_.push_front(*it);
    }
    sim_.schedule(now + sf.beacon_interval(), "beacon", mac::kGateway, [this] { beacon(); });
  }

  /// An Interest is worth a beacon slot only if its Data can still return
  /// within one multi-superframe before the PIT entry expires.
  bool gateway_pit_live(const icn::Name& name) {
    const icn::PitEntry* e = gateway_fwd_->pit().find(name);
    return e && e->expiry > sim_.now() + cfg_.superframe.msf_duration();
  }

  // ---------------------------------------------------------------------------
  // registration

  static icn::Name registration_name(NodeId id) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "n%03u", static_cast<unsigned>(id));
    return icn::Name::parse("/reg").append(buf);
  }

  static bool is_registration(const icn::Name& n) {
    return !n.empty() && n.components().front() == "reg";
  }

  void register_node(Node& n, bool bootstrap) {
    if (n.registering) return;
    n.registering = true;
    icn::Interest i{registration_name(n.id), 10.0, n.misc->u32()};
    const Way w = bootstrap ? Way::Cap : scheme_.uplink();
    node_send(n, i, w, /*control=*/true);
  }

  void registration_confirmed(Node& n) {
    n.registering = false;
    // CFP uplinks may wait up to one multi-superframe for the next own cell
    const Seconds lead = scheme_.uplink() == Way::Cfp ? cfg_.superframe.msf_duration() : 0.0;
    const Seconds next = cfg_.registration_lifetime - n.misc->uniform(0.0, cfg_.registration_jitter) - lead;
    sim_.schedule_in(next, "register", n.id, [this, id = n.id] { register_node(node(id), false); });
  }

  void retry_registration(Node& n) {
    n.registering = false;
    const Seconds delay = n.misc->uniform(0.0, cfg_.superframe.beacon_interval());
    sim_.schedule_in(delay, "register", n.id, [this, id = n.id] { register_node(node(id), true); });
  }

  std::size_t registered_count() const {
    const Seconds now = sim_.now();
    std::size_t c = 0;
    for (std::size_t i = 1; i < reg_expiry_.size(); ++i)
      if (reg_expiry_[i] > now) ++c;
    return c;
  }

  // ---------------------------------------------------------------------------
  // traffic

  void schedule_next_item(Node& n) {
    const Seconds at = sim_.now() + draw_exponential(*n.traffic, cfg_.interval);
    if (at >= t_end_) return;
    sim_.schedule(at, "content", n.id, [this, id = n.id] {
      Node& nn = node(id);
      if (scheme_.direction == FlowDirection::NodeToGateway) produce(nn);
      else request(nn);
      schedule_next_item(nn);
    });
  }

  std::size_t open_transaction(NodeId node_id, const icn::Name& name, Seconds deadline) {
    TransactionRecord t;
    t.id = txs_.size() + 1;
    t.node = node_id;
    t.name = name.to_uri();
    t.created_at = sim_.now();
    t.measured = t.created_at >= w0_ && t.created_at < t_end_;
    t.deadline = deadline;
    txs_.push_back(std::move(t));
    const std::size_t idx = txs_.size() - 1;
    arm_deadline(idx);
    return idx;
  }

  void arm_deadline(std::size_t idx) {
    sim_.schedule(txs_[idx].deadline, "deadline", txs_[idx].node, [this, idx] {
      auto& t = txs_[idx];
      if (t.outcome != Outcome::Pending) return;
      if (sim_.now() + 1e-9 < t.deadline) return;  // extended; a later event handles it
      t.outcome = Outcome::Lost;
    });
  }

  void complete(std::size_t idx) {
    auto& t = txs_[idx];
    if (t.outcome != Outcome::Pending) return;
    t.outcome = Outcome::Delivered;
    t.completed_at = sim_.now();
  }

  /// Upstream: the node creates a content item.
  void produce(Node& n) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%03u", n.seq++ % 1000u);
    const icn::Name name = n.prefix.append("t").append(buf);
    icn::Data d{name, cfg_.data_payload, cfg_.cs_ttl, false};
    n.produced[name] = d;
    if (n.produced.size() > 1000) n.produced.erase(n.produced.begin());

    if (scheme_.push) {
      const std::size_t idx = open_transaction(n.id, name, sim_.now() + cfg_.node_deadline);
      upstream_[name] = idx;
      d.unsolicited = true;
      node_send(n, d, scheme_.data);
    } else if (scheme_.indication != Way::None) {
      const std::size_t idx = open_transaction(n.id, name, sim_.now() + cfg_.node_deadline);
      upstream_[name] = idx;
      node_send(n, icn::Indication{name}, scheme_.indication);
    } else {
      const std::size_t idx = open_transaction(n.id, name, sim_.now() + consumer_horizon(gateway_lifetime()));
      upstream_[name] = idx;
      consumer_issue(idx, 0);
    }
  }

  Seconds gateway_lifetime() const {
    if (cfg_.gateway_interest_lifetime > 0.0) return cfg_.gateway_interest_lifetime;
    return 10.0 * static_cast<double>(std::max<std::size_t>(1, registered_count()));
  }

  /// Gateway-side consumer (Internet client or indication proxy): attempt k.
  void consumer_issue(std::size_t idx, int attempt) {
    auto& t = txs_[idx];
    if (t.outcome != Outcome::Pending) return;
    if (attempt > 0) ++t.retransmissions;
    Seconds lifetime = gateway_lifetime() * std::pow(cfg_.retx.lifetime_growth, attempt);
    if (attempt == 0) {
      const Seconds horizon = sim_.now() + consumer_horizon(gateway_lifetime());
      if (horizon > t.deadline) {
        t.deadline = horizon;
        arm_deadline(idx);
      }
    }
    icn::Interest i{icn::Name::parse(t.name), lifetime, rng_.u32()};
    if (attempt == 0) ++upstream_interests_;
    gateway_interest_from_internet(i);
    if (cfg_.retx.enabled && attempt < cfg_.retx.max_retransmissions)
      sim_.schedule_in(cfg_.retx_timeout(), "retransmit", kGlobalTarget,
                       [this, idx, attempt] { consumer_issue(idx, attempt + 1); });
  }

  void gateway_interest_from_internet(const icn::Interest& i) {
    const Seconds now = sim_.now();
    auto act = gateway_fwd_->process_interest(i, 0, now);
    switch (act.verdict) {
      case icn::InterestVerdict::ReplyFromCs:
        gateway_data_to_faces(*act.data, {0});
        break;
      case icn::InterestVerdict::Forward:
        ++gateway_forwards_;
        gateway_send(static_cast<NodeId>(act.out_face), i, scheme_.interest);
        break;
      default:
        break;  // aggregated, duplicate, or NACKed toward the consumer
    }
  }

  /// Downstream: the node's application requests a catalog item.
  void request(Node& n) {
    const Seconds window = cfg_.content_window > 0.0 ? cfg_.content_window : cfg_.interval;
    const auto k = static_cast<long long>(std::floor(sim_.now() / window));
    const icn::Name name = icn::Name::parse("/inet/d").append(std::to_string(k));
    const std::size_t idx =
        open_transaction(n.id, name, sim_.now() + consumer_horizon(cfg_.node_interest_lifetime));
    n.open[name].push_back(idx);
    node_consumer_issue(n.id, idx, 0);
  }

  void node_consumer_issue(NodeId id, std::size_t idx, int attempt) {
    auto& t = txs_[idx];
    if (t.outcome != Outcome::Pending) return;
    if (attempt > 0) ++t.retransmissions;
    Node& n = node(id);
    const icn::Name name = icn::Name::parse(t.name);
    icn::Interest i{name, cfg_.node_interest_lifetime * std::pow(cfg_.retx.lifetime_growth, attempt), n.misc->u32()};
    auto act = n.fwd->process_interest(i, kAppFace, sim_.now());
    if (act.verdict == icn::InterestVerdict::ReplyFromCs) {
      node_app_data(n, *act.data);
    } else if (act.verdict == icn::InterestVerdict::Forward) {
      node_send(n, i, scheme_.interest);
    }
    if (cfg_.retx.enabled && attempt < cfg_.retx.max_retransmissions)
      sim_.schedule_in(cfg_.retx_timeout(), "retransmit", id,
                       [this, id, idx, attempt] { node_consumer_issue(id, idx, attempt + 1); });
  }

  void node_app_data(Node& n, const icn::Data& d) {
    for (auto it = n.open.begin(); it != n.open.end();) {
      if (it->first.is_prefix_of(d.name)) {
        for (auto idx : it->second) complete(idx);
        it = n.open.erase(it);
      } else {
        ++it;
      }
    }
  }

  // ---------------------------------------------------------------------------
  // reception

  void node_receive_bundle(Node& n, const icn::Bundle& bundle) {
    for (const auto& m : bundle) {
      if (const auto* i = std::get_if<icn::Interest>(&m)) {
        // broadcast Interests for other producers are not ours to answer
        if (!n.prefix.is_prefix_of(i->name)) continue;
        node_interest(n, *i);
      } else if (const auto* d = std::get_if<icn::Data>(&m)) {
        auto act = n.fwd->process_data(*d, kUplinkFace, sim_.now());
        if (act.verdict == icn::DataVerdict::ConsumePit &&
            std::find(act.faces.begin(), act.faces.end(), kAppFace) != act.faces.end())
          node_app_data(n, *d);
      }
    }
  }

  void node_interest(Node& n, const icn::Interest& i) {
    const Seconds now = sim_.now();
    auto act = n.fwd->process_interest(i, kUplinkFace, now);
    if (act.verdict == icn::InterestVerdict::ReplyFromCs) {
      node_send(n, *act.data, scheme_.data);
      return;
    }
    if (act.verdict != icn::InterestVerdict::Forward || act.out_face != kAppFace) return;
    auto it = n.produced.find(i.name);
    if (it == n.produced.end()) return;
    auto dact = n.fwd->process_data(it->second, kAppFace, now);
    if (dact.verdict == icn::DataVerdict::ConsumePit &&
        std::find(dact.faces.begin(), dact.faces.end(), kUplinkFace) != dact.faces.end())
      node_send(n, it->second, scheme_.data);
  }

  void gateway_receive(const mac::MacFrame& f) {
    const NodeId src = f.src;
    const icn::FaceId face = static_cast<icn::FaceId>(src);
    const Seconds now = sim_.now();
    for (const auto& m : f.bundle) {
      if (const auto* i = std::get_if<icn::Interest>(&m)) {
        if (is_registration(i->name)) {
          reg_expiry_[src] = now + cfg_.registration_lifetime;
          gateway_fwd_->fib().insert(node_prefix(src), face, now + cfg_.registration_lifetime);
          continue;
        }
        auto act = gateway_fwd_->process_interest(*i, face, now);
        if (act.verdict == icn::InterestVerdict::ReplyFromCs) {
          gateway_data_to_faces(*act.data, {face});
        } else if (act.verdict == icn::InterestVerdict::Forward && act.out_face == 0) {
          ++gateway_forwards_;
          // Internet producer answers without delay
          icn::Data d{i->name, cfg_.downstream_payload, cfg_.cs_ttl, false};
          auto dact = gateway_fwd_->process_data(d, 0, now);
          if (dact.verdict == icn::DataVerdict::ConsumePit) gateway_data_to_faces(d, dact.faces);
        }
      } else if (const auto* d = std::get_if<icn::Data>(&m)) {
        auto act = gateway_fwd_->process_data(*d, face, now);
        if (act.verdict == icn::DataVerdict::ConsumePit) {
          gateway_data_to_faces(*d, act.faces);
        } else if (act.verdict == icn::DataVerdict::CacheUnsolicited) {
          if (auto it = upstream_.find(d->name); it != upstream_.end()) complete(it->second);
        }
      } else if (const auto* ind = std::get_if<icn::Indication>(&m)) {
        auto it = upstream_.find(ind->name);
        if (it != upstream_.end() && !indicated_.count(it->second)) {
          indicated_.insert(it->second);
          consumer_issue(it->second, 0);
        }
      }
    }
  }

  void gateway_data_to_faces(const icn::Data& d, const std::vector<icn::FaceId>& faces) {
    for (icn::FaceId f : faces) {
      if (f == 0) {
        if (auto it = upstream_.find(d.name); it != upstream_.end()) complete(it->second);
      } else {
        gateway_send(static_cast<NodeId>(f), d, scheme_.data);
      }
    }
  }

  // ---------------------------------------------------------------------------
  // accounting

  void add_radio(Node& n, Seconds start, Seconds len) {
    const Seconds a = std::max(start, w0_);
    const Seconds b = std::min(start + len, t_end_);
    if (b > a) n.radio_on += b - a;
  }

  /// Periodic listening that does not depend on traffic: owned rx cells and,
  /// for schemes that address nodes in the CAP, every CAP.
  void add_periodic_radio() {
    const auto& sf = cfg_.superframe;
    const Seconds msf = sf.msf_duration();
    for (auto& n : nodes_) {
      for (const auto& c : n.rx_cells) {
        const Seconds off = sf.cfp_offset(c.superframe_index, c.slot_index);
        for (Seconds t = sf.next_occurrence(off, w0_); t < t_end_; t += msf) add_radio(n, t, sf.slot_duration);
      }
      if (scheme_.node_listens_cap()) {
        for (std::int64_t k = sf.superframe_at(w0_); sf.superframe_start(k) < t_end_; ++k)
          add_radio(n, sf.cap_start(k), sf.cap_end(k) - sf.cap_start(k));
      }
    }
  }

  void finish(RunResult& r) {
    add_periodic_radio();
    double sum_latency = 0.0;
    for (const auto& t : txs_) {
      if (!t.measured) continue;
      ++r.produced;
      if (t.outcome == Outcome::Delivered) {
        ++r.delivered;
        const Seconds l = *t.latency();
        sum_latency += l;
        r.max_latency = std::max(r.max_latency, l);
      } else if (t.outcome == Outcome::Lost) {
        ++r.lost;
      } else {
        ++r.pending;
      }
    }
    r.avg_latency = r.delivered ? sum_latency / static_cast<double>(r.delivered) : 0.0;
    r.loss_pct = r.produced ? 100.0 * static_cast<double>(r.lost) / static_cast<double>(r.produced) : 0.0;
    r.success_pct = r.produced ? 100.0 * static_cast<double>(r.delivered) / static_cast<double>(r.produced) : 0.0;
    r.measured_span = t_end_ - w0_;

    auto add_counters = [&](const mac::DsmeMac& m) {
      r.queue_drops += m.counters().queue_drops;
      r.duty_denials += m.counters().duty_denials;
    };
    add_counters(*gateway_mac_);
    double radio = 0.0;
    for (const auto& n : nodes_) {
      add_counters(*n.mac);
      r.radio_on.push_back(n.radio_on);
      radio += n.radio_on;
    }
    r.radio_on_mean = nodes_.empty() ? 0.0 : radio / static_cast<double>(nodes_.size());
    r.transactions = std::move(txs_);
    r.tx_log = std::move(tx_log_);
    r.beacons = std::move(beacons_);
    r.gateway_forwards = gateway_forwards_;
    r.upstream_interests = upstream_interests_;
  }

  ScenarioConfig cfg_;
  MappingScheme scheme_;
  std::uint64_t seed_;
  Simulator sim_;
  DutyCycleLedger ledger_;
  mac::Medium medium_;
  mac::MacEnv env_;
  RngStream rng_;

  Seconds t_end_ = 0.0;
  Seconds w0_ = 0.0;

  std::unique_ptr<mac::DsmeMac> gateway_mac_;
  std::unique_ptr<icn::Forwarder> gateway_fwd_;
  std::vector<Seconds> reg_expiry_;
  std::vector<Node> nodes_;

  std::deque<std::pair<icn::Interest, NodeId>> beacon_interests_;
  std::deque<std::pair<icn::Interest, NodeId>> indirect_;
  std::deque<icn::Data> beacon_data_;
  std::set<icn::Name> beacon_data_names_;

  std::vector<TransactionRecord> txs_;
  std::map<icn::Name, std::size_t> upstream_;
  std::set<std::size_t> indicated_;
  std::vector<TxLogEntry> tx_log_;
  std::vector<BeaconRecord> beacons_;
  std::uint64_t gateway_forwards_ = 0;
  std::uint64_t upstream_interests_ = 0;
};

inline RunResult run_once(const ScenarioConfig& cfg, std::uint64_t seed) {
  Network net(cfg, seed);
  return net.run();
}

// ---------------------------------------------------------------------------
// trace checks

inline std::vector<std::string> conformance_violations(const MappingScheme& scheme,
                                                       const std::vector<TxLogEntry>& log) {
  std::vector<std::string> out;
  auto expect = [&](const TxLogEntry& e, const std::string& type, const std::string& name, Way w) {
    bool ok = false;
    if (w == Way::BeaconPayload) ok = e.carrier == mac::Carrier::Beacon;
    else if (w == Way::BeaconIndirectCap) ok = e.carrier == mac::Carrier::Cap && e.dst == mac::kBroadcast;
    else if (w == Way::Cap) ok = e.carrier == mac::Carrier::Cap && e.dst != mac::kBroadcast;
    else if (w == Way::Cfp) ok = e.carrier == mac::Carrier::Cfp;
    if (!ok) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3f", e.start);
      out.push_back(std::string("t=") + buf + " sender " + std::to_string(e.sender) + ": " + type + " " + name +
                    " on " + mac::to_string(e.carrier) + ", scheme declares " + to_string(w));
    }
  };
  const bool down = scheme.direction == FlowDirection::GatewayToNode;
  for (const auto& e : log) {
    if (e.is_ack) continue;
    const bool from_gw = e.sender == mac::kGateway;
    for (const auto& [type, name] : e.messages) {
      // registrations bootstrap in the CAP and refresh on the uplink carrier
      if (name.rfind("/reg/", 0) == 0) {
        if (from_gw) out.push_back("registration " + name + " sent by the gateway");
        else if (e.carrier != mac::Carrier::Cap) expect(e, type, name, scheme.uplink());
        continue;
      }
      Way w = Way::None;
      if (type == "interest") {
        if (from_gw != !down) w = Way::None;
        else w = scheme.interest;
      } else if (type == "data") {
        if (from_gw != down) w = Way::None;
        else w = scheme.data;
      } else if (type == "indication") {
        w = from_gw ? Way::None : scheme.indication;
      }
      if (w == Way::None) {
        out.push_back(std::string(type) + " " + name + " sent by " + std::to_string(e.sender) +
                      " has no carrier in scheme " + scheme.name);
        continue;
      }
      expect(e, type, name, w);
    }
  }
  return out;
}

inline std::vector<std::string> cfp_overlaps(const std::vector<TxLogEntry>& log) {
  std::vector<const TxLogEntry*> cfp;
  for (const auto& e : log)
    if (e.carrier == mac::Carrier::Cfp) cfp.push_back(&e);
  std::sort(cfp.begin(), cfp.end(), [](const TxLogEntry* a, const TxLogEntry* b) {
    return a->channel != b->channel ? a->channel < b->channel : a->start < b->start;
  });
  std::vector<std::string> out;
  for (std::size_t i = 1; i < cfp.size(); ++i) {
    const auto* a = cfp[i - 1];
    const auto* b = cfp[i];
    if (a->channel == b->channel && b->start < a->start + a->duration)
      out.push_back("channel " + std::to_string(a->channel) + ": senders " + std::to_string(a->sender) + " and " +
                    std::to_string(b->sender) + " overlap");
  }
  return out;
}

}  // namespace loraicn
