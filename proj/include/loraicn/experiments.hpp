#pragma once

// Scenario configuration files, replicated runs, parameter sweeps and the
// tabular outputs (CSV rows, per-transaction JSONL, completion CDF).

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "loraicn/network.hpp"

namespace loraicn {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON <-> ScenarioConfig
//
// Parsing is strict: unknown keys and wrongly typed values are rejected with
// the offending path, so a typo never silently falls back to a default.

namespace detail {

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  /// Call after all gets; rejects keys nobody asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + where(it.key()) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline void to_json(json& j, const PhyConfig& p) {
  j = json{{"sf", p.sf}, {"bw", p.bw}, {"cr", p.cr}, {"preamble_symbols", p.preamble_symbols},
           {"explicit_header", p.explicit_header}, {"crc", p.crc}, {"ldro", p.ldro}};
}

namespace mac {

inline void to_json(json& j, const SuperframeConfig& s) {
  j = json{{"superframes_per_msf", s.superframes_per_msf},
           {"slots_per_superframe", s.slots_per_superframe},
           {"cap_slots", s.cap_slots},
           {"cfp_slots", s.cfp_slots},
           {"slot_duration", s.slot_duration},
           {"beacon_interval_msf", s.beacon_interval_msf},
           {"channels", s.channels},
           {"common_channel", s.common_channel}};
}

inline void to_json(json& j, const CsmaConfig& c) {
  j = json{{"max_backoffs", c.max_backoffs}, {"be0", c.be0}, {"max_be", c.max_be}, {"unit", c.unit},
           {"ack_turnaround", c.ack_turnaround}, {"max_retries", c.max_retries}};
}

}  // namespace mac

inline void to_json(json& j, const RetransmissionConfig& r) {
  j = json{{"enabled", r.enabled}, {"timeout", r.timeout}, {"max", r.max_retransmissions},
           {"lifetime_growth", r.lifetime_growth}};
}

inline void to_json(json& j, const ScenarioConfig& c) {
  j = json{{"name", c.name},
           {"scheme", c.scheme},
           {"n_nodes", c.n_nodes},
           {"content_interval_mean", c.interval},
           {"duration", c.duration},
           {"warmup", c.warmup},
           {"drain", c.drain},
           {"seed", c.seed},
           {"replications", c.replications},
           {"retransmissions", c.retx},
           {"link_ack", c.link_ack},
           {"slots_per_node", c.slots_per_node},
           {"phy", c.phy},
           {"superframe", c.superframe},
           {"csma", c.csma},
           {"cap_duty_limit", c.cap_duty_limit},
           {"cfp_duty_limit", c.cfp_duty_limit},
           {"duty_window", c.duty_window},
           {"queue_capacity", c.queue_capacity},
           {"gateway_cap_queue", c.gateway_cap_queue},
           {"gateway_cs_capacity", c.gateway_cs_capacity},
           {"node_cs_capacity", c.node_cs_capacity},
           {"cs_ttl", c.cs_ttl},
           {"gateway_interest_lifetime", c.gateway_interest_lifetime},
           {"node_interest_lifetime", c.node_interest_lifetime},
           {"registration_lifetime", c.registration_lifetime},
           {"registration_jitter", c.registration_jitter},
           {"node_deadline", c.node_deadline},
           {"data_payload", c.data_payload},
           {"content_window", c.content_window},
           {"downstream_payload", c.downstream_payload},
           {"beacon_data_items", c.beacon_data_items},
           {"icn_payload", c.icn_payload}};
}

/// Grid axes of a sweep. Empty axes fall back to the base config's value.
struct SweepAxes {
  std::vector<std::string> schemes;
  std::vector<int> n_nodes;
  std::vector<Seconds> intervals;
  std::vector<bool> retransmissions;

  bool empty() const { return schemes.empty() && n_nodes.empty() && intervals.empty() && retransmissions.empty(); }
};

struct ScenarioFile {
  ScenarioConfig base;
  SweepAxes sweep;
  bool has_sweep = false;
};

inline ScenarioConfig parse_config_object(const json& j, const std::string& path = "") {
  ScenarioConfig c;
  detail::ObjectReader r(j, path);
  r.get("name", c.name);
  r.get("scheme", c.scheme);
  r.get("n_nodes", c.n_nodes);
  r.get("content_interval_mean", c.interval);
  r.get("duration", c.duration);
  r.get("warmup", c.warmup);
  r.get("drain", c.drain);
  r.get("seed", c.seed);
  r.get("replications", c.replications);
  r.get("link_ack", c.link_ack);
  r.get("slots_per_node", c.slots_per_node);
  r.get("cap_duty_limit", c.cap_duty_limit);
  r.get("cfp_duty_limit", c.cfp_duty_limit);
  r.get("duty_window", c.duty_window);
  r.get("queue_capacity", c.queue_capacity);
  r.get("gateway_cap_queue", c.gateway_cap_queue);
  r.get("gateway_cs_capacity", c.gateway_cs_capacity);
  r.get("node_cs_capacity", c.node_cs_capacity);
  r.get("cs_ttl", c.cs_ttl);
  r.get("gateway_interest_lifetime", c.gateway_interest_lifetime);
  r.get("node_interest_lifetime", c.node_interest_lifetime);
  r.get("registration_lifetime", c.registration_lifetime);
  r.get("registration_jitter", c.registration_jitter);
  r.get("node_deadline", c.node_deadline);
  r.get("data_payload", c.data_payload);
  r.get("content_window", c.content_window);
  r.get("downstream_payload", c.downstream_payload);
  r.get("beacon_data_items", c.beacon_data_items);
  r.get("icn_payload", c.icn_payload);
  r.get("keep_tx_log", c.keep_tx_log);

  std::string direction;
  r.get("direction", direction);
  if (const json* p = r.child("retransmissions")) {
    detail::ObjectReader q(*p, r.where("retransmissions"));
    q.get("enabled", c.retx.enabled);
    q.get("timeout", c.retx.timeout);
    q.get("max", c.retx.max_retransmissions);
    q.get("lifetime_growth", c.retx.lifetime_growth);
    q.finish();
  }
  if (const json* p = r.child("phy")) {
    detail::ObjectReader q(*p, r.where("phy"));
    q.get("sf", c.phy.sf);
    q.get("bw", c.phy.bw);
    q.get("cr", c.phy.cr);
    q.get("preamble_symbols", c.phy.preamble_symbols);
    q.get("explicit_header", c.phy.explicit_header);
    q.get("crc", c.phy.crc);
    q.get("ldro", c.phy.ldro);
    q.finish();
  }
  if (const json* p = r.child("superframe")) {
    detail::ObjectReader q(*p, r.where("superframe"));
    auto& s = c.superframe;
    q.get("superframes_per_msf", s.superframes_per_msf);
    q.get("slots_per_superframe", s.slots_per_superframe);
    q.get("cap_slots", s.cap_slots);
    q.get("cfp_slots", s.cfp_slots);
    q.get("slot_duration", s.slot_duration);
    q.get("beacon_interval_msf", s.beacon_interval_msf);
    q.get("channels", s.channels);
    q.get("common_channel", s.common_channel);
    q.finish();
  }
  if (const json* p = r.child("csma")) {
    detail::ObjectReader q(*p, r.where("csma"));
    q.get("max_backoffs", c.csma.max_backoffs);
    q.get("be0", c.csma.be0);
    q.get("max_be", c.csma.max_be);
    q.get("unit", c.csma.unit);
    q.get("ack_turnaround", c.csma.ack_turnaround);
    q.get("max_retries", c.csma.max_retries);
    q.finish();
  }
  r.child("sweep");  // handled by parse_scenario_file
  r.child("description");
  r.finish();

  if (!direction.empty()) {
    if (direction != "node-to-gateway" && direction != "gateway-to-node")
      throw ConfigError(r.where("direction") + " must be 'node-to-gateway' or 'gateway-to-node'");
    const auto want = direction == "node-to-gateway" ? FlowDirection::NodeToGateway : FlowDirection::GatewayToNode;
    if (find_scheme(c.scheme).direction != want)
      throw ConfigError(r.where("direction") + " contradicts scheme '" + c.scheme + "'");
  }
  return c;
}

inline ScenarioFile parse_scenario_json(const json& j) {
  ScenarioFile f;
  f.base = parse_config_object(j);
  if (auto it = j.find("sweep"); it != j.end()) {
    f.has_sweep = true;
    detail::ObjectReader r(*it, "sweep");
    r.get("schemes", f.sweep.schemes);
    r.get("n_nodes", f.sweep.n_nodes);
    r.get("content_interval_mean", f.sweep.intervals);
    r.get("retransmissions", f.sweep.retransmissions);
    r.finish();
  }
  return f;
}

inline ScenarioFile load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
  return parse_scenario_json(j);
}

// ---------------------------------------------------------------------------
// runs

/// One grid cell with its seed list.
struct Job {
  ScenarioConfig cfg;
  std::uint64_t seed = 0;
};

/// Cross product in the fixed order scheme, size, interval, retransmissions,
/// then seeds seed..seed+replications-1. Every cell is validated up front.
inline std::vector<ScenarioConfig> expand_grid(const ScenarioConfig& base, const SweepAxes& axes) {
  auto schemes = axes.schemes.empty() ? std::vector<std::string>{base.scheme} : axes.schemes;
  auto sizes = axes.n_nodes.empty() ? std::vector<int>{base.n_nodes} : axes.n_nodes;
  auto intervals = axes.intervals.empty() ? std::vector<Seconds>{base.interval} : axes.intervals;
  auto retx = axes.retransmissions.empty() ? std::vector<bool>{base.retx.enabled} : axes.retransmissions;
  std::vector<ScenarioConfig> cells;
  for (const auto& s : schemes)
    for (int n : sizes)
      for (Seconds iv : intervals)
        for (bool rx : retx) {
          ScenarioConfig c = base;
          c.scheme = s;
          c.n_nodes = n;
          c.interval = iv;
          c.retx.enabled = rx;
          if (axes.retransmissions.size() > 1) c.name = base.name + (rx ? "/retx" : "/no-retx");
          c.validate();
          cells.push_back(std::move(c));
        }
  return cells;
}

inline std::vector<Job> expand_jobs(const std::vector<ScenarioConfig>& cells) {
  std::vector<Job> jobs;
  for (const auto& c : cells)
    for (int k = 0; k < c.replications; ++k) jobs.push_back({c, c.seed + static_cast<std::uint64_t>(k)});
  return jobs;
}

/// Runs every job; results keep job order whatever the worker count.
inline std::vector<RunResult> run_jobs(const std::vector<Job>& jobs, unsigned workers = 1) {
  std::vector<RunResult> out(jobs.size());
  if (workers <= 1 || jobs.size() <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = run_once(jobs[i].cfg, jobs[i].seed);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      try {
        out[i] = run_once(jobs[i].cfg, jobs[i].seed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n = std::min<std::size_t>(workers, jobs.size());
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// All replications of one scenario.
inline std::vector<RunResult> run_scenario(const ScenarioConfig& cfg, unsigned workers = 1) {
  cfg.validate();
  return run_jobs(expand_jobs({cfg}), workers);
}

inline std::vector<RunResult> sweep(const ScenarioConfig& base, const SweepAxes& axes, unsigned workers = 1) {
  return run_jobs(expand_jobs(expand_grid(base, axes)), workers);
}

// ---------------------------------------------------------------------------
// pooled statistics

struct Pooled {
  std::uint64_t produced = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t pending = 0;
  Seconds latency_sum = 0.0;
  Seconds max_latency = 0.0;
  int runs = 0;
  int not_operable = 0;

  double success_pct() const { return produced ? 100.0 * static_cast<double>(delivered) / static_cast<double>(produced) : 0.0; }
  double loss_pct() const { return produced ? 100.0 * static_cast<double>(lost) / static_cast<double>(produced) : 0.0; }
  Seconds avg_latency() const { return delivered ? latency_sum / static_cast<double>(delivered) : 0.0; }
};

inline Pooled pool(const std::vector<RunResult>& runs) {
  Pooled p;
  for (const auto& r : runs) {
    ++p.runs;
    if (!r.operable) {
      ++p.not_operable;
      continue;
    }
    p.produced += r.produced;
    p.delivered += r.delivered;
    p.lost += r.lost;
    p.pending += r.pending;
    p.latency_sum += r.avg_latency * static_cast<double>(r.delivered);
    p.max_latency = std::max(p.max_latency, r.max_latency);
  }
  return p;
}

// ---------------------------------------------------------------------------
// outputs

inline const char* kCsvHeader =
    "scenario,scheme,n_nodes,interval_s,seed,produced,delivered,lost,pending,avg_latency_s,max_latency_s,"
    "loss_pct,radio_on_s_mean,queue_drops,duty_denials,status";

namespace detail {

inline std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string csv_row(const RunResult& r) {
  using detail::fmt;
  std::ostringstream os;
  os << detail::csv_field(r.scenario) << ',' << r.scheme << ',' << r.n_nodes << ',' << fmt(r.interval, 3) << ','
     << r.seed << ',' << r.produced << ',' << r.delivered << ',' << r.lost << ',' << r.pending << ','
     << fmt(r.avg_latency) << ',' << fmt(r.max_latency) << ',' << fmt(r.loss_pct) << ',' << fmt(r.radio_on_mean)
     << ',' << r.queue_drops << ',' << r.duty_denials << ',' << (r.operable ? "ok" : "not-operable");
  return os.str();
}

inline void write_csv(std::ostream& os, const std::vector<RunResult>& runs) {
  os << kCsvHeader << '\n';
  for (const auto& r : runs) os << csv_row(r) << '\n';
}

/// One JSON object per transaction, preceded by nothing; runs in order.
inline void write_jsonl(std::ostream& os, const std::vector<RunResult>& runs) {
  for (const auto& r : runs) {
    for (const auto& t : r.transactions) {
      json j{{"scenario", r.scenario},
             {"scheme", r.scheme},
             {"n_nodes", r.n_nodes},
             {"interval_s", r.interval},
             {"seed", r.seed},
             {"id", t.id},
             {"node", t.node},
             {"name", t.name},
             {"created_at", t.created_at},
             {"first_tx_at", t.first_tx_at ? json(*t.first_tx_at) : json(nullptr)},
             {"completed_at", t.completed_at ? json(*t.completed_at) : json(nullptr)},
             {"latency_s", t.latency() ? json(*t.latency()) : json(nullptr)},
             {"retransmissions", t.retransmissions},
             {"outcome", to_string(t.outcome)},
             {"measured", t.measured}};
      os << j.dump() << '\n';
    }
  }
}

struct CdfPoint {
  Seconds time = 0.0;
  double fraction = 0.0;
};

/// Fraction of measured transactions completed within each latency. Lost and
/// pending ones never complete, so the curve ends at the success ratio.
inline std::vector<CdfPoint> completion_cdf(const std::vector<RunResult>& runs) {
  std::vector<Seconds> lat;
  std::size_t total = 0;
  for (const auto& r : runs)
    for (const auto& t : r.transactions) {
      if (!t.measured) continue;
      ++total;
      if (t.outcome == Outcome::Delivered) lat.push_back(*t.latency());
    }
  std::vector<CdfPoint> out;
  if (total == 0) return out;
  std::sort(lat.begin(), lat.end());
  for (std::size_t i = 0; i < lat.size(); ++i) {
    if (i + 1 < lat.size() && lat[i + 1] == lat[i]) continue;
    out.push_back({lat[i], static_cast<double>(i + 1) / static_cast<double>(total)});
  }
  return out;
}

inline void write_cdf_csv(std::ostream& os, const std::vector<CdfPoint>& cdf) {
  os << "latency_s,fraction\n";
  for (const auto& p : cdf) os << detail::fmt(p.time) << ',' << detail::fmt(p.fraction, 6) << '\n';
}

}  // namespace loraicn
