#pragma once

// NDN-style forwarding plane: names, messages, PIT/CS/FIB and the Interest /
// Data pipelines, extended with unsolicited Data (push) and Indication.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "loraicn/sim_core.hpp"

namespace loraicn::icn {

class EncodeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Name {
 public:
  Name() = default;
  explicit Name(std::vector<std::string> components) : components_(std::move(components)) {}

  /// Parses "/a/b/c". The root "/" parses to the empty name.
  static Name parse(std::string_view uri) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : uri) {
      if (c == '/') {
        if (!cur.empty()) parts.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return Name(std::move(parts));
  }

  const std::vector<std::string>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  bool empty() const { return components_.empty(); }

  Name prefix(std::size_t n) const {
    return Name({components_.begin(), components_.begin() + static_cast<std::ptrdiff_t>(std::min(n, size()))});
  }

  Name append(std::string component) const {
    Name n = *this;
    n.components_.push_back(std::move(component));
    return n;
  }

  bool is_prefix_of(const Name& other) const {
    if (size() > other.size()) return false;
    return std::equal(components_.begin(), components_.end(), other.components_.begin());
  }

  /// Modeled on-wire length: one length byte plus the bytes of each component.
  int encoded_size() const {
    int n = 0;
    for (const auto& c : components_) n += 1 + static_cast<int>(c.size());
    return n;
  }

  std::string to_uri() const {
    if (components_.empty()) return "/";
    std::string s;
    for (const auto& c : components_) s += "/" + c;
    return s;
  }

  friend bool operator==(const Name& a, const Name& b) { return a.components_ == b.components_; }
  friend bool operator<(const Name& a, const Name& b) { return a.components_ < b.components_; }

 private:
  std::vector<std::string> components_;
};

using FaceId = int;
inline constexpr FaceId kNoFace = -1;

struct Interest {
  Name name;
  Seconds lifetime = 4.0;
  std::uint32_t nonce = 0;
};

struct Data {
  Name name;
  int payload_size = 0;
  Seconds freshness = 300.0;
  bool unsolicited = false;
};

enum class NackReason { NoRoute, NoContent };

struct Nack {
  Name name;
  NackReason reason = NackReason::NoRoute;
};

struct Indication {
  Name name;
};

using Message = std::variant<Interest, Data, Nack, Indication>;

inline const Name& name_of(const Message& m) {
  return std::visit([](const auto& x) -> const Name& { return x.name; }, m);
}

/// Size model for a compressed ICN message.
inline int modeled_size(const Message& m) {
  return std::visit(
      [](const auto& x) -> int {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Interest>) return 2 + x.name.encoded_size();
        else if constexpr (std::is_same_v<T, Data>) return 4 + x.name.encoded_size() + x.payload_size;
        else if constexpr (std::is_same_v<T, Nack>) return 3 + x.name.encoded_size();
        else return 2 + x.name.encoded_size();
      },
      m);
}

inline const char* type_name(const Message& m) {
  switch (m.index()) {
    case 0: return "interest";
    case 1: return "data";
    case 2: return "nack";
    default: return "indication";
  }
}

using Bundle = std::vector<Message>;

inline int bundle_size(const Bundle& b) {
  int n = 0;
  for (const auto& m : b) n += modeled_size(m);
  return n;
}

/// Greedy first-fit packing of messages into frames of at most `max_payload`
/// bytes and at most `max_items` messages each.
inline std::vector<Bundle> encode_bundle(const std::vector<Message>& messages, int max_payload,
                                         int max_items = std::numeric_limits<int>::max()) {
  std::vector<Bundle> frames;
  std::vector<int> used;
  for (const auto& m : messages) {
    const int sz = modeled_size(m);
    if (sz > max_payload)
      throw EncodeError(name_of(m).to_uri() + " needs " + std::to_string(sz) +
                        " bytes, frame budget is " + std::to_string(max_payload));
    bool placed = false;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (used[i] + sz <= max_payload && static_cast<int>(frames[i].size()) < max_items) {
        frames[i].push_back(m);
        used[i] += sz;
        placed = true;
        break;
      }
    }
    if (!placed) {
      frames.push_back({m});
      used.push_back(sz);
    }
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Tables

struct InRecord {
  FaceId face = kNoFace;
  std::uint32_t nonce = 0;
};

struct PitEntry {
  Name name;
  std::vector<InRecord> in_records;
  Seconds expiry = 0.0;

  bool has_face(FaceId f) const {
    return std::any_of(in_records.begin(), in_records.end(),
                       [f](const InRecord& r) { return r.face == f; });
  }
};

class Pit {
 public:
  PitEntry* find(const Name& name) {
    auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
  }

  PitEntry& insert(const Name& name) {
    auto& e = entries_[name];
    e.name = name;
    return e;
  }

  void erase(const Name& name) { entries_.erase(name); }

  /// Entries whose name is a prefix of (or equal to) `data_name`.
  std::vector<Name> matching(const Name& data_name) const {
    std::vector<Name> out;
    for (std::size_t n = 0; n <= data_name.size(); ++n) {
      Name p = data_name.prefix(n);
      if (entries_.count(p)) out.push_back(std::move(p));
    }
    return out;
  }

  std::vector<PitEntry> expire(Seconds now) {
    std::vector<PitEntry> out;
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->second.expiry <= now) {
        out.push_back(std::move(it->second));
        it = entries_.erase(it);
      } else {
        ++it;
      }
    }
    return out;
  }

  std::size_t size() const { return entries_.size(); }
  const std::map<Name, PitEntry>& entries() const { return entries_; }

 private:
  std::map<Name, PitEntry> entries_;
};

struct CsEntry {
  Data data;
  Seconds stored_at = 0.0;
  Seconds ttl = 300.0;

  bool fresh(Seconds now) const { return now < stored_at + ttl; }
};

/// LRU content store that never serves expired entries.
class ContentStore {
 public:
  explicit ContentStore(std::size_t capacity = 64) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return index_.size(); }

  void insert(const Data& data, Seconds now, Seconds ttl) {
    if (capacity_ == 0) return;
    if (auto it = index_.find(data.name); it != index_.end()) {
      lru_.erase(it->second.second);
      index_.erase(it);
    }
    lru_.push_front(data.name);
    index_.emplace(data.name, std::make_pair(CsEntry{data, now, ttl}, lru_.begin()));
    while (index_.size() > capacity_) {
      index_.erase(lru_.back());
      lru_.pop_back();
    }
  }

  /// Fresh entry whose name has `name` as prefix; refreshes recency on hit.
  std::optional<Data> lookup(const Name& name, Seconds now) {
    for (auto it = index_.lower_bound(name); it != index_.end() && name.is_prefix_of(it->first); ++it) {
      if (it->second.first.fresh(now)) {
        lru_.erase(it->second.second);
        lru_.push_front(it->first);
        it->second.second = lru_.begin();
        return it->second.first.data;
      }
    }
    return std::nullopt;
  }

  std::size_t expire(Seconds now) {
    std::size_t n = 0;
    for (auto it = index_.begin(); it != index_.end();) {
      if (!it->second.first.fresh(now)) {
        lru_.erase(it->second.second);
        it = index_.erase(it);
        ++n;
      } else {
        ++it;
      }
    }
    return n;
  }

 private:
  std::size_t capacity_;
  std::list<Name> lru_;
  std::map<Name, std::pair<CsEntry, std::list<Name>::iterator>> index_;
};

struct FibEntry {
  Name prefix;
  FaceId face = kNoFace;
  Seconds expiry = std::numeric_limits<Seconds>::infinity();
};

class Fib {
 public:
  void insert(const Name& prefix, FaceId face, Seconds expiry) {
    entries_[prefix] = FibEntry{prefix, face, expiry};
  }

  void erase(const Name& prefix) { entries_.erase(prefix); }

  /// Longest-prefix match among non-expired entries.
  std::optional<FibEntry> lookup(const Name& name, Seconds now) const {
    for (std::size_t n = name.size() + 1; n-- > 0;) {
      auto it = entries_.find(name.prefix(n));
      if (it != entries_.end() && now < it->second.expiry) return it->second;
    }
    return std::nullopt;
  }

  std::vector<FibEntry> expire(Seconds now) {
    std::vector<FibEntry> out;
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->second.expiry <= now) {
        out.push_back(it->second);
        it = entries_.erase(it);
      } else {
        ++it;
      }
    }
    return out;
  }

  std::size_t size() const { return entries_.size(); }

  std::size_t live(Seconds now) const {
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
        [now](const auto& kv) { return now < kv.second.expiry; }));
  }

 private:
  std::map<Name, FibEntry> entries_;
};

// ---------------------------------------------------------------------------
// Forwarder

enum class InterestVerdict { ReplyFromCs, Aggregated, Forward, NackNoRoute, DropDuplicate };

struct InterestAction {
  InterestVerdict verdict = InterestVerdict::DropDuplicate;
  std::optional<Data> data;  // ReplyFromCs
  FaceId out_face = kNoFace;  // Forward
  Nack nack;                 // NackNoRoute
};

enum class DataVerdict { ConsumePit, CacheUnsolicited, Drop };

struct DataAction {
  DataVerdict verdict = DataVerdict::Drop;
  std::vector<FaceId> faces;  // ConsumePit: downstream faces, in arrival order
};

struct ExpiredReport {
  std::vector<PitEntry> pit;
  std::size_t cs = 0;
  std::vector<FibEntry> fib;
};

struct ForwarderConfig {
  std::size_t cs_capacity = 64;
  Seconds cs_ttl = 300.0;
  Seconds dead_nonce_lifetime = 600.0;
};

struct ForwarderCounters {
  std::uint64_t interests_in = 0;
  std::uint64_t interests_forwarded = 0;
  std::uint64_t aggregated = 0;
  std::uint64_t cs_hits = 0;
  std::uint64_t nacks = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t data_in = 0;
  std::uint64_t data_delivered = 0;  // per downstream face
  std::uint64_t data_dropped = 0;
  std::uint64_t unsolicited_cached = 0;
};

class Forwarder {
 public:
  explicit Forwarder(ForwarderConfig cfg = {}) : cfg_(cfg), cs_(cfg.cs_capacity) {}

  Pit& pit() { return pit_; }
  ContentStore& cs() { return cs_; }
  Fib& fib() { return fib_; }
  const Fib& fib() const { return fib_; }
  const ForwarderCounters& counters() const { return counters_; }
  const ForwarderConfig& config() const { return cfg_; }

  /// CS first, then PIT aggregation, then FIB longest-prefix match.
  /// A new nonce from a face already recorded in the PIT entry is a consumer
  /// retransmission and is forwarded again.
  InterestAction process_interest(const Interest& interest, FaceId in_face, Seconds now) {
    ++counters_.interests_in;
    InterestAction act;
    prune_dead_nonces(now);
    const auto key = std::make_pair(interest.name, interest.nonce);
    if (dead_nonces_.count(key)) {
      ++counters_.duplicates;
      act.verdict = InterestVerdict::DropDuplicate;
      return act;
    }
    if (auto d = cs_.lookup(interest.name, now)) {
      ++counters_.cs_hits;
      remember_nonce(interest, now);
      act.verdict = InterestVerdict::ReplyFromCs;
      act.data = *d;
      return act;
    }
    if (PitEntry* e = pit_.find(interest.name); e && e->expiry > now) {
      remember_nonce(interest, now);
      if (e->has_face(in_face)) {
        for (auto& r : e->in_records)
          if (r.face == in_face) r.nonce = interest.nonce;
        e->expiry = std::max(e->expiry, now + interest.lifetime);
        auto route = fib_.lookup(interest.name, now);
        if (!route) return nack(interest, act);
        ++counters_.interests_forwarded;
        act.verdict = InterestVerdict::Forward;
        act.out_face = route->face;
        return act;
      }
      e->in_records.push_back({in_face, interest.nonce});
      e->expiry = std::max(e->expiry, now + interest.lifetime);
      ++counters_.aggregated;
      act.verdict = InterestVerdict::Aggregated;
      return act;
    }
    auto route = fib_.lookup(interest.name, now);
    if (!route) return nack(interest, act);
    remember_nonce(interest, now);
    PitEntry& e = pit_.insert(interest.name);
    e.in_records = {{in_face, interest.nonce}};
    e.expiry = now + interest.lifetime;
    ++counters_.interests_forwarded;
    act.verdict = InterestVerdict::Forward;
    act.out_face = route->face;
    return act;
  }

  DataAction process_data(const Data& data, FaceId in_face, Seconds now) {
    ++counters_.data_in;
    DataAction act;
    std::vector<FaceId> faces;
    for (const Name& n : pit_.matching(data.name)) {
      PitEntry* e = pit_.find(n);
      if (e->expiry > now) {
        for (const auto& r : e->in_records)
          if (r.face != in_face && std::find(faces.begin(), faces.end(), r.face) == faces.end())
            faces.push_back(r.face);
      }
      pit_.erase(n);
    }
    if (!faces.empty()) {
      cs_.insert(data, now, cfg_.cs_ttl);
      counters_.data_delivered += faces.size();
      act.verdict = DataVerdict::ConsumePit;
      act.faces = std::move(faces);
      return act;
    }
    if (data.unsolicited && fib_.lookup(data.name, now) && !fib_.lookup(data.name, now)->prefix.empty()) {
      cs_.insert(data, now, cfg_.cs_ttl);
      ++counters_.unsolicited_cached;
      act.verdict = DataVerdict::CacheUnsolicited;
      return act;
    }
    ++counters_.data_dropped;
    act.verdict = DataVerdict::Drop;
    return act;
  }

  ExpiredReport expire_tables(Seconds now) {
    ExpiredReport r;
    r.pit = pit_.expire(now);
    r.cs = cs_.expire(now);
    r.fib = fib_.expire(now);
    return r;
  }

 private:
  InterestAction& nack(const Interest& interest, InterestAction& act) {
    ++counters_.nacks;
    act.verdict = InterestVerdict::NackNoRoute;
    act.nack = Nack{interest.name, NackReason::NoRoute};
    return act;
  }

  void remember_nonce(const Interest& i, Seconds now) {
    dead_nonces_.insert({i.name, i.nonce});
    nonce_expiry_.emplace(now + cfg_.dead_nonce_lifetime, std::make_pair(i.name, i.nonce));
  }

  void prune_dead_nonces(Seconds now) {
    while (!nonce_expiry_.empty() && nonce_expiry_.begin()->first <= now) {
      dead_nonces_.erase(nonce_expiry_.begin()->second);
      nonce_expiry_.erase(nonce_expiry_.begin());
    }
  }

  ForwarderConfig cfg_;
  Pit pit_;
  ContentStore cs_;
  Fib fib_;
  ForwarderCounters counters_;
  std::set<std::pair<Name, std::uint32_t>> dead_nonces_;
  std::multimap<Seconds, std::pair<Name, std::uint32_t>> nonce_expiry_;
};

}  // namespace loraicn::icn
