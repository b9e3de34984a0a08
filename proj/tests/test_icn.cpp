#include <gtest/gtest.h>

#include <algorithm>

#include "loraicn/icn.hpp"

using namespace loraicn;
using namespace loraicn::icn;

namespace {

Name N(const char* s) { return Name::parse(s); }

Interest I(const char* s, std::uint32_t nonce, Seconds lifetime = 140.0) { return Interest{N(s), lifetime, nonce}; }

Forwarder gateway_like() {
  Forwarder f;
  f.fib().insert(N("/inet"), 0, 1e9);
  f.fib().insert(N("/lora/n001"), 1, 3600.0);
  return f;
}

}  // namespace

TEST(Name, ParseAndPrint) {
  EXPECT_EQ(N("/a/b/c").size(), 3u);
  EXPECT_EQ(N("/a//b/").to_uri(), "/a/b");
  EXPECT_TRUE(N("/").empty());
  EXPECT_EQ(N("/").to_uri(), "/");
  EXPECT_TRUE(N("/a").is_prefix_of(N("/a/b")));
  EXPECT_FALSE(N("/a/b").is_prefix_of(N("/a")));
  EXPECT_TRUE(N("/").is_prefix_of(N("/a")));
  EXPECT_EQ(N("/lora/n001/t/001").encoded_size(), 16);
}

TEST(Encode, FiveInterestsFitOneFrame) {
  std::vector<Message> ms(5, I("/lora/n001/t/001", 1));
  EXPECT_EQ(modeled_size(ms[0]), 18);
  const auto frames = encode_bundle(ms, 100);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(bundle_size(frames[0]), 90);
}

TEST(Encode, SevenInterestsNeedTwoFrames) {
  std::vector<Message> ms(7, I("/lora/n001/t/001", 1));
  const auto frames = encode_bundle(ms, 100);
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0].size(), 5u);
  EXPECT_EQ(frames[1].size(), 2u);
}

TEST(Encode, EmptyListGivesNoFrames) { EXPECT_TRUE(encode_bundle({}, 100).empty()); }

TEST(Encode, ItemCapLimitsDataPerFrame) {
  std::vector<Message> ms;
  for (int k = 0; k < 8; ++k) ms.emplace_back(Data{N("/i").append(std::to_string(k)), 2, 300.0, false});
  const auto frames = encode_bundle(ms, 100, 6);
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0].size(), 6u);
  EXPECT_EQ(frames[1].size(), 2u);
}

TEST(Encode, OversizedMessageIsAnError) {
  std::vector<Message> ms{Data{N("/big"), 200, 300.0, false}};
  EXPECT_THROW(encode_bundle(ms, 100), EncodeError);
}

// Property: first-fit never exceeds the budget and keeps every message once.
TEST(Encode, FirstFitPreservesMessagesAndBudget) {
  RngStream rng(3, "encode");
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Message> ms;
    const int n = static_cast<int>(rng.uniform_int(0, 30));
    for (int k = 0; k < n; ++k)
      ms.emplace_back(Data{N("/x").append(std::to_string(k)), static_cast<int>(rng.uniform_int(0, 60)), 1.0, false});
    const int cap = static_cast<int>(rng.uniform_int(1, 8));
    const auto frames = encode_bundle(ms, 100, cap);
    std::size_t total = 0;
    for (const auto& f : frames) {
      EXPECT_LE(bundle_size(f), 100);
      EXPECT_LE(static_cast<int>(f.size()), cap);
      total += f.size();
    }
    EXPECT_EQ(total, ms.size());
  }
}

TEST(Forwarder, CsHitRepliesWithoutForwarding) {
  Forwarder f = gateway_like();
  f.cs().insert(Data{N("/inet/a"), 4, 300.0, false}, 0.0, 300.0);
  const auto act = f.process_interest(I("/inet/a", 1), 3, 1.0);
  EXPECT_EQ(act.verdict, InterestVerdict::ReplyFromCs);
  ASSERT_TRUE(act.data);
  EXPECT_EQ(act.data->name, N("/inet/a"));
  EXPECT_EQ(f.pit().find(N("/inet/a")), nullptr);
}

TEST(Forwarder, SameNameFromTwoFacesForwardsOnce) {
  Forwarder f = gateway_like();
  EXPECT_EQ(f.process_interest(I("/inet/a", 1), 3, 0.0).verdict, InterestVerdict::Forward);
  EXPECT_EQ(f.process_interest(I("/inet/a", 2), 4, 0.0).verdict, InterestVerdict::Aggregated);
  const auto* e = f.pit().find(N("/inet/a"));
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->in_records.size(), 2u);
  EXPECT_EQ(f.counters().interests_forwarded, 1u);
}

TEST(Forwarder, UnknownPrefixIsNacked) {
  Forwarder f;
  const auto act = f.process_interest(I("/x/y", 1), 2, 0.0);
  EXPECT_EQ(act.verdict, InterestVerdict::NackNoRoute);
  EXPECT_EQ(act.nack.reason, NackReason::NoRoute);
  EXPECT_EQ(f.pit().find(N("/x/y")), nullptr);
}

TEST(Forwarder, LongestPrefixWins) {
  Forwarder f;
  f.fib().insert(N("/"), 7, 1e9);
  f.fib().insert(N("/a"), 8, 1e9);
  f.fib().insert(N("/a/b"), 9, 1e9);
  EXPECT_EQ(f.process_interest(I("/a/b/c", 1), 1, 0.0).out_face, 9);
  EXPECT_EQ(f.process_interest(I("/a/c", 2), 1, 0.0).out_face, 8);
  EXPECT_EQ(f.process_interest(I("/z", 3), 1, 0.0).out_face, 7);
}

TEST(Forwarder, DuplicateNonceDropped) {
  Forwarder f = gateway_like();
  f.process_interest(I("/inet/a", 5), 3, 0.0);
  EXPECT_EQ(f.process_interest(I("/inet/a", 5), 4, 1.0).verdict, InterestVerdict::DropDuplicate);
}

TEST(Forwarder, RetransmissionFromSameFaceIsForwardedAgain) {
  Forwarder f = gateway_like();
  f.process_interest(I("/inet/a", 5), 3, 0.0);
  const auto act = f.process_interest(I("/inet/a", 6), 3, 130.0);
  EXPECT_EQ(act.verdict, InterestVerdict::Forward);
  EXPECT_EQ(f.pit().find(N("/inet/a"))->in_records.size(), 1u);
}

TEST(Forwarder, DataFansOutAndConsumesPit) {
  Forwarder f = gateway_like();
  for (int face : {3, 4, 5}) f.process_interest(I("/inet/a", static_cast<std::uint32_t>(face)), face, 0.0);
  const auto act = f.process_data(Data{N("/inet/a"), 4, 300.0, false}, 0, 1.0);
  EXPECT_EQ(act.verdict, DataVerdict::ConsumePit);
  EXPECT_EQ(act.faces, (std::vector<FaceId>{3, 4, 5}));
  EXPECT_EQ(f.pit().find(N("/inet/a")), nullptr);
  EXPECT_EQ(f.process_data(Data{N("/inet/a"), 4, 300.0, false}, 0, 2.0).verdict, DataVerdict::Drop);
}

TEST(Forwarder, UnsolicitedDataUnderRegisteredPrefixIsCached) {
  Forwarder f = gateway_like();
  const auto act = f.process_data(Data{N("/lora/n001/t/001"), 10, 300.0, true}, 1, 5.0);
  EXPECT_EQ(act.verdict, DataVerdict::CacheUnsolicited);
  // an Internet consumer is then served from the custodian copy
  EXPECT_EQ(f.process_interest(I("/lora/n001/t/001", 9), 0, 6.0).verdict, InterestVerdict::ReplyFromCs);
}

TEST(Forwarder, UnsolicitedDataWithoutRegistrationIsDropped) {
  Forwarder f = gateway_like();
  EXPECT_EQ(f.process_data(Data{N("/lora/n002/t/001"), 10, 300.0, true}, 2, 5.0).verdict, DataVerdict::Drop);
  // solicited-looking Data without PIT state is dropped too
  EXPECT_EQ(f.process_data(Data{N("/lora/n001/t/001"), 10, 300.0, false}, 1, 5.0).verdict, DataVerdict::Drop);
}

TEST(Tables, PitEntryExpiresAtLifetime) {
  Forwarder f = gateway_like();
  f.process_interest(I("/inet/a", 1, 140.0), 3, 10.0);
  EXPECT_TRUE(f.expire_tables(149.9).pit.empty());
  const auto r = f.expire_tables(150.0);
  ASSERT_EQ(r.pit.size(), 1u);
  EXPECT_EQ(r.pit[0].name, N("/inet/a"));
  EXPECT_EQ(f.pit().find(N("/inet/a")), nullptr);
}

TEST(Tables, CsEntryMissesAfterTtl) {
  ContentStore cs(8);
  cs.insert(Data{N("/a/b"), 1, 300.0, false}, 0.0, 300.0);
  EXPECT_TRUE(cs.lookup(N("/a/b"), 299.0));
  EXPECT_FALSE(cs.lookup(N("/a/b"), 301.0));
}

TEST(Tables, CsEvictsLeastRecentlyUsed) {
  ContentStore cs(2);
  cs.insert(Data{N("/a"), 1, 300.0, false}, 0.0, 300.0);
  cs.insert(Data{N("/b"), 1, 300.0, false}, 1.0, 300.0);
  EXPECT_TRUE(cs.lookup(N("/a"), 2.0));
  cs.insert(Data{N("/c"), 1, 300.0, false}, 3.0, 300.0);
  EXPECT_TRUE(cs.lookup(N("/a"), 4.0));
  EXPECT_FALSE(cs.lookup(N("/b"), 4.0));
  EXPECT_TRUE(cs.lookup(N("/c"), 4.0));
}

TEST(Tables, ExpiredRegistrationMeansNoRoute) {
  Forwarder f = gateway_like();
  EXPECT_EQ(f.process_interest(I("/lora/n001/t/001", 1), 0, 3599.0).verdict, InterestVerdict::Forward);
  EXPECT_EQ(f.process_interest(I("/lora/n001/t/002", 2), 0, 3601.0).verdict, InterestVerdict::NackNoRoute);
}

// Property: PIT flow balance. Every forwarded Interest's entry is either
// satisfied by Data or expires; nothing is left once time passes every lifetime.
TEST(Forwarder, PitFlowBalance) {
  RngStream rng(9, "pit");
  Forwarder f = gateway_like();
  std::uint64_t created = 0, satisfied = 0, expired = 0;
  Seconds now = 0.0;
  for (int step = 0; step < 5000; ++step) {
    now += rng.uniform(0.0, 2.0);
    const auto name = N("/inet").append(std::to_string(rng.uniform_int(0, 40)));
    if (rng.uniform() < 0.6) {
      const bool existed = f.pit().find(name) && f.pit().find(name)->expiry > now;
      if (!existed) expired += f.expire_tables(now).pit.size();
      const auto act = f.process_interest(Interest{name, rng.uniform(1.0, 50.0), rng.u32()},
                                          static_cast<FaceId>(rng.uniform_int(1, 5)), now);
      if (act.verdict == InterestVerdict::Forward && !existed) ++created;
    } else {
      expired += f.expire_tables(now).pit.size();
      if (f.process_data(Data{name, 1, 0.5, false}, 0, now).verdict == DataVerdict::ConsumePit) ++satisfied;
    }
  }
  expired += f.expire_tables(now + 1000.0).pit.size();
  EXPECT_EQ(created, satisfied + expired);
  EXPECT_EQ(f.pit().size(), 0u);
}
