#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "loraicn/phy_lora.hpp"

using namespace loraicn;

namespace {

// Independent airtime oracle written from the transceiver datasheet, in
// symbol counts rather than the library's expression.
double datasheet_airtime(int pl, int sf, double bw, int cr, bool ldro) {
  const double tsym = std::pow(2.0, sf) / bw;
  const double preamble = (8 + 4.25) * tsym;
  const int de = ldro ? 1 : 0;
  const double bits = 8.0 * pl - 4.0 * sf + 28 + 16;
  int blocks = static_cast<int>(std::ceil(bits / (4.0 * (sf - 2 * de))));
  if (blocks < 0) blocks = 0;
  return preamble + (8 + blocks * (cr + 4)) * tsym;
}

PhyConfig sf(int s) {
  PhyConfig p;
  p.sf = s;
  return p;
}

}  // namespace

TEST(Airtime, FiftyBytesAtSf12TakeAboutTwoPointThreeSeconds) {
  const double t = time_on_air(50, sf(12));
  EXPECT_GT(t, 2.30 * 0.98);
  EXPECT_LT(t, 2.30 * 1.02);
}

TEST(Airtime, LdroForcedAtLongSymbols) {
  EXPECT_TRUE(sf(12).effective_ldro());
  EXPECT_TRUE(sf(11).effective_ldro());
  EXPECT_FALSE(sf(10).effective_ldro());
}

TEST(Airtime, MatchesDatasheetOracle) {
  EXPECT_NEAR(time_on_air(127, sf(7)), datasheet_airtime(127, 7, 125000, 1, false), 1e-12);
  EXPECT_NEAR(time_on_air(127, sf(7)), 0.21, 0.01);
  for (int s = 7; s <= 12; ++s)
    for (int pl : {0, 1, 13, 50, 100, 255})
      EXPECT_NEAR(time_on_air(pl, sf(s)), datasheet_airtime(pl, s, 125000, 1, s >= 11), 1e-12) << s << " " << pl;
}

TEST(Airtime, EmptyPayloadStillCostsPreambleAndHeader) {
  EXPECT_GT(time_on_air(0, sf(7)), (8 + 4.25) * sf(7).symbol_time());
}

TEST(Airtime, MonotoneInPayloadAndSpreadingFactor) {
  for (int s = 7; s <= 12; ++s)
    for (int pl = 1; pl <= 255; ++pl) {
      EXPECT_LE(time_on_air(pl - 1, sf(s)), time_on_air(pl, sf(s)));
      if (s > 7) {
        EXPECT_LE(time_on_air(pl, sf(s - 1)), time_on_air(pl, sf(s)));
      }
    }
}

TEST(Airtime, RejectsInvalidParameters) {
  EXPECT_THROW(time_on_air(256, sf(7)), ConfigError);
  EXPECT_THROW(time_on_air(-1, sf(7)), ConfigError);
  EXPECT_THROW(time_on_air(10, sf(6)), ConfigError);
  PhyConfig p;
  p.bw = 200000;
  EXPECT_THROW(time_on_air(10, p), ConfigError);
  p = PhyConfig{};
  p.cr = 5;
  EXPECT_THROW(time_on_air(10, p), ConfigError);
}

TEST(Medium, OverlapOnSameChannelDoomsBoth) {
  Simulator sim;
  Medium<int> m(sim, 2);
  std::vector<bool> ok;
  auto h = [&](const Transmission<int>&, bool d) { ok.push_back(d); };
  sim.schedule(0.0, "a", 1, [&] { m.transmit(1, 0, 1.0, 0, h); });
  sim.schedule(0.5, "b", 2, [&] { m.transmit(2, 0, 1.0, 0, h); });
  sim.run_until(5.0);
  EXPECT_EQ(ok, (std::vector<bool>{false, false}));
  EXPECT_EQ(m.collided(), 2u);
}

TEST(Medium, DifferentChannelsDoNotInteract) {
  Simulator sim;
  Medium<int> m(sim, 2);
  int delivered = 0;
  auto h = [&](const Transmission<int>&, bool d) { delivered += d; };
  sim.schedule(0.0, "a", 1, [&] { m.transmit(1, 0, 1.0, 0, h); });
  sim.schedule(0.5, "b", 2, [&] { m.transmit(2, 1, 1.0, 0, h); });
  sim.run_until(5.0);
  EXPECT_EQ(delivered, 2);
}

TEST(Medium, BackToBackFramesDoNotCollide) {
  Simulator sim;
  Medium<int> m(sim, 1);
  int delivered = 0;
  auto h = [&](const Transmission<int>&, bool d) { delivered += d; };
  sim.schedule(0.0, "a", 1, [&] { m.transmit(1, 0, 1.0, 0, h); });
  sim.schedule(1.0, "b", 2, [&] { m.transmit(2, 0, 1.0, 0, h); });
  sim.run_until(5.0);
  EXPECT_EQ(delivered, 2);
}

TEST(Medium, CadSeesOnlyItsChannel) {
  Simulator sim;
  Medium<int> m(sim, 2);
  EXPECT_FALSE(m.cad_busy(0, 0.0));
  sim.schedule(0.0, "a", 1, [&] { m.transmit(1, 0, 1.0, 0, nullptr); });
  sim.run_until(0.5);
  EXPECT_TRUE(m.cad_busy(0, 0.5));
  EXPECT_FALSE(m.cad_busy(1, 0.5));
  sim.run_until(2.0);
  EXPECT_FALSE(m.cad_busy(0, 2.0));
}

TEST(Medium, SenderCannotTransmitTwiceOnAChannel) {
  Simulator sim;
  Medium<int> m(sim, 1);
  m.transmit(1, 0, 1.0, 0, nullptr);
  EXPECT_THROW(m.transmit(1, 0, 1.0, 0, nullptr), SimulationError);
  EXPECT_THROW(m.transmit(2, 3, 1.0, 0, nullptr), SimulationError);
}

// Ten independent Poisson senders: a frame survives iff no other sender
// starts within one frame time either side, so the loss is
// 1 - exp(-2 (N-1) lambda d).
TEST(Medium, PureAlohaLossMatchesClosedForm) {
  Simulator sim;
  Medium<int> m(sim, 1);
  const int senders = 10;
  const double lambda = 0.1, d = 0.1;
  const double horizon = 100000.0;
  std::uint64_t sent = 0, lost = 0;
  for (int s = 1; s <= senders; ++s) {
    RngStream rng(11, "aloha/" + std::to_string(s));
    for (double t = draw_exponential(rng, 1.0 / lambda); t < horizon; t += draw_exponential(rng, 1.0 / lambda)) {
      sim.schedule(t, "tx", static_cast<NodeId>(s), [&, s] {
        if (m.is_transmitting(static_cast<NodeId>(s), 0)) return;
        m.transmit(static_cast<NodeId>(s), 0, d, 0, [&](const Transmission<int>&, bool ok) {
          ++sent;
          lost += !ok;
        });
      });
    }
  }
  sim.run_until(horizon + 1.0);
  ASSERT_GT(sent, 90000u);
  const double expected = 1.0 - std::exp(-2.0 * (senders - 1) * lambda * d);
  EXPECT_NEAR(static_cast<double>(lost) / static_cast<double>(sent), expected, 0.03 * expected);
}

TEST(DutyCycle, FreshLedgerAdmitsShortFrame) {
  DutyCycleLedger l;
  EXPECT_TRUE(l.permit(1, 0, 0.01, 2.3, 0.0).allowed);
}

TEST(DutyCycle, OnePercentAdmitsFifteenSf12FramesPerHour) {
  DutyCycleLedger l(3600.0);
  const double toa = time_on_air(50, sf(12));
  int admitted = 0;
  double t = 0.0;
  while (t < 3600.0 - toa) {
    if (l.permit(1, 0, 0.01, toa, t).allowed) ++admitted;
    t += toa;
  }
  EXPECT_EQ(admitted, static_cast<int>(std::floor(36.0 / 2.3)));
}

TEST(DutyCycle, DeniedResultNamesEarliestAdmission) {
  DutyCycleLedger l(100.0);
  ASSERT_TRUE(l.permit(1, 0, 0.1, 10.0, 0.0).allowed);
  const auto d = l.permit(1, 0, 0.1, 1.0, 20.0);
  ASSERT_FALSE(d.allowed);
  // the first frame leaves the window ending at t+1 once t+1-100 >= 1
  EXPECT_NEAR(d.next_allowed_at, 100.0, 1e-3);
  EXPECT_FALSE(l.permit(1, 0, 0.1, 1.0, d.next_allowed_at - 0.01).allowed);
  EXPECT_TRUE(l.permit(1, 0, 0.1, 1.0, d.next_allowed_at).allowed);
}

TEST(DutyCycle, BandsAndNodesAreIndependent) {
  DutyCycleLedger l(100.0);
  ASSERT_TRUE(l.permit(1, 0, 0.1, 10.0, 0.0).allowed);
  EXPECT_TRUE(l.permit(1, 1, 0.1, 10.0, 0.0).allowed);
  EXPECT_TRUE(l.permit(2, 0, 0.1, 10.0, 0.0).allowed);
  EXPECT_FALSE(l.permit(1, 0, 0.1, 1.0, 11.0).allowed);
}

TEST(DutyCycle, OverlappingRequestIsAnError) {
  DutyCycleLedger l(100.0);
  ASSERT_TRUE(l.permit(1, 0, 0.1, 2.0, 0.0).allowed);
  EXPECT_THROW(l.permit(1, 0, 0.1, 1.0, 1.0), SimulationError);
  EXPECT_TRUE(l.permit(1, 0, 0.1, 1.0, 2.0).allowed);
}

TEST(DutyCycle, FrameLongerThanBudgetNeverAdmitted) {
  DutyCycleLedger l(100.0);
  const auto d = l.permit(1, 0, 0.01, 2.0, 0.0);
  EXPECT_FALSE(d.allowed);
  EXPECT_TRUE(std::isinf(d.next_allowed_at));
}

// Property: whatever the request pattern, every window holds at most limit*W.
TEST(DutyCycle, WindowSafetyUnderRandomRequests) {
  for (int trial = 0; trial < 200; ++trial) {
    RngStream rng(static_cast<std::uint64_t>(trial), "ledger");
    const double window = rng.uniform(50.0, 500.0);
    const double limit = rng.uniform() < 0.5 ? 0.01 : 0.1;
    DutyCycleLedger l(window);
    std::vector<std::pair<double, double>> admitted;
    double t = 0.0;
    for (int i = 0; i < 300; ++i) {
      t += rng.uniform(0.0, window / 20.0);
      const double dur = rng.uniform(0.01, limit * window / 3.0);
      auto d = l.permit(3, 0, limit, dur, t);
      if (!d.allowed && std::isfinite(d.next_allowed_at) && rng.uniform() < 0.5) {
        ASSERT_GE(d.next_allowed_at, t);
        t = d.next_allowed_at;
        d = l.permit(3, 0, limit, dur, t);
        ASSERT_TRUE(d.allowed) << "trial " << trial;
      }
      if (d.allowed) {
        admitted.emplace_back(t, dur);
        t += dur;
      }
    }
    // the busiest window ends where some frame ends
    for (const auto& [s0, d0] : admitted) {
      const double w1 = s0 + d0, w0 = w1 - window;
      double sum = 0.0;
      for (const auto& [s, dur] : admitted) sum += std::max(0.0, std::min(s + dur, w1) - std::max(s, w0));
      ASSERT_LE(sum, limit * window + 1e-6) << "trial " << trial;
    }
  }
}
