#include <gtest/gtest.h>

#include <sstream>
#include <vector>

#include "loraicn/sim_core.hpp"

using namespace loraicn;

TEST(Simulator, DispatchesInTimeOrder) {
  Simulator sim;
  std::vector<int> order;
  sim.schedule(1.0, "b", 0, [&] { order.push_back(2); });
  sim.schedule(0.5, "a", 0, [&] { order.push_back(1); });
  EXPECT_EQ(sim.run_until(10.0), 2u);
  EXPECT_EQ(order, (std::vector<int>{1, 2}));
}

TEST(Simulator, TiesBreakBySchedulingOrder) {
  Simulator sim;
  std::vector<int> order;
  for (int i = 0; i < 5; ++i) sim.schedule(5.0, "tie", 0, [&order, i] { order.push_back(i); });
  sim.run_until(5.0);
  EXPECT_EQ(order, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Simulator, CancelledEventNeverRuns) {
  Simulator sim;
  bool ran = false;
  auto h = sim.schedule(1.0, "x", 0, [&] { ran = true; });
  sim.schedule(2.0, "y", 0, [] {});
  sim.cancel(h);
  EXPECT_EQ(sim.run_until(3.0), 1u);
  EXPECT_FALSE(ran);
}

TEST(Simulator, EmptyQueueAdvancesClock) {
  Simulator sim;
  EXPECT_EQ(sim.run_until(100.0), 0u);
  EXPECT_DOUBLE_EQ(sim.now(), 100.0);
}

TEST(Simulator, OnlyEventsUpToHorizon) {
  Simulator sim;
  for (double t : {1.0, 2.0, 3.0, 4.5}) sim.schedule(t, "e", 0, [] {});
  EXPECT_EQ(sim.run_until(4.0), 3u);
  EXPECT_EQ(sim.run_until(5.0), 1u);
}

TEST(Simulator, RejectsPastEvents) {
  Simulator sim;
  sim.run_until(10.0);
  EXPECT_THROW(sim.schedule(5.0, "late", 0, [] {}), SimulationError);
  EXPECT_THROW(sim.run_until(1.0), SimulationError);
}

TEST(Simulator, EventsScheduledDuringDispatchRun) {
  Simulator sim;
  int count = 0;
  std::function<void()> tick = [&] {
    if (++count < 10) sim.schedule_in(1.0, "tick", 0, tick);
  };
  sim.schedule(0.0, "tick", 0, tick);
  sim.run_until(100.0);
  EXPECT_EQ(count, 10);
}

TEST(Simulator, TraceIsReproducible) {
  auto trace = [] {
    std::ostringstream os;
    Simulator sim;
    sim.set_trace(&os);
    RngStream rng(7, "trace");
    for (int i = 0; i < 50; ++i) sim.schedule(rng.uniform(0.0, 10.0), "e", static_cast<NodeId>(i % 3), [] {});
    sim.run_until(10.0);
    return os.str();
  };
  const auto a = trace();
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, trace());
}

TEST(RngStream, SameSeedAndNameRepeat) {
  RngStream a(42, "node/1"), b(42, "node/1");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.u32(), b.u32());
}

TEST(RngStream, DistinctNamesDiffer) {
  RngStream a(42, "node/1"), b(42, "node/2");
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.u32() == b.u32();
  EXPECT_LT(equal, 3);
}

TEST(RngStream, DistinctNamesUncorrelated) {
  RngStream a(3, "x"), b(3, "y");
  const int n = 100000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform(), y = b.uniform();
    sa += x, sb += y, sab += x * y, saa += x * x, sbb += y * y;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  EXPECT_LT(std::abs(corr), 0.02);
}

TEST(Exponential, SampleMeanWithinOnePercent) {
  RngStream rng(1, "exp");
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double x = draw_exponential(rng, 60.0);
    ASSERT_GT(x, 0.0);
    sum += x;
  }
  EXPECT_NEAR(sum / n, 60.0, 0.6);
}

TEST(Exponential, RejectsNonPositiveMean) {
  RngStream rng(1, "exp");
  EXPECT_THROW(draw_exponential(rng, 0.0), ConfigError);
  EXPECT_THROW(draw_exponential(rng, -1.0), ConfigError);
}
