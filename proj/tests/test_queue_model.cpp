#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "loraicn/queue_model.hpp"

using namespace loraicn;
using namespace loraicn::queue;

namespace {

// For S' = max(S + A - 1, 0) with Poisson(a) arrivals, squaring the recursion
// and taking expectations gives E[S] = a^2 / (2 (1 - a)).
double closed_form_L_inf(double a) { return a * a / (2.0 * (1.0 - a)); }

Params params(double a) {
  Params p;
  p.T = 32.46;
  p.lambda = a / p.T;
  return p;
}

}  // namespace

TEST(QueueModel, ReferencePointWaitingTime) {
  Params p;
  p.lambda = 1.0 / 120.0;
  p.T = 32.46;
  const auto r = waiting_time(p);
  EXPECT_GE(r.L, 0.162);
  EXPECT_LE(r.L, 0.198);
  EXPECT_GE(r.W, 19.2);
  EXPECT_LE(r.W, 23.5);
  EXPECT_NEAR(r.W, r.L / p.lambda, 1e-9);
}

TEST(QueueModel, EmptyToEmptyProbability) {
  for (double a : {0.1, 0.27, 0.5, 0.8}) {
    const auto m = transition_matrix(params(a));
    EXPECT_NEAR(m(0, 0), std::exp(-a) * (1.0 + a), 1e-12);
  }
}

TEST(QueueModel, RowsAreStochastic) {
  const auto m = transition_matrix(params(0.6));
  for (int i = 0; i < m.n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < m.n; ++j) {
      EXPECT_GE(m(i, j), 0.0);
      sum += m(i, j);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(QueueModel, StationaryDistributionIsFixedPoint) {
  const auto m = transition_matrix(params(0.5));
  const auto pi = stationary_distribution(m, 1e-14, 1000000, nullptr);
  EXPECT_NEAR(std::accumulate(pi.begin(), pi.end(), 0.0), 1.0, 1e-12);
  for (int j = 0; j < m.n; ++j) {
    double v = 0.0;
    for (int i = 0; i < m.n; ++i) v += pi[static_cast<std::size_t>(i)] * m(i, j);
    EXPECT_NEAR(v, pi[static_cast<std::size_t>(j)], 1e-10);
  }
}

TEST(QueueModel, MatchesClosedFormMean) {
  for (double a : {0.05, 0.1, 0.27, 0.5, 0.8, 0.9}) {
    auto p = params(a);
    p.clip = 400;
    EXPECT_NEAR(waiting_time(p).L_inf, closed_form_L_inf(a), 1e-6 * std::max(1.0, closed_form_L_inf(a))) << a;
  }
}

TEST(QueueModel, MonteCarloAgreesWithChain) {
  for (double a : {0.27, 0.5}) {
    const auto p = params(a);
    const auto e = simulate_queue(p, 1000000, 5);
    const auto r = waiting_time(p);
    EXPECT_NEAR(e.L_inf, r.L_inf, 0.03 * r.L_inf) << a;
    EXPECT_NEAR(e.L, r.L, 0.03 * r.L) << a;
    EXPECT_NEAR(e.W, r.W, 0.03 * r.W) << a;
  }
}

TEST(QueueModel, WaitingGrowsWithLoad) {
  double prev = 0.0;
  for (double a = 0.05; a < 0.95; a += 0.05) {
    auto p = params(a);
    p.clip = 400;
    const double w = waiting_time(p).W;
    EXPECT_GT(w, prev);
    prev = w;
  }
}

TEST(QueueModel, RejectsUnstableOrInvalidParameters) {
  EXPECT_THROW(waiting_time(params(1.0)), ConfigError);
  EXPECT_THROW(waiting_time(params(1.5)), ConfigError);
  Params p;
  p.lambda = 0.0;
  EXPECT_THROW(waiting_time(p), ConfigError);
  p = Params{};
  p.T = -1.0;
  EXPECT_THROW(waiting_time(p), ConfigError);
}
