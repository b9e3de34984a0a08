#pragma once

// Embedded Markov chain for CFP queueing: one GTS service per multi-superframe
// of length T, Poisson(lambda*T) arrivals per frame. The state is the queue
// length right after a service opportunity: S' = max(S + A - 1, 0).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "loraicn/sim_core.hpp"

namespace loraicn::queue {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Params {
  double lambda = 1.0 / 120.0;  // packets per second
  Seconds T = 32.46;            // multi-superframe duration
  int clip = 64;                // largest modeled queue length
  double tol = 1e-12;

  double utilization() const { return lambda * T; }

  void validate() const {
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!(T > 0.0)) throw ConfigError("T must be positive");
    if (clip < 1) throw ConfigError("clip must be at least 1");
    if (!(tol > 0.0)) throw ConfigError("tol must be positive");
    if (!(utilization() < 1.0))
      throw ConfigError("unstable queue: lambda*T = " + std::to_string(utilization()) + " >= 1");
  }
};

/// Row-major (clip+1)x(clip+1) stochastic matrix.
struct Matrix {
  int n = 0;
  std::vector<double> p;

  double operator()(int i, int j) const { return p[static_cast<std::size_t>(i) * n + j]; }
  double& operator()(int i, int j) { return p[static_cast<std::size_t>(i) * n + j]; }
};

struct StationaryResult {
  std::vector<double> pi;
  double L_inf = 0.0;  // mean queue length right after a service opportunity
  double L = 0.0;      // mean queue length seen over time
  Seconds W = 0.0;     // mean waiting time
  int iterations = 0;
};

inline std::vector<double> poisson_pmf(double mean, int count) {
  std::vector<double> pmf(static_cast<std::size_t>(count), 0.0);
  double term = std::exp(-mean);
  for (int k = 0; k < count; ++k) {
    pmf[static_cast<std::size_t>(k)] = term;
    term *= mean / (k + 1);
  }
  return pmf;
}

inline Matrix transition_matrix(const Params& params) {
  params.validate();
  const int N = params.clip;
  const double a = params.utilization();
  Matrix m;
  m.n = N + 1;
  m.p.assign(static_cast<std::size_t>(m.n) * m.n, 0.0);
  const auto pmf = poisson_pmf(a, N + 2);
  for (int s = 0; s <= N; ++s) {
    double assigned = 0.0;
    for (int k = 0; k < static_cast<int>(pmf.size()); ++k) {
      const int next = std::max(s + k - 1, 0);
      if (next >= N) break;
      m(s, next) += pmf[static_cast<std::size_t>(k)];
      assigned += pmf[static_cast<std::size_t>(k)];
    }
    // the clipped state absorbs the whole remaining tail
    m(s, N) += std::max(0.0, 1.0 - assigned);
  }
  return m;
}

inline std::vector<double> stationary_distribution(const Matrix& m, double tol,
                                                   int max_iterations = 1000000,
                                                   int* iterations_out = nullptr) {
  const int n = m.n;
  std::vector<double> pi(static_cast<std::size_t>(n), 1.0 / n);
  std::vector<double> next(static_cast<std::size_t>(n));
  for (int it = 1; it <= max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double w = pi[static_cast<std::size_t>(i)];
      if (w == 0.0) continue;
      for (int j = 0; j < n; ++j) next[static_cast<std::size_t>(j)] += w * m(i, j);
    }
    double sum = 0.0;
    for (double v : next) sum += v;
    double diff = 0.0;
    for (int j = 0; j < n; ++j) {
      next[static_cast<std::size_t>(j)] /= sum;
      diff += std::abs(next[static_cast<std::size_t>(j)] - pi[static_cast<std::size_t>(j)]);
    }
    pi.swap(next);
    if (diff < tol) {
      if (iterations_out) *iterations_out = it;
      return pi;
    }
  }
  throw NumericalError("power iteration did not converge");
}

inline StationaryResult waiting_time(const Params& params) {
  const Matrix m = transition_matrix(params);
  StationaryResult r;
  r.pi = stationary_distribution(m, params.tol, 1000000, &r.iterations);
  if (r.pi.back() >= 1e-9)
    throw NumericalError("clip " + std::to_string(params.clip) +
                         " too small: tail mass " + std::to_string(r.pi.back()));
  for (std::size_t i = 0; i < r.pi.size(); ++i) r.L_inf += static_cast<double>(i) * r.pi[i];
  r.L = r.L_inf + params.lambda * params.T / 2.0;
  r.W = r.L / params.lambda;
  return r;
}

struct Empirical {
  double L_inf = 0.0;
  double L = 0.0;
  Seconds W = 0.0;
  std::uint64_t packets = 0;
};

/// Monte Carlo oracle: iterates the frame recursion directly with Poisson
/// arrivals placed uniformly inside each frame and FIFO service at frame end.
inline Empirical simulate_queue(const Params& params, std::uint64_t n_frames, std::uint64_t seed) {
  if (!(params.lambda > 0.0) || !(params.T > 0.0)) throw ConfigError("invalid queue parameters");
  RngStream rng(seed, "queue_model/simulate");
  const double a = params.utilization();
  const Seconds T = params.T;
  std::uint64_t backlog = 0;  // queue right after the previous service
  long double sum_backlog = 0.0L;
  long double sum_wait = 0.0L;
  long double area = 0.0L;  // integral of queue length over time
  std::uint64_t packets = 0;
  for (std::uint64_t f = 0; f < n_frames; ++f) {
    sum_backlog += backlog;
    const auto arrivals = static_cast<std::uint64_t>(rng.poisson(a));
    // packets already waiting occupy the whole frame
    area += static_cast<long double>(backlog) * T;
    // FIFO position backlog+i departs at frame end + position*T. The total wait
    // of the frame's arrivals does not depend on which offset gets which position.
    for (std::uint64_t i = 0; i < arrivals; ++i) {
      const double offset = rng.uniform() * T;
      const auto position = backlog + i;
      sum_wait += (T - offset) + static_cast<long double>(position) * T;
      area += T - offset;
    }
    packets += arrivals;
    backlog = backlog + arrivals > 0 ? backlog + arrivals - 1 : 0;
  }
  Empirical e;
  e.packets = packets;
  e.L_inf = static_cast<double>(sum_backlog / n_frames);
  e.L = static_cast<double>(area / (static_cast<long double>(n_frames) * T));
  e.W = packets ? static_cast<double>(sum_wait / packets) : 0.0;
  return e;
}

}  // namespace loraicn::queue
