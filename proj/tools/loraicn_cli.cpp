// loraicn: command-line front end for scenario runs, sweeps, the CFP queue
// model and the LoRa airtime calculator.
//
// Exit status: 0 on success (not-operable schedules are results, not errors),
// 1 on any error, with the message on stderr.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "loraicn/loraicn.hpp"

namespace {

using namespace loraicn;

struct Output {
  std::ofstream file;
  std::ostream* os = &std::cout;

  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path);
    if (!file) throw ConfigError("cannot write '" + path + "'");
    os = &file;
  }
};

struct RunOptions {
  std::string config;
  std::string out;
  std::string jsonl;
  std::string cdf;
  std::string trace;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  unsigned workers = 1;
  bool verbose = false;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("-c,--config", o.config, "scenario JSON file")->required();
  cmd->add_option("-o,--out", o.out, "CSV output path (default: stdout)");
  cmd->add_option("--seed", o.seed, "first seed, overriding the config");
  cmd->add_option("--replications", o.replications, "replications per cell, overriding the config");
  cmd->add_option("-j,--workers", o.workers, "parallel runs")->check(CLI::Range(1u, 256u));
  cmd->add_option("--jsonl", o.jsonl, "per-transaction JSONL dump");
  cmd->add_option("--cdf", o.cdf, "completion CDF over all runs (CSV)");
  cmd->add_flag("-v,--verbose", o.verbose, "pooled summary on stderr");
}

ScenarioFile load(const RunOptions& o) {
  ScenarioFile f = load_scenario_file(o.config);
  if (o.seed) f.base.seed = *o.seed;
  if (o.replications) f.base.replications = *o.replications;
  f.base.validate();
  return f;
}

void write_outputs(const RunOptions& o, const std::vector<RunResult>& runs) {
  {
    Output out(o.out);
    write_csv(*out.os, runs);
  }
  if (!o.jsonl.empty()) {
    Output out(o.jsonl);
    write_jsonl(*out.os, runs);
  }
  if (!o.cdf.empty()) {
    Output out(o.cdf);
    write_cdf_csv(*out.os, completion_cdf(runs));
  }
  if (o.verbose) {
    const Pooled p = pool(runs);
    std::fprintf(stderr, "runs=%d not_operable=%d produced=%llu success=%.2f%% loss=%.2f%% avg=%.2fs max=%.2fs\n",
                 p.runs, p.not_operable, static_cast<unsigned long long>(p.produced), p.success_pct(), p.loss_pct(),
                 p.avg_latency(), p.max_latency);
  }
}

int cmd_run(const RunOptions& o) {
  ScenarioFile f = load(o);
  if (!o.trace.empty()) {
    // event trace of the first replication only
    Output out(o.trace);
    Network net(f.base, f.base.seed);
    net.simulator().set_trace(out.os);
    net.run();
  }
  write_outputs(o, run_scenario(f.base, o.workers));
  return 0;
}

int cmd_sweep(const RunOptions& o) {
  ScenarioFile f = load(o);
  const auto cells = expand_grid(f.base, f.sweep);  // validates every cell first
  write_outputs(o, run_jobs(expand_jobs(cells), o.workers));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LoRa-ICN discrete-event simulator"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "replications of one scenario, CSV rows per seed");
  add_run_options(run, run_opts);
  run->add_option("--trace", run_opts.trace, "event trace of the first replication");

  RunOptions sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "cross product of the config's sweep axes");
  add_run_options(sweep_cmd, sweep_opts);

  queue::Params qp;
  auto* qm = app.add_subcommand("queue-model", "mean CFP queue length and waiting time");
  qm->add_option("--lambda", qp.lambda, "arrival rate per second")->required();
  qm->add_option("--T", qp.T, "multi-superframe duration in seconds")->required();
  qm->add_option("--clip", qp.clip, "largest modeled queue length");

  PhyConfig phy;
  int bytes = 0;
  bool implicit_header = false;
  bool no_crc = false;
  auto* toa = app.add_subcommand("toa", "LoRa time on air in seconds");
  toa->add_option("--bytes", bytes, "PHY payload bytes")->required();
  toa->add_option("--sf", phy.sf, "spreading factor");
  toa->add_option("--bw", phy.bw, "bandwidth in Hz");
  toa->add_option("--cr", phy.cr, "coding rate index, 4/(4+cr)");
  toa->add_option("--preamble", phy.preamble_symbols, "preamble symbols");
  toa->add_flag("--implicit-header", implicit_header);
  toa->add_flag("--no-crc", no_crc);
  toa->add_flag("--ldro", phy.ldro, "force low data rate optimization");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*sweep_cmd) return cmd_sweep(sweep_opts);
    if (*qm) {
      qp.validate();
      const auto r = queue::waiting_time(qp);
      json j{{"lambda", qp.lambda}, {"T", qp.T},   {"a", qp.utilization()}, {"L_inf", r.L_inf},
             {"L", r.L},            {"W", r.W},    {"iterations", r.iterations}};
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*toa) {
      phy.explicit_header = !implicit_header;
      phy.crc = !no_crc;
      std::printf("%.6f\n", time_on_air(bytes, phy));
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
