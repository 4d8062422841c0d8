#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hydrocal/bench.hpp"
#include "hydrocal/calibrators.hpp"
#include "hydrocal/episode.hpp"
#include "hydrocal/event_window.hpp"
#include "hydrocal/metrics.hpp"
#include "hydrocal/numfmt.hpp"
#include "hydrocal/reward.hpp"
#include "hydrocal/service.hpp"
#include "hydrocal/simulator.hpp"
#include "hydrocal/synth.hpp"
#include "hydrocal/trajectory.hpp"

namespace fs = std::filesystem;
using namespace hydrocal;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::shared_ptr<const CatchmentTask> task_from(const std::string& control, std::optional<std::uint64_t> synth_seed,
                                               int n, const std::string& scenario) {
  if (!control.empty()) return load_task(control);
  if (!synth_seed) throw std::invalid_argument("give --control or --synth-seed");
  SynthOptions o;
  o.n = n;
  o.scenario = scenario_from_string(scenario);
  return synth_task(synth_basin(*synth_seed, o));
}

int cmd_simulate(const std::string& control, const std::string& params_json, const std::string& out_csv) {
  const SimulationConfig cfg = parse_control_file(control);
  const fs::path base = fs::path(control).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  ParameterSet p = cfg.params;
  if (!params_json.empty()) {
    std::ifstream in(params_json);
    if (!in) throw std::runtime_error("cannot open " + params_json);
    const json j = json::parse(in);
    for (const auto& [k, v] : j.items()) {
      const auto id = param_from_name(k);
      if (!id) throw std::invalid_argument("unknown parameter '" + k + "'");
      p[*id] = v.get<double>();
    }
  }
  const Basin basin = load_basin(cfg, base);
  const ForcingSeries f = load_forcing(resolve(cfg.forcing.precip_csv), resolve(cfg.forcing.pet_csv),
                                       cfg.basic.timestep_hours);
  const Hydrograph h = simulate(basin, f, p, cfg.window.start, cfg.window.end);
  std::optional<TimeSeries> obs;
  if (cfg.gauge.obs_csv) obs = load_observations(resolve(*cfg.gauge.obs_csv)).slice(cfg.window.start, cfg.window.end);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_csv.empty()) {
    file.open(out_csv);
    if (!file) throw std::runtime_error("cannot write " + out_csv);
    out = &file;
  }
  *out << (obs ? "timestamp,q_sim_cms,q_obs_cms\n" : "timestamp,q_sim_cms\n");
  for (Eigen::Index t = 0; t < h.size(); ++t) {
    *out << format_utc_hour(h.time(t)) << ',' << format_shortest(h.q_sim[t]);
    if (obs) *out << ',' << format_shortest(obs->values[t]);
    *out << '\n';
  }
  ordered_json summary;
  summary["mass_balance"] = {{"precip_in", h.ledger.precip_in},       {"et_out", h.ledger.et_out},
                             {"deep_loss", h.ledger.deep_loss},       {"boundary_out", h.ledger.boundary_out},
                             {"outlet_total", h.ledger.outlet_total}, {"storage_delta", h.ledger.storage_delta},
                             {"relative_closure", h.ledger.relative_closure()}};
  if (obs) summary["metrics"] = to_json(metric_panel(obs->values, h.q_sim, h.dt_hours));
  (out_csv.empty() ? std::cerr : std::cout) << summary.dump(2) << '\n';
  return 0;
}

int cmd_episode(const std::string& control, std::optional<std::uint64_t> synth_seed, int n, EpisodeConfig cfg,
                const std::string& trajectory_out) {
  Episode ep(task_from(control, synth_seed, n, "standard"), cfg);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    ordered_json reply;
    std::string tool = line;
    json args = json::object();
    if (line.front() == '{') {
      const json req = json::parse(line, nullptr, false);
      if (req.is_discarded() || !req.contains("tool")) {
        std::cout << ordered_json{{"ok", false}, {"error", {{"code", "malformed_request"}, {"message", "expected {\"tool\": ...}"}}}}.dump() << std::endl;
        continue;
      }
      tool = req["tool"].get<std::string>();
      if (req.contains("args")) args = req["args"];
    }
    ToolResult r;
    if (tool == "set_parameters") {
      r = ep.set_parameters(args);
    } else if (tool == "run_simulation") {
      r = ep.run_simulation();
    } else if (tool == "evaluate") {
      r = ep.evaluate();
    } else if (tool == "parse_failure") {
      r = ep.parse_failure();
    } else if (tool == "status") {
      r.result = ep.status_json();
    } else if (tool == "score") {
      r.result = ep.score_json();
    } else {
      r = {false, "malformed_request", "unknown tool '" + tool + "'", ordered_json::object()};
    }
    if (r.ok) {
      reply = {{"ok", true}, {"result", r.result}};
    } else {
      reply = {{"ok", false}, {"error", {{"code", r.code}, {"message", r.message}}}};
    }
    std::cout << reply.dump() << std::endl;
  }
  if (!trajectory_out.empty()) ep.export_trajectory(fs::path(trajectory_out));
  std::cerr << ep.score_json().dump() << '\n';
  return 0;
}

std::vector<GaugeTask> synth_gauges(int count, const fs::path& dir) {
  std::vector<GaugeTask> tasks;
  for (int i = 0; i < count; ++i) {
    const auto s = synth_basin(static_cast<std::uint64_t>(i + 1));
    const fs::path control = write_synth_bundle(s, dir / ("basin-" + std::to_string(i + 1)));
    GaugeTask t;
    t.gauge_id = s.config.gauge.id;
    t.split = Split::test;
    t.basin_area_km2 = s.basin.network.area_km2;
    t.start = s.config.window.start;
    t.end = s.config.window.end;
    t.control = control;
    tasks.push_back(t);
  }
  return tasks;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed rainfall-runoff simulator and calibration environment"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run the simulator for a control file and print the hydrograph CSV");
  std::string sim_control, sim_params, sim_out;
  sim->add_option("--control", sim_control, "Control file")->required();
  sim->add_option("--params-json", sim_params, "JSON object overriding parameter values");
  sim->add_option("--out", sim_out, "Write the hydrograph CSV here instead of stdout");

  // episode
  auto* epi = app.add_subcommand("episode", "Interactive tool loop on stdin/stdout");
  std::string epi_control, epi_traj;
  std::optional<std::uint64_t> epi_seed;
  int epi_n = 16;
  EpisodeConfig epi_cfg;
  double epi_target = std::numeric_limits<double>::quiet_NaN();
  epi->add_option("--control", epi_control, "Control file");
  epi->add_option("--synth-seed", epi_seed, "Use a synthetic basin with this seed");
  epi->add_option("--n", epi_n, "Synthetic grid side");
  epi->add_option("--target", epi_target, "Target NSE");
  epi->add_option("--max-turns", epi_cfg.max_turns, "Turn cap");
  epi->add_option("--no-improve-rounds", epi_cfg.no_improve_rounds, "Evaluates without improvement before stalling");
  epi->add_option("--trajectory", epi_traj, "Write the trajectory JSONL here at end of input");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Run a reference calibrator");
  std::string cal_control, cal_agent = "dds", cal_scenario = "standard";
  std::optional<std::uint64_t> cal_synth;
  int cal_budget = 200, cal_sweeps = 10, cal_n = 16;
  std::uint64_t cal_seed = 0;
  double cal_target = std::numeric_limits<double>::quiet_NaN();
  cal->add_option("--control", cal_control, "Control file");
  cal->add_option("--synth-seed", cal_synth, "Use a synthetic basin with this seed");
  cal->add_option("--n", cal_n, "Synthetic grid side");
  cal->add_option("--scenario", cal_scenario, "Synthetic storm scenario");
  cal->add_option("--agent", cal_agent, "random, dds or refine")->check(CLI::IsMember({"random", "dds", "refine"}));
  cal->add_option("--budget", cal_budget, "Simulation budget")->check(CLI::PositiveNumber);
  cal->add_option("--sweeps", cal_sweeps, "Sweeps per round")->check(CLI::PositiveNumber);
  cal->add_option("--seed", cal_seed, "Agent seed");
  cal->add_option("--target", cal_target, "Target NSE");

  // bench
  auto* ben = app.add_subcommand("bench", "Best-of-rounds benchmark over gauges, agents and seeds");
  std::string ben_manifest, ben_json, ben_workdir = "bench-basins";
  int ben_synth = 0, ben_rounds = 20, ben_sweeps = 10, ben_workers = 1, ben_seeds = 1;
  std::vector<std::string> ben_agents{"random", "dds", "refine"};
  ben->add_option("--manifest", ben_manifest, "JSON gauge manifest");
  ben->add_option("--synth", ben_synth, "Generate this many synthetic gauges instead");
  ben->add_option("--workdir", ben_workdir, "Directory for generated synthetic bundles");
  ben->add_option("--agents", ben_agents, "Agents to run")->delimiter(',');
  ben->add_option("--seeds", ben_seeds, "Seeds 0..N-1 per cell")->check(CLI::PositiveNumber);
  ben->add_option("--rounds", ben_rounds, "Rounds per gauge")->check(CLI::PositiveNumber);
  ben->add_option("--sweeps", ben_sweeps, "Sweeps per round")->check(CLI::PositiveNumber);
  ben->add_option("--workers", ben_workers, "Concurrent cells")->check(CLI::PositiveNumber);
  ben->add_option("--json", ben_json, "Write the JSON report here");

  // synth
  auto* syn = app.add_subcommand("synth", "Write a synthetic twin-experiment bundle");
  std::uint64_t syn_seed = 1;
  SynthOptions syn_opt;
  std::string syn_scenario = "standard", syn_out;
  syn->add_option("--seed", syn_seed, "Seed");
  syn->add_option("--n", syn_opt.n, "Grid side")->check(CLI::Range(4, 4096));
  syn->add_option("--scenario", syn_scenario, "standard, flashy or wet");
  syn->add_option("--noise-frac", syn_opt.noise_frac, "Observation noise as a fraction of mean flow");
  syn->add_option("--days", syn_opt.days, "Days of hourly forcing");
  syn->add_option("--out", syn_out, "Bundle directory")->required();

  // select-window
  auto* win = app.add_subcommand("select-window", "Pick the best-scoring flood window of a gauge series");
  std::string win_obs;
  int win_days = 60;
  win->add_option("--obs", win_obs, "timestamp,discharge_cms CSV")->required();
  win->add_option("--days", win_days, "Window length in days")->check(CLI::PositiveNumber);

  // serve
  auto* srv = app.add_subcommand("serve", "Episode service over NDJSON");
  bool srv_stdio = false;
  std::string srv_host = "127.0.0.1", srv_base = ".";
  int srv_port = 7878, srv_width = 32;
  srv->add_flag("--stdio", srv_stdio, "Serve on stdin/stdout");
  srv->add_option("--host", srv_host, "IPv4 address to bind");
  srv->add_option("--port", srv_port, "TCP port (0 picks one)");
  srv->add_option("--gate-width", srv_width, "Concurrent simulation limit")->check(CLI::PositiveNumber);
  srv->add_option("--base-dir", srv_base, "Directory for relative control paths");

  // score-trajectory
  auto* sco = app.add_subcommand("score-trajectory", "Score a recorded trajectory JSONL");
  std::string sco_path;
  double sco_target = std::numeric_limits<double>::quiet_NaN();
  sco->add_option("--trajectory", sco_path, "Trajectory JSONL")->required();
  sco->add_option("--target", sco_target, "Target NSE (default: the file's summary, else 0.8075)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(sim_control, sim_params, sim_out);

    if (*epi) {
      if (!std::isnan(epi_target)) epi_cfg.target_nse = epi_target;
      return cmd_episode(epi_control, epi_seed, epi_n, epi_cfg, epi_traj);
    }

    if (*cal) {
      auto task = task_from(cal_control, cal_synth, cal_n, cal_scenario);
      CalibrationOptions co;
      if (!std::isnan(cal_target)) co.target_nse = cal_target;
      auto agent = make_calibrator(cal_agent, cal_budget, cal_seed);
      const int rounds = (cal_budget + cal_sweeps - 1) / cal_sweeps;
      if (rounds * cal_sweeps != cal_budget) throw std::invalid_argument("--budget must be a multiple of --sweeps");
      const CalibrationRun run = best_of_rounds(task, *agent, rounds, cal_sweeps, cal_seed, co);
      std::cout << to_json(run).dump(2) << '\n';
      return 0;
    }

    if (*ben) {
      std::vector<GaugeTask> tasks;
      if (!ben_manifest.empty()) tasks = load_gauge_tasks(ben_manifest);
      if (ben_synth > 0) {
        auto more = synth_gauges(ben_synth, ben_workdir);
        tasks.insert(tasks.end(), more.begin(), more.end());
      }
      if (tasks.empty()) throw std::invalid_argument("give --manifest or --synth");
      std::vector<std::uint64_t> seeds;
      for (int s = 0; s < ben_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
      BenchOptions bo;
      bo.rounds = ben_rounds;
      bo.sweeps = ben_sweeps;
      bo.workers = ben_workers;
      const BenchReport report = run_benchmark(tasks, ben_agents, seeds, bo);
      std::cout << report.to_table();
      if (!ben_json.empty()) {
        std::ofstream out(ben_json);
        if (!out) throw std::runtime_error("cannot write " + ben_json);
        out << report.to_json().dump(2) << '\n';
      }
      return 0;
    }

    if (*syn) {
      syn_opt.scenario = scenario_from_string(syn_scenario);
      const auto s = synth_basin(syn_seed, syn_opt);
      std::cout << write_synth_bundle(s, syn_out).string() << '\n';
      return 0;
    }

    if (*win) {
      const TimeSeries obs = load_observations(win_obs);
      const EventWindow w = select_event_window(obs, win_days);
      ordered_json j{{"start", format_utc_hour(w.t0)},       {"end", format_utc_hour(w.t1)},
                     {"score", w.score},                      {"peak_ratio", w.peak_ratio},
                     {"t_rise_hours", w.t_rise_hours},        {"t_recess_hours", w.t_recess_hours}};
      std::cout << j.dump(2) << '\n';
      return 0;
    }

    if (*srv) {
      SimulationGate::global().set_width(srv_width);
      EpisodeService service(ServiceOptions{srv_base});
      if (srv_stdio) {
        serve_stdio(service, std::cin, std::cout);
        return 0;
      }
      TcpServer server(service, srv_host, srv_port);
      std::cerr << "listening on " << srv_host << ':' << server.port() << '\n';
      server.run();
      return 0;
    }

    if (*sco) {
      std::ifstream in(sco_path);
      if (!in) throw std::runtime_error("cannot open " + sco_path);
      TrajectoryRecord rec = read_trajectory_jsonl(in);
      double target = kDefaultTargetNse;
      if (rec.summary && rec.summary->contains("target_nse")) target = (*rec.summary)["target_nse"].get<double>();
      if (!std::isnan(sco_target)) target = sco_target;
      std::cout << to_json(score_trajectory(rec.events, target)).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
