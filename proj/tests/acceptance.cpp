// One line per acceptance criterion; exit status 1 if any fails.
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "hydrocal/calibrators.hpp"
#include "hydrocal/event_window.hpp"
#include "hydrocal/metrics.hpp"
#include "hydrocal/reward.hpp"
#include "hydrocal/service.hpp"
#include "hydrocal/synth.hpp"

using namespace hydrocal;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0) o.require(secs < budget_s, "runtime over budget");
  if (!o.pass) ++failures;
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.2fs", secs);
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << " [" << timing << "]";
  if (!o.detail.empty()) std::cout << ": " << o.detail;
  std::cout << std::endl;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

class LineClient {
 public:
  explicit LineClient(int port) : fd_(::socket(AF_INET, SOCK_STREAM, 0)) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw std::runtime_error("connect failed");
  }
  ~LineClient() { ::close(fd_); }
  std::string call(const std::string& line) {
    const std::string out = line + "\n";
    if (::send(fd_, out.data(), out.size(), 0) != static_cast<ssize_t>(out.size())) throw std::runtime_error("send failed");
    for (;;) {
      if (const auto nl = buf_.find('\n'); nl != std::string::npos) {
        std::string r = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return r;
      }
      char chunk[8192];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) throw std::runtime_error("connection closed");
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buf_;
};

std::vector<std::string> lines_of(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

double window_score_oracle(const std::vector<double>& q, std::size_t s, std::size_t len) {
  std::size_t p = s;
  double sum = 0;
  for (std::size_t i = s; i < s + len; ++i) {
    sum += q[i];
    if (q[i] > q[p]) p = i;
  }
  const double mean = sum / static_cast<double>(len);
  std::size_t low = s;
  for (std::size_t i = s + 1; i <= p; ++i) {
    if (q[i] <= q[low]) low = i;
  }
  std::size_t end = s + len - 1;
  for (std::size_t i = p + 1; i < s + len; ++i) {
    if (q[i] <= q[low]) {
      end = i;
      break;
    }
  }
  const double ratio = mean > 0 ? q[p] / mean : 1.0;
  return std::log10(ratio + 1.0) * std::sqrt(static_cast<double>(p - low) * static_cast<double>(end - p));
}

}  // namespace

int main(int argc, char** argv) {
  std::string data_dir = HYDROCAL_TEST_DATA;
  if (argc > 1) data_dir = argv[1];

  criterion("nse definition: identity and mean predictor on 1000 random series", 1.0, [](Outcome& o) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(10, 500);
    std::lognormal_distribution<double> q(0.0, 1.2);
    for (int k = 0; k < 1000; ++k) {
      Eigen::ArrayXd obs(len(rng));
      for (auto& x : obs) x = q(rng);
      const Eigen::ArrayXd mean = Eigen::ArrayXd::Constant(obs.size(), obs.mean());
      o.require(std::abs(nse(obs, obs) - 1.0) <= 1e-12, "nse(obs, obs) != 1");
      o.require(std::abs(nse(obs, mean)) <= 1e-12, "nse(obs, mean) != 0 (" + num(nse(obs, mean)) + ")");
    }
  });

  criterion("moriasi bands: 0.50/0.70/0.85 boundaries and 0.754 -> good", 0, [](Outcome& o) {
    o.require(moriasi_band(0.50) == Band::unsatisfactory, "0.50");
    o.require(moriasi_band(std::nextafter(0.50, 1.0)) == Band::satisfactory, "just above 0.50");
    o.require(moriasi_band(0.70) == Band::satisfactory, "0.70");
    o.require(moriasi_band(std::nextafter(0.70, 1.0)) == Band::good, "just above 0.70");
    o.require(moriasi_band(0.85) == Band::good, "0.85");
    o.require(moriasi_band(std::nextafter(0.85, 1.0)) == Band::very_good, "just above 0.85");
    o.require(moriasi_band(0.754) == Band::good, "0.754");
  });

  criterion("reward arithmetic: 1.68, clip at -3.2, empty episode -2", 0, [](Outcome& o) {
    const auto [r, c] = terminal_reward({0.9, 0.8075, 4, 3, false});
    o.require(std::abs(r - 1.68) <= 1e-12, "terminal_reward(0.9, 0.8075, 4, 3) = " + num(r));
    o.require(terminal_reward({-3.2, 0.8075, 1, 1, false}).second.clipped_nse == -1.0, "clip component");
    const auto [e, ec] = terminal_reward({0.0, 0.8075, 0, 0, true});
    o.require(e == -2.0 && ec.clipped_nse == -1.0 && ec.empty_penalty == -1.0, "empty episode");
    o.require(score_trajectory({}, 0.8075).total == -2.0, "empty trajectory total");
  });

  SynthOptions small;
  small.n = 6;
  small.days = 10;
  const auto small_task = synth_task(synth_basin(5, small));

  criterion("parameter bounds: inclusive endpoints, out-of-range and fixed th/isu", 0, [&](Outcome& o) {
    EpisodeConfig cfg;
    cfg.max_turns = 10'000;
    Episode ep(small_task, cfg);
    int accepted = 0, rejected = 0;
    for (const auto& s : kParamSpecs) {
      const double lo = s.fixed ? s.fixed_value : s.lo;
      const double hi = s.fixed ? s.fixed_value : s.hi;
      for (double v : {lo, hi}) {
        ParameterSet p;
        p[s.id] = v;
        const bool ok = ep.set_parameters(p).ok;
        accepted += ok;
        o.require(ok, std::string(s.name) + "=" + num(v) + " rejected");
      }
      for (double v : {std::nextafter(lo, -1e300), std::nextafter(hi, 1e300)}) {
        ParameterSet p;
        p[s.id] = v;
        const auto r = ep.set_parameters(p);
        const bool rej = !r.ok && r.code == error_code::bounds_violation;
        rejected += rej;
        o.require(rej, std::string(s.name) + "=" + num(v) + " accepted");
      }
    }
    ParameterSet th, isu;
    th[Param::th] = 12.0;
    isu[Param::isu] = 1.0;
    o.require(!ep.set_parameters(th).ok && !ep.set_parameters(isu).ok, "fixed parameter change accepted");
    o.require(accepted == 26 && rejected == 26, "probe counts");
  });

  criterion("termination: stalled, turn_cap, target_attained", 0, [&](Outcome& o) {
    EpisodeConfig cfg;
    cfg.target_nse = 2.0;
    Episode stall(small_task, cfg);
    stall.set_parameters(ParameterSet());
    stall.run_simulation();
    stall.evaluate();
    for (int k = 0; k < 5; ++k) {
      o.require(stall.running(), "stopped before five non-improving evaluates");
      stall.evaluate();
    }
    o.require(stall.status() == EpisodeStatus::stalled, "status " + std::string(to_string(stall.status())));

    Episode cap(small_task, EpisodeConfig{});
    for (int k = 0; k < 50; ++k) cap.set_parameters(ParameterSet());
    o.require(cap.status() == EpisodeStatus::turn_cap && cap.turn() == 50, "50-turn episode");
    o.require(!cap.set_parameters(ParameterSet()).ok && cap.trajectory().size() == 50, "call after turn cap");

    EpisodeConfig easy;
    easy.target_nse = 0.0;
    const auto twin = synth_basin(5, small);
    Episode hit(synth_task(twin), easy);
    hit.set_parameters(twin.truth);
    hit.run_simulation();
    hit.evaluate();
    o.require(hit.status() == EpisodeStatus::target_attained, "target not attained");
  });

  criterion("mass balance: 20 synthetic 16x16 basins, 60 days, closure <= 1e-9", 30.0, [](Outcome& o) {
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto s = synth_basin(seed);
      const Hydrograph h = simulate(s.basin, s.forcing, s.truth, s.config.window.start, s.config.window.end);
      worst = std::max(worst, h.ledger.relative_closure());
    }
    o.require(worst <= 1e-9, "worst closure " + num(worst));
    o.detail = o.pass ? "worst closure " + num(worst) : o.detail;
  });

  criterion("twin recovery: DDS budget 200 reaches NSE >= 0.9 on >= 4 of 5 seeds", 120.0, [](Outcome& o) {
    const auto task = synth_task(synth_basin(1));
    CalibrationOptions opts;
    opts.target_nse = 1.0;
    int hits = 0;
    std::string scores;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const double best = *dds_calibrate(task, 200, seed, 0.2, opts).best_nse();
      hits += best >= 0.9;
      scores += (scores.empty() ? "" : " ") + num(best);
    }
    o.require(hits >= 4, "only " + std::to_string(hits) + " of 5");
    o.detail = o.pass ? "best NSE " + scores : o.detail + " (" + scores + ")";
  });

  criterion("benchmark protocol: best_of_rounds(20, 10) <= 200 simulations, 20-point non-decreasing curve", 0,
            [](Outcome& o) {
              SynthOptions opt;
              opt.n = 8;
              opt.days = 30;
              const auto task = synth_task(synth_basin(2, opt));
              for (const auto& agent : agent_names()) {
                for (std::uint64_t seed : {1, 2}) {
                  const CalibrationRun run = best_of_rounds(task, agent, 20, 10, seed);
                  o.require(run.n_sims <= 200, agent + " ran " + std::to_string(run.n_sims) + " simulations");
                  o.require(run.best_nse_curve.size() == 20, agent + " curve has " +
                                                                 std::to_string(run.best_nse_curve.size()) + " points");
                  o.require(std::is_sorted(run.best_nse_curve.begin(), run.best_nse_curve.end()),
                            agent + " curve decreases");
                }
              }
            });

  criterion("event window: brute-force argmax on 120-day series, score 32.0", 0, [](Outcome& o) {
    o.require(std::abs(event_window_score(9.0, 16.0, 64.0) - 32.0) <= 1e-12, "spot value");
    std::mt19937_64 rng(77);
    const std::size_t len = 60 * 24;
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> q(120 * 24, 0.4);
      std::uniform_int_distribution<std::size_t> at(0, q.size() - 1);
      for (int e = 0; e < 1 + trial % 5; ++e) {
        const std::size_t c = at(rng);
        const double h = std::uniform_real_distribution<double>(2.0, 25.0)(rng);
        const int rise = std::uniform_int_distribution<int>(3, 24)(rng), fall = std::uniform_int_distribution<int>(12, 150)(rng);
        for (int k = -rise; k <= fall; ++k) {
          const long i = static_cast<long>(c) + k;
          if (i < 0 || i >= static_cast<long>(q.size())) continue;
          q[static_cast<std::size_t>(i)] += h * (k < 0 ? 1.0 + static_cast<double>(k) / rise : 1.0 - static_cast<double>(k) / fall);
        }
      }
      std::size_t best = 0;
      double best_score = -1;
      for (std::size_t s = 0; s + len <= q.size(); s += 24) {
        const double v = window_score_oracle(q, s, len);
        if (v > best_score + 1e-12 * std::max(1.0, best_score)) {
          best_score = v;
          best = s;
        }
      }
      TimeSeries ts;
      ts.start = parse_utc_hour("2019-01-01T00");
      ts.values = Eigen::Map<const Eigen::ArrayXd>(q.data(), static_cast<Eigen::Index>(q.size()));
      const EventWindow w = select_event_window(ts, 60);
      o.require(static_cast<std::size_t>(w.start_index) == best, "argmax differs in trial " + std::to_string(trial));
    }
  });

  criterion("wire service: golden transcript, 8 isolated concurrent sessions, admission width", 0, [&](Outcome& o) {
    const auto requests = lines_of(data_dir + "/golden_requests.ndjson");
    const auto golden = lines_of(data_dir + "/golden_responses.ndjson");
    o.require(requests.size() == golden.size(), "transcript sizes differ");

    EpisodeService local;
    EpisodeService served;
    {
      TcpServer server(served);
      server.start();
      LineClient client(server.port());
      for (std::size_t i = 0; i < requests.size() && i < golden.size(); ++i) {
        const std::string in_process = local.handle(requests[i]);
        const std::string wire = client.call(requests[i]);
        o.require(in_process == wire, "in-process and served responses differ at line " + std::to_string(i + 1));
        o.require(wire == golden[i], "served response differs from golden at line " + std::to_string(i + 1));
      }
      server.stop();
    }

    auto& gate = SimulationGate::global();
    const int saved = gate.width();
    gate.set_width(3);
    gate.reset_peak();
    EpisodeService svc;
    TcpServer server(svc);
    server.start();
    constexpr int kSessions = 8;
    std::vector<double> best(kSessions, std::nan(""));
    std::vector<std::thread> threads;
    for (int k = 0; k < kSessions; ++k) {
      threads.emplace_back([&, k] {
        LineClient c(server.port());
        const json created = json::parse(c.call(json{{"id", 1},
                                                     {"method", "create_episode"},
                                                     {"params", {{"target_nse", 2.0}, {"synth", {{"seed", k + 1}, {"n", 8}, {"days", 10}}}}}}
                                                    .dump()));
        const std::string sid = created["result"]["session"];
        for (int round = 0; round < 4; ++round) {
          json values = json::parse(parameters_to_json(ParameterSet()).dump());
          values["alpha"] = 0.4 + 0.3 * round;
          values["wm"] = 0.5 + 0.2 * k;
          c.call(json{{"id", 2}, {"method", "set_parameters"}, {"params", {{"session", sid}, {"values", values}}}}.dump());
          c.call(json{{"id", 3}, {"method", "run_simulation"}, {"params", {{"session", sid}}}}.dump());
          const json ev = json::parse(c.call(json{{"id", 4}, {"method", "evaluate"}, {"params", {{"session", sid}}}}.dump()));
          best[static_cast<std::size_t>(k)] = ev["result"]["best_nse"];
        }
      });
    }
    for (auto& t : threads) t.join();
    server.stop();
    const int peak = gate.peak();
    gate.set_width(saved);
    o.require(peak <= 3, "admission peak " + std::to_string(peak) + " above width 3");

    for (int k = 0; k < kSessions; ++k) {
      SynthOptions so;
      so.n = 8;
      so.days = 10;
      EpisodeConfig cfg;
      cfg.target_nse = 2.0;
      Episode ep(synth_task(synth_basin(static_cast<std::uint64_t>(k + 1), so)), cfg);
      for (int round = 0; round < 4; ++round) {
        ParameterSet p;
        p[Param::alpha] = 0.4 + 0.3 * round;
        p[Param::wm] = 0.5 + 0.2 * k;
        ep.set_parameters(p);
        ep.run_simulation();
        ep.evaluate();
      }
      o.require(ep.best_nse() && *ep.best_nse() == best[static_cast<std::size_t>(k)],
                "session " + std::to_string(k + 1) + " best_nse differs from its serial replay");
    }
    o.require(SimulationGate::global().width() == 32, "default admission width is not 32");
    o.detail = o.pass ? "admission peak " + std::to_string(peak) + " of 3" : o.detail;
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
