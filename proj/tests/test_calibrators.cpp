#include <doctest.h>

#include <algorithm>

#include "hydrocal/calibrators.hpp"
#include "hydrocal/synth.hpp"

using namespace hydrocal;

namespace {

std::shared_ptr<const CatchmentTask> small_task() {
  static const auto task = [] {
    SynthOptions o;
    o.n = 6;
    o.days = 20;
    return synth_task(synth_basin(13, o));
  }();
  return task;
}

std::shared_ptr<const CatchmentTask> default_task(std::uint64_t seed) {
  static std::map<std::uint64_t, std::shared_ptr<const CatchmentTask>> cache;
  auto& t = cache[seed];
  if (!t) t = synth_task(synth_basin(seed));
  return t;
}

CalibrationOptions twin() {
  CalibrationOptions o;
  o.target_nse = 1.0;
  return o;
}

bool in_bounds(const ParameterSet& p) { return check_bounds(p).empty(); }

std::vector<Param> changed(const ParameterSet& a, const ParameterSet& b) {
  std::vector<Param> out;
  for (const auto& s : kParamSpecs) {
    if (a[s.id] != b[s.id]) out.push_back(s.id);
  }
  return out;
}

// First parameter the refiner perturbs after seeing `panel` for its starting point.
Param first_refined(const MetricPanel& panel) {
  CoordinateRefiner r(1);
  const ParameterSet start = r.propose();
  CHECK(start == ParameterSet());
  r.observe(start, 0.2, panel);
  const auto diff = changed(start, r.propose());
  REQUIRE(diff.size() == 1);
  return diff.front();
}

}  // namespace

TEST_CASE("reflection") {
  CHECK(reflect(0.95 + 0.2, 0.0, 1.0) == doctest::Approx(0.85).epsilon(1e-15));
  CHECK(reflect(-0.3, 0.0, 1.0) == doctest::Approx(0.3));
  CHECK(reflect(0.4, 0.0, 1.0) == 0.4);
  CHECK(reflect(5.0, 0.0, 1.0) == 1.0);
  CHECK(reflect(-5.0, 0.0, 1.0) == 0.0);
}

TEST_CASE("calibrated set") {
  const auto p = calibrated_params();
  CHECK(p.size() == 11);
  CHECK(std::find(p.begin(), p.end(), Param::th) == p.end());
  CHECK(std::find(p.begin(), p.end(), Param::isu) == p.end());
  CHECK(std::find(p.begin(), p.end(), Param::iwu) != p.end());
}

TEST_CASE("proposals stay in bounds") {
  for (const auto& name : agent_names()) {
    auto agent = make_calibrator(name, 500, 3);
    MetricPanel panel;
    panel.peak_ratio = 0.5;
    panel.volume_ratio = 1.0;
    for (int k = 0; k < 500; ++k) {
      const ParameterSet p = agent->propose();
      REQUIRE(in_bounds(p));
      agent->observe(p, std::sin(k * 0.37), panel);
    }
  }
  CHECK_THROWS_AS(make_calibrator("sce", 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(Dds(1, 1), std::invalid_argument);
}

TEST_CASE("dds: start samples and forced perturbation") {
  Dds small(2, 9);
  CHECK(small.initial_samples() == 1);
  const ParameterSet a = small.propose();
  small.observe(a, 0.1, MetricPanel{});
  const ParameterSet b = small.propose();
  CHECK(changed(a, b).size() >= 1);
  CHECK(Dds(200, 1).initial_samples() == 5);
  CHECK(Dds(5000, 1).initial_samples() == 25);

  // Late proposals move few dimensions.
  Dds late(1000, 4);
  ParameterSet last;
  for (int i = 1; i <= 999; ++i) {
    last = late.propose();
    late.observe(last, i <= 5 ? -static_cast<double>(i) : -100.0, MetricPanel{});
  }
  CHECK(changed(late.best(), last).size() <= 3);
}

TEST_CASE("refine: diagnosis picks the first coordinate") {
  MetricPanel routing;
  routing.peak_ratio = 0.6;
  routing.volume_ratio = 1.0;
  const Param r = first_refined(routing);
  CHECK((r == Param::alpha || r == Param::beta || r == Param::alpha0));

  MetricPanel surplus;
  surplus.peak_ratio = 1.0;
  surplus.volume_ratio = 1.3;
  const Param s = first_refined(surplus);
  CHECK((s == Param::ke || s == Param::im));
}

TEST_CASE("refine: steps are multiplicative around the best") {
  MetricPanel routing;
  routing.peak_ratio = 0.6;
  routing.volume_ratio = 1.0;
  CoordinateRefiner r(1);
  const ParameterSet start = r.propose();
  r.observe(start, 0.2, routing);
  std::vector<double> values;
  for (int k = 0; k < 4; ++k) {
    const ParameterSet c = r.propose();
    values.push_back(c[Param::alpha]);
    r.observe(c, 0.1, routing);
  }
  CHECK(values == std::vector<double>{0.5, 0.8, 1.25, 2.0});
  CHECK(r.history().front() == Param::alpha);
}

TEST_CASE("budget one runs exactly one evaluate") {
  for (const auto& name : {"random", "dds"}) {
    const CalibrationRun run = best_of_rounds(small_task(), name, 1, 1, 5, twin());
    CHECK(run.n_sims == 1);
    CHECK(run.best_nse_curve.size() == 1);
    CHECK(run.rounds_used == 1);
  }
  CHECK(random_search(small_task(), 1, 2).n_sims == 1);
  CHECK_THROWS_AS(coordinate_refine(small_task(), 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(random_search(small_task(), 0, 1), std::invalid_argument);
}

TEST_CASE("runs are deterministic, bounded and rejection free") {
  for (const auto& name : agent_names()) {
    const CalibrationRun a = best_of_rounds(small_task(), name, 4, 5, 17, twin());
    const CalibrationRun b = best_of_rounds(small_task(), name, 4, 5, 17, twin());
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(a.n_rejected == 0);
    CHECK(a.n_sims <= 20);
    CHECK(a.best_nse_curve.size() == 4);
    CHECK(std::is_sorted(a.best_nse_curve.begin(), a.best_nse_curve.end()));
    CHECK(in_bounds(*a.best_params));
    const auto j = to_json(a);
    for (const char* key : {"agent", "gauge", "seed", "rounds_used", "best_nse_curve", "n_sims", "best_params", "band"}) {
      CHECK(j.contains(key));
    }
  }
}

TEST_CASE("stall ends a run early and the curve keeps its length") {
  CalibrationOptions o = twin();
  o.stall_rounds = 1;
  o.improvement_epsilon = 10.0;
  const CalibrationRun run = best_of_rounds(small_task(), "random", 6, 3, 1, o);
  CHECK(run.status == EpisodeStatus::stalled);
  CHECK(run.n_sims == 4);
  CHECK(run.rounds_used == 2);
  REQUIRE(run.best_nse_curve.size() == 6);
  CHECK(run.best_nse_curve[5] == run.best_nse_curve[1]);
}

TEST_CASE("random search reaches a positive NSE on the default basin") {
  int positive = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const CalibrationRun run = random_search(default_task(1), 200, seed, twin());
    if (*run.best_nse() >= 0.0) ++positive;
  }
  CHECK(positive == 5);
}

TEST_CASE("refine improves more often than random search") {
  std::vector<int> refine, random;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    refine.push_back(coordinate_refine(default_task(seed), 150, seed, twin()).n_improve);
    random.push_back(random_search(default_task(seed), 150, seed, twin()).n_improve);
  }
  std::sort(refine.begin(), refine.end());
  std::sort(random.begin(), random.end());
  MESSAGE("median improvements: refine ", refine[2], ", random ", random[2]);
  CHECK(refine[2] > random[2]);
}
