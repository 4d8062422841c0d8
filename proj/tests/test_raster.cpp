#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "hydrocal/errors.hpp"
#include "hydrocal/raster.hpp"
#include "hydrocal/synth.hpp"

using namespace hydrocal;

namespace {

Grid codes(Eigen::Index rows, Eigen::Index cols, std::initializer_list<double> v) {
  Grid g(GridGeometry{rows, cols, 100.0, 0.0, 0.0, kDefaultNodata});
  Eigen::Index i = 0;
  for (double x : v) g[i++] = x;
  return g;
}

Grid parse(const std::string& text) {
  std::istringstream in(text);
  return read_ascii_grid(in, "test.asc");
}

// Walks every cell to its outlet and counts visits.
std::vector<double> walk_accumulation(const FlowDir& fd) {
  const auto n = fd.geometry().size();
  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  for (CellIndex c = 0; c < n; ++c) {
    if (fd.is_nodata(c)) continue;
    CellIndex cur = c;
    for (CellIndex steps = 0; steps <= n; ++steps) {
      acc[static_cast<std::size_t>(cur)] += 1.0;
      const auto d = fd.downstream(cur);
      if (!d) break;
      cur = *d;
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("ascii grid: smallest file parses") {
  const Grid g = parse("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 30\nNODATA_value -9999\n1 2\n3 4\n");
  CHECK(g.rows() == 2);
  CHECK(g.cols() == 2);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 2.0);
  CHECK(g[2] == 3.0);
  CHECK(g[3] == 4.0);
  CHECK(g.cell_size() == 30.0);
}

TEST_CASE("ascii grid: header order and case are free, comments skipped") {
  const Grid g = parse("# made by hand\nCELLSIZE 10\nNROWS 1\nnodata_value -1\nNCOLS 3\nYLLCORNER 5\nXLLCORNER 7\n-1 2 3\n");
  CHECK(g.cols() == 3);
  CHECK(g.is_nodata(0));
  CHECK_FALSE(g.is_nodata(1));
  CHECK(g.geometry().x_origin == 7.0);
  CHECK(g.count_valid() == 2);
}

TEST_CASE("ascii grid: nodata sentinel") {
  const Grid g = parse("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n-9999 5\n");
  CHECK(g.is_nodata(0));
  CHECK(g.count_valid() == 1);
}

TEST_CASE("ascii grid: short row reports its line") {
  try {
    parse("ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n4 5\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 8);
  }
}

TEST_CASE("ascii grid: malformed inputs") {
  const std::string head = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n";
  CHECK_THROWS_AS(parse(head + "1 x\n"), ParseError);
  CHECK_THROWS_AS(parse(head + "1 2 3\n"), ParseError);
  CHECK_THROWS_AS(parse(head + "1 2\n3 4\n"), ParseError);
  CHECK_THROWS_AS(parse("ncols 2\nnrows 1\n1 2\n"), ParseError);
  CHECK_THROWS_AS(parse("ncols 2\nncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n"), ParseError);
  CHECK_THROWS_AS(parse("ncols 0\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n\n"), ParseError);
}

TEST_CASE("ascii grid: write then read is the identity at 6 significant digits") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  Grid g(GridGeometry{5, 7, 12.5, 100.25, -3.0, kDefaultNodata});
  for (CellIndex i = 0; i < g.size(); ++i) {
    std::ostringstream s;
    s.precision(6);
    s << u(rng);
    g[i] = std::stod(s.str());
  }
  g[4] = kDefaultNodata;
  std::ostringstream out;
  write_ascii_grid(g, out);
  const Grid back = parse(out.str());
  CHECK(back == g);
  std::ostringstream again;
  write_ascii_grid(back, again);
  CHECK(again.str() == out.str());
}

TEST_CASE("flow directions: invalid codes rejected") {
  CHECK_THROWS_AS(FlowDir(codes(1, 2, {3, 1})), std::invalid_argument);
  CHECK_NOTHROW(FlowDir(codes(1, 2, {1, 0})));
}

TEST_CASE("flow accumulation: lone cell and chain") {
  CHECK(flow_accumulation(FlowDir(codes(1, 1, {0})))[0] == 1.0);
  const Grid acc = flow_accumulation(FlowDir(codes(1, 3, {1, 1, 1})));
  CHECK(acc[0] == 1.0);
  CHECK(acc[1] == 2.0);
  CHECK(acc[2] == 3.0);
}

TEST_CASE("flow accumulation: cycle is a topology error naming a cycle cell") {
  const FlowDir fd(codes(1, 3, {1, 16, 0}));
  try {
    flow_accumulation(fd);
    FAIL("expected a topology error");
  } catch (const TopologyError& e) {
    CHECK((e.cell() == 0 || e.cell() == 1));
  }
  CHECK(fd.find_cycle().has_value());
}

TEST_CASE("flow accumulation: synthetic 8x8 field matches the downstream-walk oracle") {
  SynthOptions o;
  o.n = 8;
  for (std::uint64_t seed : {1u, 2u, 3u, 11u}) {
    const auto s = synth_basin(seed, o);
    const FlowDir fd(s.flowdir);
    const Grid acc = flow_accumulation(fd);
    const auto oracle = walk_accumulation(fd);
    for (CellIndex i = 0; i < acc.size(); ++i) CHECK(acc[i] == oracle[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("flow accumulation: random forests obey conservation and strict growth downstream") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    // Random DEM gives an acyclic field with pits and several outlets.
    Grid dem(GridGeometry{9, 6, 10.0, 0, 0, kDefaultNodata});
    std::uniform_real_distribution<double> u(0.0, 50.0);
    for (CellIndex i = 0; i < dem.size(); ++i) dem[i] = std::round(u(rng) * 100.0) / 100.0;
    dem[5] = kDefaultNodata;
    const FlowDir fd = d8_from_dem(dem);
    const Grid acc = flow_accumulation(fd);
    double outlet_sum = 0.0;
    for (CellIndex c = 0; c < acc.size(); ++c) {
      if (fd.is_nodata(c)) {
        CHECK(acc.is_nodata(c));
        continue;
      }
      const auto d = fd.downstream(c);
      if (!d) {
        outlet_sum += acc[c];
      } else {
        CHECK(acc[*d] > acc[c]);
      }
    }
    CHECK(outlet_sum == static_cast<double>(dem.count_valid()));
    const auto oracle = walk_accumulation(fd);
    for (CellIndex i = 0; i < acc.size(); ++i) {
      if (!fd.is_nodata(i)) CHECK(acc[i] == oracle[static_cast<std::size_t>(i)]);
    }
  }
}

TEST_CASE("channel mask thresholds") {
  Grid chain(GridGeometry{1, 12, 1.0, 0, 0, kDefaultNodata}, 1.0);
  const Grid acc = flow_accumulation(FlowDir(chain));
  const Grid ch = derive_channel_mask(acc, 10);
  for (CellIndex i = 0; i < 12; ++i) CHECK(ch[i] == (i >= 9 ? 1.0 : 0.0));
  const Grid all = derive_channel_mask(acc, 1);
  CHECK((all.values() == 1.0).all());
  const Grid none = derive_channel_mask(acc, 13);
  CHECK((none.values() == 0.0).all());
  CHECK_THROWS_AS(derive_channel_mask(acc, 0.5), std::invalid_argument);
}

TEST_CASE("basin delineation") {
  const FlowDir lone(codes(1, 3, {1, 0, 16}));
  const BasinMask m = delineate_basin(lone, 0, 1);
  CHECK(m.cell_count() == 3);
  const BasinMask head = delineate_basin(lone, 0, 2);
  CHECK(head.cell_count() == 1);
  CHECK(head.contains(2));
  CHECK_THROWS_AS(delineate_basin(lone, 2, 0), std::out_of_range);

  const auto s = synth_basin(5);
  const BasinMask full = delineate_basin(FlowDir(s.flowdir), 15, 15);
  CHECK(full.cell_count() == 256);
  CHECK(full.area_km2 == doctest::Approx(2.56).epsilon(1e-12));
}

TEST_CASE("topological order: chain and synthetic edge lists") {
  const FlowDir chain(codes(1, 3, {1, 1, 1}));
  const auto order = topological_order(chain, delineate_basin(chain, 0, 2));
  CHECK(order == std::vector<CellIndex>{0, 1, 2});

  SynthOptions o;
  o.n = 8;
  const auto s = synth_basin(9, o);
  const FlowDir fd(s.flowdir);
  const auto topo = topological_order(fd, s.mask);
  REQUIRE(topo.size() == 64);
  std::vector<CellIndex> sorted = topo;
  std::sort(sorted.begin(), sorted.end());
  for (CellIndex i = 0; i < 64; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  std::vector<std::size_t> pos(64);
  for (std::size_t k = 0; k < topo.size(); ++k) pos[static_cast<std::size_t>(topo[k])] = k;
  REQUIRE(s.edges.size() == 63);
  for (const auto& [u, v] : s.edges) CHECK(pos[static_cast<std::size_t>(u)] < pos[static_cast<std::size_t>(v)]);
  CHECK(topo.back() == 63);
}

TEST_CASE("steepest descent directions") {
  // Bowl draining to the centre: the centre is an interior pit.
  Grid bowl(GridGeometry{3, 3, 1.0, 0, 0, kDefaultNodata});
  bowl.values() << 5, 5, 5, 5, 1, 5, 5, 5, 5;
  const FlowDir fd = d8_from_dem(bowl);
  CHECK(fd.grid()[4] == 0.0);
  CHECK(fd.grid()[1] == static_cast<double>(D8::S));
  CHECK(fd.grid()[3] == static_cast<double>(D8::E));

  // Equal drops east and south: the lower code (east) wins.
  Grid tie(GridGeometry{2, 2, 1.0, 0, 0, kDefaultNodata});
  tie.values() << 2, 1, 1, 3;
  CHECK(d8_from_dem(tie).grid()[0] == static_cast<double>(D8::E));

  // Diagonal drop is divided by sqrt(2): 1.2/sqrt(2) loses to 1, 1.5/sqrt(2) beats it.
  Grid diag(GridGeometry{2, 2, 1.0, 0, 0, kDefaultNodata});
  diag.values() << 10, 9, 9.5, 8.8;
  CHECK(d8_from_dem(diag).grid()[0] == static_cast<double>(D8::E));
  diag.values() << 10, 9, 9.5, 8.5;
  CHECK(d8_from_dem(diag).grid()[0] == static_cast<double>(D8::SE));

  // A border cell with no lower neighbour drains off the grid.
  Grid ramp(GridGeometry{1, 3, 1.0, 0, 0, kDefaultNodata});
  ramp.values() << 3, 2, 1;
  const FlowDir r = d8_from_dem(ramp);
  CHECK(r.grid()[2] == static_cast<double>(D8::E));
  CHECK_FALSE(r.downstream(2).has_value());
}

TEST_CASE("synthetic bundles are acyclic and fully connected") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthOptions o;
    o.n = 4 + static_cast<int>(seed % 9);
    const auto s = synth_basin(seed, o);
    const FlowDir fd(s.flowdir);
    CHECK_FALSE(fd.find_cycle().has_value());
    CHECK(s.mask.cell_count() == static_cast<Eigen::Index>(o.n) * o.n);
    CHECK(d8_from_dem(s.dem).grid() == s.flowdir);
  }
}
