#include "hydrocal/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hydrocal/errors.hpp"
#include "hydrocal/numfmt.hpp"

namespace hydrocal {

Grid::Grid(const GridGeometry& geometry, double fill)
    : geom_(geometry), values_(Values::Constant(geometry.n_rows, geometry.n_cols, fill)) {
  if (geom_.n_rows < 1 || geom_.n_cols < 1) throw std::invalid_argument("grid must have at least one row and column");
  if (!(geom_.cell_size_m > 0.0)) throw std::invalid_argument("cell size must be positive");
}

Grid::Grid(const GridGeometry& geometry, Values values) : Grid(geometry) {
  if (values.rows() != geom_.n_rows || values.cols() != geom_.n_cols) {
    throw std::invalid_argument("grid values do not match geometry");
  }
  values_ = std::move(values);
}

Eigen::Index Grid::count_valid() const { return (values_ != geom_.nodata).count(); }

bool operator==(const Grid& a, const Grid& b) {
  const auto& g = a.geom_;
  const auto& h = b.geom_;
  return g.n_rows == h.n_rows && g.n_cols == h.n_cols && g.cell_size_m == h.cell_size_m &&
         g.x_origin == h.x_origin && g.y_origin == h.y_origin && g.nodata == h.nodata &&
         (a.values_ == b.values_).all();
}

// ---------------------------------------------------------------------------
// ASCII grid I/O

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool blank_or_comment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

}  // namespace

Grid read_ascii_grid(std::istream& in, const std::string& source) {
  static const std::array<std::string, 6> keys{"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"};
  std::map<std::string, std::pair<std::string, int>> header;
  std::string line;
  int line_no = 0;

  while (header.size() < keys.size() && std::getline(in, line)) {
    ++line_no;
    if (blank_or_comment(line)) continue;
    std::istringstream ls(line);
    std::string key, value, extra;
    if (!(ls >> key >> value) || (ls >> extra)) throw ParseError(source, line_no, "malformed header line");
    key = lower(key);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ParseError(source, line_no, "unknown header key '" + key + "'");
    }
    if (!header.emplace(key, std::make_pair(value, line_no)).second) {
      throw ParseError(source, line_no, "duplicate header key '" + key + "'");
    }
  }
  if (header.size() < keys.size()) {
    for (const auto& k : keys) {
      if (!header.count(k)) throw ParseError(source, line_no, "missing header key '" + k + "'");
    }
  }

  GridGeometry geom;
  auto int_key = [&](const std::string& k) {
    long v = 0;
    const auto& [text, ln] = header.at(k);
    if (!parse_int(text, v) || v < 1) throw ParseError(source, ln, k + " must be a positive integer");
    return static_cast<Eigen::Index>(v);
  };
  auto real_key = [&](const std::string& k) {
    double v = 0;
    const auto& [text, ln] = header.at(k);
    if (!parse_double(text, v) || !std::isfinite(v)) throw ParseError(source, ln, k + " is not a number");
    return v;
  };
  geom.n_cols = int_key("ncols");
  geom.n_rows = int_key("nrows");
  geom.x_origin = real_key("xllcorner");
  geom.y_origin = real_key("yllcorner");
  geom.cell_size_m = real_key("cellsize");
  geom.nodata = real_key("nodata_value");
  if (!(geom.cell_size_m > 0)) throw ParseError(source, header.at("cellsize").second, "cellsize must be positive");

  Grid grid(geom);
  Eigen::Index row = 0;
  while (row < geom.n_rows && std::getline(in, line)) {
    ++line_no;
    if (blank_or_comment(line)) continue;
    std::istringstream ls(line);
    std::string token;
    Eigen::Index col = 0;
    while (ls >> token) {
      double v = 0;
      if (!parse_double(token, v)) throw ParseError(source, line_no, "non-numeric token '" + token + "'");
      if (col >= geom.n_cols) {
        throw ParseError(source, line_no, "row has more than " + std::to_string(geom.n_cols) + " values");
      }
      grid(row, col++) = v;
    }
    if (col != geom.n_cols) {
      throw ParseError(source, line_no,
                       "row has " + std::to_string(col) + " values, expected " + std::to_string(geom.n_cols));
    }
    ++row;
  }
  if (row != geom.n_rows) {
    throw ParseError(source, line_no, "expected " + std::to_string(geom.n_rows) + " rows, found " + std::to_string(row));
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!blank_or_comment(line)) throw ParseError(source, line_no, "data after the last row");
  }
  return grid;
}

Grid load_ascii_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid file " + path.string());
  return read_ascii_grid(in, path.string());
}

void write_ascii_grid(const Grid& grid, std::ostream& out) {
  const auto& g = grid.geometry();
  out << "ncols " << g.n_cols << '\n'
      << "nrows " << g.n_rows << '\n'
      << "xllcorner " << format_shortest(g.x_origin) << '\n'
      << "yllcorner " << format_shortest(g.y_origin) << '\n'
      << "cellsize " << format_shortest(g.cell_size_m) << '\n'
      << "NODATA_value " << format_shortest(g.nodata) << '\n';
  for (Eigen::Index r = 0; r < g.n_rows; ++r) {
    for (Eigen::Index c = 0; c < g.n_cols; ++c) {
      if (c) out << ' ';
      const double v = grid(r, c);
      out << (v == g.nodata ? format_shortest(v) : format_g6(v));
    }
    out << '\n';
  }
}

void write_ascii_grid(const Grid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write grid file " + path.string());
  write_ascii_grid(grid, out);
}

// ---------------------------------------------------------------------------
// Flow network

FlowDir::FlowDir(Grid codes) : codes_(std::move(codes)), down_(static_cast<std::size_t>(codes_.size()), -1) {
  const auto& g = codes_.geometry();
  for (Eigen::Index r = 0; r < g.n_rows; ++r) {
    for (Eigen::Index c = 0; c < g.n_cols; ++c) {
      const CellIndex i = g.index(r, c);
      if (codes_.is_nodata(i)) continue;
      const double code = codes_[i];
      if (code == 0.0) continue;
      const auto step = std::find_if(kD8Steps.begin(), kD8Steps.end(),
                                     [&](const D8Step& s) { return static_cast<double>(s.code) == code; });
      if (step == kD8Steps.end()) {
        throw std::invalid_argument("invalid D8 code " + format_shortest(code) + " at row " + std::to_string(r) +
                                    ", col " + std::to_string(c));
      }
      const auto nr = r + step->d_row;
      const auto nc = c + step->d_col;
      if (!g.in_bounds(nr, nc)) continue;
      const CellIndex j = g.index(nr, nc);
      if (codes_.is_nodata(j)) continue;
      down_[static_cast<std::size_t>(i)] = j;
    }
  }
}

std::optional<CellIndex> FlowDir::find_cycle() const {
  // 0 = unvisited, 1 = on current walk, 2 = known to terminate
  std::vector<std::uint8_t> state(down_.size(), 0);
  std::vector<CellIndex> walk;
  for (std::size_t start = 0; start < down_.size(); ++start) {
    if (state[start] != 0 || codes_.is_nodata(static_cast<CellIndex>(start))) continue;
    walk.clear();
    CellIndex cur = static_cast<CellIndex>(start);
    while (cur >= 0 && state[static_cast<std::size_t>(cur)] == 0) {
      state[static_cast<std::size_t>(cur)] = 1;
      walk.push_back(cur);
      cur = down_[static_cast<std::size_t>(cur)];
    }
    if (cur >= 0 && state[static_cast<std::size_t>(cur)] == 1) return cur;
    for (auto c : walk) state[static_cast<std::size_t>(c)] = 2;
  }
  return std::nullopt;
}

Eigen::Index BasinMask::cell_count() const { return (mask.values() == 1.0).count(); }

namespace {

/// Kahn ordering over the cells selected by `include`; returns cells in upstream-first order.
template <typename Include>
std::vector<CellIndex> kahn_order(const FlowDir& fd, Include include) {
  const auto n = fd.geometry().size();
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  std::size_t total = 0;
  for (CellIndex i = 0; i < n; ++i) {
    if (!include(i)) continue;
    ++total;
    if (auto d = fd.downstream(i); d && include(*d)) ++indegree[static_cast<std::size_t>(*d)];
  }
  std::vector<CellIndex> order;
  order.reserve(total);
  for (CellIndex i = 0; i < n; ++i) {
    if (include(i) && indegree[static_cast<std::size_t>(i)] == 0) order.push_back(i);
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    if (auto d = fd.downstream(order[head]); d && include(*d)) {
      if (--indegree[static_cast<std::size_t>(*d)] == 0) order.push_back(*d);
    }
  }
  if (order.size() != total) {
    const auto cell = fd.find_cycle();
    const CellIndex c = cell.value_or(-1);
    const auto& g = fd.geometry();
    throw TopologyError(c, "flow directions contain a cycle through row " + std::to_string(c / g.n_cols) +
                               ", col " + std::to_string(c % g.n_cols));
  }
  return order;
}

}  // namespace

Grid flow_accumulation(const FlowDir& fd) {
  const auto& g = fd.geometry();
  const auto order = kahn_order(fd, [&](CellIndex i) { return !fd.is_nodata(i); });
  Grid acc(g, 0.0);
  for (CellIndex i = 0; i < g.size(); ++i) {
    acc[i] = fd.is_nodata(i) ? g.nodata : 1.0;
  }
  for (auto i : order) {
    if (auto d = fd.downstream(i)) acc[*d] += acc[i];
  }
  return acc;
}

Grid derive_channel_mask(const Grid& accumulation, double threshold) {
  if (!(threshold >= 1.0)) throw std::invalid_argument("channel threshold must be >= 1");
  Grid out(accumulation.geometry(), 0.0);
  for (CellIndex i = 0; i < out.size(); ++i) {
    if (accumulation.is_nodata(i)) {
      out[i] = out.nodata();
    } else {
      out[i] = accumulation[i] >= threshold ? 1.0 : 0.0;
    }
  }
  return out;
}

BasinMask delineate_basin(const FlowDir& fd, Eigen::Index outlet_row, Eigen::Index outlet_col) {
  const auto& g = fd.geometry();
  if (!g.in_bounds(outlet_row, outlet_col)) {
    throw std::out_of_range("outlet (" + std::to_string(outlet_row) + ", " + std::to_string(outlet_col) +
                            ") is outside the " + std::to_string(g.n_rows) + "x" + std::to_string(g.n_cols) + " grid");
  }
  const CellIndex outlet = g.index(outlet_row, outlet_col);
  if (fd.is_nodata(outlet)) throw std::invalid_argument("outlet cell is nodata");

  std::vector<std::vector<CellIndex>> upstream(static_cast<std::size_t>(g.size()));
  for (CellIndex i = 0; i < g.size(); ++i) {
    if (auto d = fd.downstream(i)) upstream[static_cast<std::size_t>(*d)].push_back(i);
  }

  GridGeometry mg = g;
  mg.nodata = kDefaultNodata;
  BasinMask basin{Grid(mg, 0.0), outlet_row, outlet_col, 0.0};
  std::vector<CellIndex> stack{outlet};
  basin.mask[outlet] = 1.0;
  while (!stack.empty()) {
    const auto c = stack.back();
    stack.pop_back();
    for (auto u : upstream[static_cast<std::size_t>(c)]) {
      if (basin.mask[u] == 0.0) {
        basin.mask[u] = 1.0;
        stack.push_back(u);
      }
    }
  }
  basin.area_km2 = static_cast<double>(basin.cell_count()) * g.cell_size_m * g.cell_size_m / 1e6;
  return basin;
}

std::vector<CellIndex> topological_order(const FlowDir& fd, const BasinMask& mask) {
  if (!mask.mask.geometry().same_shape(fd.geometry())) throw std::invalid_argument("mask and flow grid differ in shape");
  auto order = kahn_order(fd, [&](CellIndex i) { return mask.contains(i) && !fd.is_nodata(i); });
  const CellIndex outlet = fd.geometry().index(mask.outlet_row, mask.outlet_col);
  if (order.empty() || order.back() != outlet) {
    throw TopologyError(outlet, "basin mask does not drain to its outlet");
  }
  return order;
}

FlowDir d8_from_dem(const Grid& dem) {
  const auto& g = dem.geometry();
  Grid codes(g, 0.0);
  for (Eigen::Index r = 0; r < g.n_rows; ++r) {
    for (Eigen::Index c = 0; c < g.n_cols; ++c) {
      const CellIndex i = g.index(r, c);
      if (dem.is_nodata(i)) {
        codes[i] = g.nodata;
        continue;
      }
      double best_slope = 0.0;
      int best_code = 0;
      int edge_code = 0;
      for (const auto& s : kD8Steps) {
        const auto nr = r + s.d_row;
        const auto nc = c + s.d_col;
        const int code = static_cast<int>(s.code);
        if (!g.in_bounds(nr, nc) || dem.is_nodata(g.index(nr, nc))) {
          if (edge_code == 0) edge_code = code;
          continue;
        }
        const double dist = (s.d_row != 0 && s.d_col != 0) ? std::sqrt(2.0) : 1.0;
        const double slope = (dem[i] - dem(nr, nc)) / dist;
        if (slope > best_slope) {  // strict: earlier (lower) code wins ties
          best_slope = slope;
          best_code = code;
        }
      }
      codes[i] = best_code != 0 ? best_code : edge_code;
    }
  }
  return FlowDir(std::move(codes));
}

}  // namespace hydrocal
