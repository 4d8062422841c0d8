#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hydrocal {

using CellIndex = Eigen::Index;

inline constexpr double kDefaultNodata = -9999.0;

struct GridGeometry {
  Eigen::Index n_rows = 1;
  Eigen::Index n_cols = 1;
  double cell_size_m = 1.0;
  double x_origin = 0.0;
  double y_origin = 0.0;
  double nodata = kDefaultNodata;

  Eigen::Index size() const { return n_rows * n_cols; }
  bool same_shape(const GridGeometry& o) const { return n_rows == o.n_rows && n_cols == o.n_cols; }
  CellIndex index(Eigen::Index row, Eigen::Index col) const { return row * n_cols + col; }
  bool in_bounds(Eigen::Index row, Eigen::Index col) const {
    return row >= 0 && col >= 0 && row < n_rows && col < n_cols;
  }
};

/// Rectangular raster, row-major, top row first.
class Grid {
 public:
  using Values = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Grid() : Grid(GridGeometry{}) {}
  explicit Grid(const GridGeometry& geometry, double fill = 0.0);
  Grid(const GridGeometry& geometry, Values values);

  const GridGeometry& geometry() const { return geom_; }
  Eigen::Index rows() const { return geom_.n_rows; }
  Eigen::Index cols() const { return geom_.n_cols; }
  Eigen::Index size() const { return geom_.size(); }
  double cell_size() const { return geom_.cell_size_m; }
  double nodata() const { return geom_.nodata; }

  double operator()(Eigen::Index row, Eigen::Index col) const { return values_(row, col); }
  double& operator()(Eigen::Index row, Eigen::Index col) { return values_(row, col); }
  double operator[](CellIndex i) const { return values_.data()[i]; }
  double& operator[](CellIndex i) { return values_.data()[i]; }

  bool is_nodata(CellIndex i) const { return values_.data()[i] == geom_.nodata; }
  Eigen::Index count_valid() const;

  const Values& values() const { return values_; }
  Values& values() { return values_; }

  friend bool operator==(const Grid& a, const Grid& b);

 private:
  GridGeometry geom_;
  Values values_;
};

Grid load_ascii_grid(const std::filesystem::path& path);
Grid read_ascii_grid(std::istream& in, const std::string& source = "<stream>");
void write_ascii_grid(const Grid& grid, const std::filesystem::path& path);
void write_ascii_grid(const Grid& grid, std::ostream& out);

/// D8 direction codes, power-of-two convention, clockwise from east.
enum class D8 : std::uint8_t { E = 1, SE = 2, S = 4, SW = 8, W = 16, NW = 32, N = 64, NE = 128 };

struct D8Step {
  D8 code;
  int d_row;
  int d_col;
};

inline constexpr std::array<D8Step, 8> kD8Steps{{{D8::E, 0, 1},
                                                 {D8::SE, 1, 1},
                                                 {D8::S, 1, 0},
                                                 {D8::SW, 1, -1},
                                                 {D8::W, 0, -1},
                                                 {D8::NW, -1, -1},
                                                 {D8::N, -1, 0},
                                                 {D8::NE, -1, 1}}};

/// Flow-direction raster. Each valid cell holds a D8 code, or 0 for a pit that drains nowhere.
/// Cells whose direction leaves the grid or enters a nodata cell are outlets.
class FlowDir {
 public:
  explicit FlowDir(Grid codes);

  const Grid& grid() const { return codes_; }
  const GridGeometry& geometry() const { return codes_.geometry(); }
  bool is_nodata(CellIndex i) const { return codes_.is_nodata(i); }

  /// Downstream cell, or nullopt when `i` is an outlet.
  std::optional<CellIndex> downstream(CellIndex i) const {
    const auto d = down_[static_cast<std::size_t>(i)];
    return d < 0 ? std::nullopt : std::optional<CellIndex>(d);
  }

  /// Some cell on a cycle, if the network has one.
  std::optional<CellIndex> find_cycle() const;

 private:
  Grid codes_;
  std::vector<CellIndex> down_;  // -1 for outlets and nodata
};

struct BasinMask {
  Grid mask;  // 1 inside the basin, 0 outside
  Eigen::Index outlet_row = 0;
  Eigen::Index outlet_col = 0;
  double area_km2 = 0.0;

  Eigen::Index cell_count() const;
  bool contains(CellIndex i) const { return mask[i] == 1.0; }
};

/// Upstream cell count (self included) for every valid cell; nodata stays nodata.
/// Throws TopologyError naming a cell on a cycle.
Grid flow_accumulation(const FlowDir& fd);

/// 1 where accumulation >= threshold, 0 elsewhere; nodata preserved.
Grid derive_channel_mask(const Grid& accumulation, double threshold);

/// Cells whose D8 path reaches (row, col). Throws std::out_of_range / std::invalid_argument.
BasinMask delineate_basin(const FlowDir& fd, Eigen::Index outlet_row, Eigen::Index outlet_col);

/// Basin cells ordered so every cell precedes the cell it drains into; outlet last.
std::vector<CellIndex> topological_order(const FlowDir& fd, const BasinMask& mask);

/// Steepest-descent D8 directions (drop divided by neighbour distance); ties go to the lowest code.
/// Cells without a strictly lower neighbour drain off-grid if on the border, else become pits (0).
FlowDir d8_from_dem(const Grid& dem);

}  // namespace hydrocal
