#include "hydrocal/forcing.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "hydrocal/errors.hpp"
#include "hydrocal/numfmt.hpp"

namespace hydrocal {

Eigen::Index TimeSeries::index_of(UtcHour t) const {
  const long h = hours_between(start, t);
  const double k = static_cast<double>(h) / dt_hours;
  if (h < 0 || std::floor(k) != k || static_cast<Eigen::Index>(k) >= size()) {
    throw std::out_of_range(format_utc_hour(t) + " is not a step of the series starting " + format_utc_hour(start));
  }
  return static_cast<Eigen::Index>(k);
}

TimeSeries TimeSeries::slice(UtcHour from, UtcHour to) const {
  const auto a = index_of(from);
  const auto b = index_of(to);
  if (b < a) throw std::invalid_argument("slice end precedes start");
  return TimeSeries{from, dt_hours, values.segment(a, b - a + 1)};
}

namespace {

struct RawRow {
  UtcHour t;
  std::string value;
  int line;
};

std::string strip_cr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

std::vector<RawRow> read_rows(std::istream& in, const std::string& header, const std::string& source) {
  std::string line;
  int line_no = 0;
  bool have_header = false;
  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      if (line != header) throw ParseError(source, line_no, "expected header '" + header + "', got '" + line + "'");
      have_header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ParseError(source, line_no, "expected two comma-separated fields");
    }
    RawRow row{{}, line.substr(comma + 1), line_no};
    try {
      row.t = parse_utc_hour(line.substr(0, comma));
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (!rows.empty()) {
      const long step = hours_between(rows.back().t, row.t);
      const long expected = rows.size() >= 2 ? hours_between(rows[rows.size() - 2].t, rows.back().t) : step;
      if (step <= 0) throw ParseError(source, line_no, "timestamps must be strictly increasing");
      if (step != expected) throw ParseError(source, line_no, "timestamps are not evenly spaced");
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError(source, line_no, "missing header '" + header + "'");
  if (rows.empty()) throw ParseError(source, line_no, "no data rows");
  return rows;
}

double read_value(const RawRow& row, const std::string& source) {
  double v = 0;
  if (!parse_double(row.value, v)) throw ParseError(source, row.line, "non-numeric value '" + row.value + "'");
  if (!std::isfinite(v) || v < 0) throw ParseError(source, row.line, "value must be finite and >= 0, got " + row.value);
  return v;
}

double spacing(const std::vector<RawRow>& rows) {
  return rows.size() >= 2 ? static_cast<double>(hours_between(rows[0].t, rows[1].t)) : 1.0;
}

}  // namespace

TimeSeries read_series_csv(std::istream& in, const std::string& header, const std::string& source) {
  const auto rows = read_rows(in, header, source);
  TimeSeries s{rows.front().t, spacing(rows), Eigen::ArrayXd(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t i = 0; i < rows.size(); ++i) s.values[static_cast<Eigen::Index>(i)] = read_value(rows[i], source);
  return s;
}

TimeSeries load_series_csv(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_series_csv(in, header, path.string());
}

void write_series_csv(const TimeSeries& s, const std::string& header, std::ostream& out) {
  out << header << '\n';
  for (Eigen::Index i = 0; i < s.size(); ++i) out << format_utc_hour(s.time(i)) << ',' << format_shortest(s.values[i]) << '\n';
}

void write_series_csv(const TimeSeries& s, const std::string& header, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_series_csv(s, header, out);
}

ForcingSeries load_forcing(const std::filesystem::path& precip_csv, const std::filesystem::path& pet_csv,
                           double dt_hours) {
  ForcingSeries f;
  const TimeSeries pet = load_series_csv(pet_csv, kPetHeader);
  f.start = pet.start;
  f.dt_hours = pet.dt_hours;
  f.pet = pet.values;

  std::ifstream in(precip_csv);
  if (!in) throw std::runtime_error("cannot open " + precip_csv.string());
  std::string first;
  std::streampos begin = in.tellg();
  while (std::getline(in, first)) {
    first = strip_cr(first);
    if (!first.empty() && first.front() != '#') break;
  }
  in.clear();
  in.seekg(begin);

  UtcHour precip_start{};
  Eigen::Index precip_len = 0;
  if (first == kPrecipGridHeader) {
    const auto rows = read_rows(in, kPrecipGridHeader, precip_csv.string());
    precip_start = rows.front().t;
    precip_len = static_cast<Eigen::Index>(rows.size());
    if (rows.size() >= 2 && spacing(rows) != f.dt_hours) {
      throw ConfigError("precipitation and PET series have different spacing");
    }
    for (const auto& row : rows) {
      Grid g = load_ascii_grid(precip_csv.parent_path() / row.value);
      for (CellIndex i = 0; i < g.size(); ++i) {
        if (g.is_nodata(i)) continue;
        if (!std::isfinite(g[i]) || g[i] < 0) {
          throw ParseError(precip_csv.string(), row.line, "precipitation grid " + row.value + " has negative or NaN cells");
        }
      }
      if (!f.precip_grids.empty() && !g.geometry().same_shape(f.precip_grids.front().geometry())) {
        throw ParseError(precip_csv.string(), row.line, "precipitation grid shape changes between steps");
      }
      f.precip_grids.push_back(std::move(g));
    }
  } else {
    const TimeSeries p = read_series_csv(in, kPrecipHeader, precip_csv.string());
    precip_start = p.start;
    precip_len = p.size();
    if (p.size() >= 2 && p.dt_hours != f.dt_hours) throw ConfigError("precipitation and PET series have different spacing");
    f.precip = p.values;
  }

  if (precip_start != f.start || precip_len != f.pet.size()) {
    throw ConfigError("precipitation and PET series must share the same timestamps");
  }
  if (f.size() >= 2 && f.dt_hours != dt_hours) {
    throw ConfigError("forcing spacing " + format_shortest(f.dt_hours) + " h does not match timestep_hours " +
                      format_shortest(dt_hours));
  }
  f.dt_hours = dt_hours;
  return f;
}

}  // namespace hydrocal
