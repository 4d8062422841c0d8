#include "hydrocal/control.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "hydrocal/numfmt.hpp"

namespace hydrocal {

bool SimulationConfig::Baselines::any() const {
  if (drain) return true;
  for (const auto& s : scalars) {
    if (s) return true;
  }
  return false;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Entry {
  std::string value;
  int line;
};

class ControlParser {
 public:
  explicit ControlParser(std::string source) : source_(std::move(source)) {}

  SimulationConfig parse(std::istream& in) {
    read_entries(in);
    SimulationConfig cfg;
    parse_basic(cfg);
    parse_grids(cfg);
    parse_baselines(cfg);
    parse_params(cfg);
    parse_gauge(cfg);
    parse_forcing(cfg);
    parse_window(cfg);
    return cfg;
  }

 private:
  using Section = std::map<std::string, Entry>;

  static const std::map<std::string, std::vector<std::string>>& allowed_keys() {
    static const std::map<std::string, std::vector<std::string>> keys = [] {
      std::map<std::string, std::vector<std::string>> k;
      k["Basic"] = {"timestep_hours", "warmup_hours"};
      k["Grids"] = {"dem", "flowdir", "mask"};
      k["Baselines"] = {"drain"};
      for (auto n : kBaselineNames) {
        k["Grids"].emplace_back(n);
        k["Baselines"].emplace_back(n);
      }
      for (const auto& s : kParamSpecs) k["CrestParams"].emplace_back(s.name);
      k["Gauge"] = {"id", "outlet_row", "outlet_col", "obs_csv", "target_nse", "basin_area_km2"};
      k["Forcing"] = {"precip_csv", "pet_csv"};
      k["Window"] = {"start", "end"};
      return k;
    }();
    return keys;
  }

  void read_entries(std::istream& in) {
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string line = trim(raw);
      last_line_ = line_no;
      if (line.empty() || line.front() == '#') continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError(source_, line_no, "malformed section header '" + line + "'");
        section = trim(std::string_view(line).substr(1, line.size() - 2));
        if (!allowed_keys().count(section)) throw ParseError(source_, line_no, "unknown section [" + section + "]");
        if (!section_lines_.emplace(section, line_no).second) {
          throw ParseError(source_, line_no,
                           "duplicate section [" + section + "] (first at line " +
                               std::to_string(section_lines_[section]) + ")");
        }
        sections_[section];
        continue;
      }
      if (section.empty()) throw ParseError(source_, line_no, "key outside of any section");
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(source_, line_no, "expected key=value");
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      const auto& keys = allowed_keys().at(section);
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        throw ParseError(source_, line_no, "unknown key '" + key + "' in [" + section + "]");
      }
      auto [it, inserted] = sections_[section].emplace(key, Entry{value, line_no});
      if (!inserted) {
        throw ParseError(source_, line_no,
                         "duplicate key '" + key + "' in [" + section + "] at lines " + std::to_string(it->second.line) +
                             " and " + std::to_string(line_no));
      }
    }
  }

  const Entry* find(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto e = s->second.find(key);
    return e == s->second.end() ? nullptr : &e->second;
  }

  const Entry& require(const std::string& section, const std::string& key) const {
    if (const auto* e = find(section, key)) return *e;
    if (!sections_.count(section)) throw ParseError(source_, last_line_, "missing section [" + section + "]");
    throw ParseError(source_, section_lines_.at(section), "missing required key '" + key + "' in [" + section + "]");
  }

  double real(const Entry& e, const std::string& key) const {
    double v = 0;
    if (!parse_double(e.value, v) || !std::isfinite(v)) {
      throw ParseError(source_, e.line, key + " must be a finite number, got '" + e.value + "'");
    }
    return v;
  }

  long integer(const Entry& e, const std::string& key) const {
    long v = 0;
    if (!parse_int(e.value, v)) throw ParseError(source_, e.line, key + " must be an integer, got '" + e.value + "'");
    return v;
  }

  std::string text(const Entry& e, const std::string& key) const {
    if (e.value.empty()) throw ParseError(source_, e.line, key + " must not be empty");
    return e.value;
  }

  UtcHour timestamp(const Entry& e, const std::string& key) const {
    try {
      return parse_utc_hour(e.value);
    } catch (const std::invalid_argument& ex) {
      throw ParseError(source_, e.line, key + ": " + ex.what());
    }
  }

  void parse_basic(SimulationConfig& cfg) const {
    const auto& ts = require("Basic", "timestep_hours");
    cfg.basic.timestep_hours = real(ts, "timestep_hours");
    if (cfg.basic.timestep_hours < 1.0 || std::floor(cfg.basic.timestep_hours) != cfg.basic.timestep_hours) {
      throw ParseError(source_, ts.line, "timestep_hours must be a whole number of hours >= 1");
    }
    if (const auto* w = find("Basic", "warmup_hours")) {
      const double v = real(*w, "warmup_hours");
      if (v < 0 || std::fmod(v, cfg.basic.timestep_hours) != 0.0) {
        throw ParseError(source_, w->line, "warmup_hours must be a non-negative multiple of timestep_hours");
      }
      cfg.basic.warmup_hours = v;
    }
  }

  void parse_grids(SimulationConfig& cfg) const {
    cfg.grids.flowdir = text(require("Grids", "flowdir"), "flowdir");
    if (const auto* e = find("Grids", "dem")) cfg.grids.dem = text(*e, "dem");
    if (const auto* e = find("Grids", "mask")) cfg.grids.mask = text(*e, "mask");
    for (std::size_t i = 0; i < kBaselineNames.size(); ++i) {
      const std::string key(kBaselineNames[i]);
      if (const auto* e = find("Grids", key)) cfg.grids.rasters[i] = text(*e, key);
    }
  }

  void parse_baselines(SimulationConfig& cfg) const {
    auto check = [&](const Entry& e, const std::string& key, double lo, double hi) {
      const double v = real(e, key);
      if (v < lo || v > hi) {
        throw ParseError(source_, e.line,
                         "baseline " + key + "=" + e.value + " outside [" + format_bound(lo) + "," + format_bound(hi) + "]");
      }
      return v;
    };
    for (std::size_t i = 0; i < kBaselineNames.size(); ++i) {
      const std::string key(kBaselineNames[i]);
      const auto* e = find("Baselines", key);
      if (!e) continue;
      const bool fraction = key == "im";
      cfg.baselines.scalars[i] = fraction ? check(*e, key, 0.0, 1.0) : check(*e, key, 0.0, 1e12);
      if (key == "wm" && *cfg.baselines.scalars[i] <= 0.0) throw ParseError(source_, e->line, "baseline wm must be positive");
    }
    if (const auto* e = find("Baselines", "drain")) cfg.baselines.drain = check(*e, "drain", 0.0, 1.0);
  }

  void parse_params(SimulationConfig& cfg) const {
    for (const auto& s : kParamSpecs) {
      const std::string key(s.name);
      const auto& e = require("CrestParams", key);
      const double v = real(e, key);
      if (v < s.lo || v > s.hi) {
        throw ControlBoundsError(source_, e.line,
                                 key + "=" + e.value + " outside [" + format_bound(s.lo) + "," + format_bound(s.hi) + "]");
      }
      cfg.params[s.id] = v;
    }
  }

  void parse_gauge(SimulationConfig& cfg) const {
    cfg.gauge.id = text(require("Gauge", "id"), "id");
    const auto& r = require("Gauge", "outlet_row");
    const auto& c = require("Gauge", "outlet_col");
    cfg.gauge.outlet_row = integer(r, "outlet_row");
    cfg.gauge.outlet_col = integer(c, "outlet_col");
    if (cfg.gauge.outlet_row < 0) throw ParseError(source_, r.line, "outlet_row must be >= 0");
    if (cfg.gauge.outlet_col < 0) throw ParseError(source_, c.line, "outlet_col must be >= 0");
    if (const auto* e = find("Gauge", "obs_csv")) cfg.gauge.obs_csv = text(*e, "obs_csv");
    if (const auto* e = find("Gauge", "target_nse")) cfg.gauge.target_nse = real(*e, "target_nse");
    if (const auto* e = find("Gauge", "basin_area_km2")) {
      cfg.gauge.basin_area_km2 = real(*e, "basin_area_km2");
      if (*cfg.gauge.basin_area_km2 <= 0) throw ParseError(source_, e->line, "basin_area_km2 must be positive");
    }
  }

  void parse_forcing(SimulationConfig& cfg) const {
    cfg.forcing.precip_csv = text(require("Forcing", "precip_csv"), "precip_csv");
    cfg.forcing.pet_csv = text(require("Forcing", "pet_csv"), "pet_csv");
  }

  void parse_window(SimulationConfig& cfg) const {
    cfg.window.start = timestamp(require("Window", "start"), "start");
    const auto& end = require("Window", "end");
    cfg.window.end = timestamp(end, "end");
    if (cfg.window.end < cfg.window.start) throw ParseError(source_, end.line, "window end precedes start");
  }

  std::string source_;
  std::map<std::string, Section> sections_;
  std::map<std::string, int> section_lines_;
  int last_line_ = 0;
};

}  // namespace

SimulationConfig parse_control(std::istream& in, const std::string& source) {
  return ControlParser(source).parse(in);
}

SimulationConfig parse_control_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open control file " + path.string());
  return parse_control(in, path.string());
}

std::string format_control(const SimulationConfig& cfg) {
  std::ostringstream out;
  auto kv = [&](std::string_view key, const std::string& value) { out << key << '=' << value << '\n'; };

  out << "[Basic]\n";
  kv("timestep_hours", format_shortest(cfg.basic.timestep_hours));
  if (cfg.basic.warmup_hours) kv("warmup_hours", format_shortest(*cfg.basic.warmup_hours));

  out << "\n[Grids]\n";
  if (cfg.grids.dem) kv("dem", *cfg.grids.dem);
  kv("flowdir", cfg.grids.flowdir);
  if (cfg.grids.mask) kv("mask", *cfg.grids.mask);
  for (std::size_t i = 0; i < kBaselineNames.size(); ++i) {
    if (cfg.grids.rasters[i]) kv(kBaselineNames[i], *cfg.grids.rasters[i]);
  }

  if (cfg.baselines.any()) {
    out << "\n[Baselines]\n";
    for (std::size_t i = 0; i < kBaselineNames.size(); ++i) {
      if (cfg.baselines.scalars[i]) kv(kBaselineNames[i], format_shortest(*cfg.baselines.scalars[i]));
    }
    if (cfg.baselines.drain) kv("drain", format_shortest(*cfg.baselines.drain));
  }

  out << "\n[CrestParams]\n";
  for (const auto& s : kParamSpecs) kv(s.name, format_shortest(cfg.params[s.id]));

  out << "\n[Gauge]\n";
  kv("id", cfg.gauge.id);
  kv("outlet_row", std::to_string(cfg.gauge.outlet_row));
  kv("outlet_col", std::to_string(cfg.gauge.outlet_col));
  if (cfg.gauge.obs_csv) kv("obs_csv", *cfg.gauge.obs_csv);
  if (cfg.gauge.target_nse) kv("target_nse", format_shortest(*cfg.gauge.target_nse));
  if (cfg.gauge.basin_area_km2) kv("basin_area_km2", format_shortest(*cfg.gauge.basin_area_km2));

  out << "\n[Forcing]\n";
  kv("precip_csv", cfg.forcing.precip_csv);
  kv("pet_csv", cfg.forcing.pet_csv);

  out << "\n[Window]\n";
  kv("start", format_utc_hour(cfg.window.start));
  kv("end", format_utc_hour(cfg.window.end));
  return out.str();
}

void write_control_file(const SimulationConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write control file " + path.string());
  out << format_control(cfg);
}

}  // namespace hydrocal
