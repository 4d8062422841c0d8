#include "hydrocal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hydrocal/errors.hpp"

namespace hydrocal {
namespace {

void check_pair(const SeriesRef& obs, const SeriesRef& sim, Eigen::Index min_len) {
  if (obs.size() != sim.size()) throw UndefinedMetric("series lengths differ");
  if (obs.size() < min_len) throw UndefinedMetric("series too short");
}

Eigen::Index argmax_first(const SeriesRef& q) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i) {
    if (q[i] > q[best]) best = i;
  }
  return best;
}

Eigen::ArrayXd select(const SeriesRef& q, const std::vector<Eigen::Index>& idx) {
  Eigen::ArrayXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = q[idx[k]];
  return out;
}

template <typename F>
auto optional_of(F&& f) -> std::optional<decltype(f())> {
  try {
    auto v = f();
    if (!std::isfinite(static_cast<double>(v))) return std::nullopt;
    return v;
  } catch (const UndefinedMetric&) {
    return std::nullopt;
  }
}

}  // namespace

double nse(const SeriesRef& obs, const SeriesRef& sim) {
  check_pair(obs, sim, 2);
  const double mean = obs.mean();
  const double denom = (obs - mean).square().sum();
  if (!(denom > 0.0)) throw UndefinedMetric("NSE undefined: observed series has zero variance");
  return 1.0 - (obs - sim).square().sum() / denom;
}

KgeComponents kge_components(const SeriesRef& obs, const SeriesRef& sim) {
  check_pair(obs, sim, 2);
  const double mo = obs.mean();
  const double ms = sim.mean();
  if (!(mo > 0.0)) throw UndefinedMetric("KGE undefined: observed mean is not positive");
  const Eigen::ArrayXd dobs = obs - mo;
  const Eigen::ArrayXd dsim = sim - ms;
  const double so = std::sqrt(dobs.square().mean());
  const double ss = std::sqrt(dsim.square().mean());
  if (!(so > 0.0) || !(ss > 0.0)) throw UndefinedMetric("KGE undefined: zero variance");
  KgeComponents k;
  k.r = (dobs * dsim).mean() / (so * ss);
  k.alpha = ss / so;
  k.beta = ms / mo;
  k.kge = 1.0 - std::sqrt((k.r - 1) * (k.r - 1) + (k.alpha - 1) * (k.alpha - 1) + (k.beta - 1) * (k.beta - 1));
  return k;
}

PeakLag peak_and_lag(const SeriesRef& obs, const SeriesRef& sim, double dt_hours) {
  if (obs.size() == 0 || sim.size() == 0) throw std::invalid_argument("peak_and_lag needs non-empty series");
  const auto io = argmax_first(obs);
  const auto is = argmax_first(sim);
  PeakLag p;
  if (obs[io] != 0.0) p.peak_ratio = sim[is] / obs[io];
  p.peak_error_cms = sim[is] - obs[io];
  p.lag_hours = static_cast<double>(is - io) * dt_hours;
  return p;
}

std::optional<double> recession_slope(const SeriesRef& q, double dt_hours) {
  if (q.size() < 3) return std::nullopt;
  const auto peak = argmax_first(q);
  Eigen::Index best_start = -1, best_len = 0;
  Eigen::Index start = peak;
  while (start < q.size()) {
    Eigen::Index end = start;
    while (end + 1 < q.size() && q[end + 1] < q[end] && q[end + 1] > 0.0) ++end;
    const Eigen::Index len = q[start] > 0.0 ? end - start + 1 : 0;
    if (len > best_len) {
      best_len = len;
      best_start = start;
    }
    start = end + 1;
  }
  if (best_len < 3) return std::nullopt;
  const Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(best_len, 0.0, static_cast<double>(best_len - 1)) * dt_hours;
  const Eigen::ArrayXd y = q.segment(best_start, best_len).log();
  const Eigen::ArrayXd dt = t - t.mean();
  return (dt * (y - y.mean())).sum() / dt.square().sum();
}

double percentile(const SeriesRef& q, double fraction) {
  if (q.size() == 0) throw std::invalid_argument("percentile of an empty series");
  std::vector<double> v(q.data(), q.data() + q.size());
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(fraction, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

int event_count(const SeriesRef& q, double baseflow, double dt_hours, double min_gap_hours) {
  std::vector<Eigen::Index> peaks;
  for (Eigen::Index t = 1; t + 1 < q.size(); ++t) {
    if (!(q[t] > q[t - 1] && q[t] >= q[t + 1] && q[t] >= 2.0 * baseflow)) continue;
    if (!peaks.empty() && static_cast<double>(t - peaks.back()) * dt_hours < min_gap_hours) {
      if (q[t] > q[peaks.back()]) peaks.back() = t;
      continue;
    }
    peaks.push_back(t);
  }
  return static_cast<int>(peaks.size());
}

double time_to_peak_hours(const SeriesRef& q, double dt_hours) {
  if (q.size() == 0) return 0.0;
  const auto peak = argmax_first(q);
  Eigen::Index low = peak;
  for (Eigen::Index i = peak; i >= 0; --i) {
    if (q[i] < q[low]) low = i;
  }
  return static_cast<double>(peak - low) * dt_hours;
}

Signatures signatures(const SeriesRef& obs, const SeriesRef& sim, double dt_hours) {
  if (obs.size() == 0 || obs.size() != sim.size()) throw std::invalid_argument("signatures need equal non-empty series");
  Signatures s;
  const double total_obs = obs.sum();
  if (!(total_obs > 0.0)) throw UndefinedMetric("volume ratio undefined: observed volume is zero");
  s.volume_ratio = sim.sum() / total_obs;
  s.recession_slope_sim = recession_slope(sim, dt_hours);
  s.recession_slope_obs = recession_slope(obs, dt_hours);
  s.time_to_peak_hours = time_to_peak_hours(sim, dt_hours);
  s.baseflow_cms = percentile(sim, 0.25);
  s.event_count = event_count(sim, s.baseflow_cms, dt_hours);
  return s;
}

Band moriasi_band(double v) {
  if (std::isnan(v)) throw std::invalid_argument("Moriasi band of NaN");
  if (v <= 0.50) return Band::unsatisfactory;
  if (v <= 0.70) return Band::satisfactory;
  if (v <= 0.85) return Band::good;
  return Band::very_good;
}

std::string_view to_string(Band band) {
  switch (band) {
    case Band::unsatisfactory: return "unsatisfactory";
    case Band::satisfactory: return "satisfactory";
    case Band::good: return "good";
    case Band::very_good: return "very_good";
  }
  return "unknown";
}

MetricPanel metric_panel(const SeriesRef& obs, const SeriesRef& sim, double dt_hours) {
  MetricPanel m;
  if (obs.size() != sim.size() || obs.size() == 0) return m;

  m.nse = optional_of([&] { return nse(obs, sim); });
  if (m.nse) m.band = moriasi_band(*m.nse);
  try {
    const auto c = kge_components(obs, sim);
    if (std::isfinite(c.kge)) {
      m.kge = c.kge;
      m.kge_r = c.r;
      m.kge_alpha = c.alpha;
      m.kge_beta = c.beta;
    }
  } catch (const UndefinedMetric&) {
  }
  m.rmse = optional_of([&] { return std::sqrt((obs - sim).square().mean()); });
  m.pbias = optional_of([&] {
    const double total = obs.sum();
    if (!(total > 0.0)) throw UndefinedMetric("percent bias undefined");
    return 100.0 * (sim - obs).sum() / total;
  });

  const PeakLag pl = peak_and_lag(obs, sim, dt_hours);
  if (pl.peak_ratio && std::isfinite(*pl.peak_ratio)) m.peak_ratio = pl.peak_ratio;
  m.peak_error_cms = pl.peak_error_cms;
  m.lag_hours = pl.lag_hours;

  if (obs.sum() > 0.0) m.volume_ratio = optional_of([&] { return sim.sum() / obs.sum(); });
  m.recession_slope_sim = recession_slope(sim, dt_hours);
  m.recession_slope_obs = recession_slope(obs, dt_hours);
  m.time_to_peak_hours = time_to_peak_hours(sim, dt_hours);
  m.baseflow_cms = percentile(sim, 0.25);
  m.event_count = event_count(sim, *m.baseflow_cms, dt_hours);

  const double p90 = percentile(obs, 0.90);
  const double p50 = percentile(obs, 0.50);
  std::vector<Eigen::Index> high, low;
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    if (obs[i] > p90) high.push_back(i);
    if (obs[i] < p50) low.push_back(i);
  }
  m.kge_high = optional_of([&] { return kge_components(select(obs, high), select(sim, high)).kge; });
  m.kge_low = optional_of([&] { return kge_components(select(obs, low), select(sim, low)).kge; });
  return m;
}

nlohmann::ordered_json to_json(const MetricPanel& m) {
  nlohmann::ordered_json j;
  auto put = [&](const char* key, const auto& v) {
    if (v) {
      j[key] = *v;
    } else {
      j[key] = nullptr;
    }
  };
  put("nse", m.nse);
  put("kge", m.kge);
  put("kge_r", m.kge_r);
  put("kge_alpha", m.kge_alpha);
  put("kge_beta", m.kge_beta);
  put("rmse", m.rmse);
  put("pbias", m.pbias);
  put("peak_ratio", m.peak_ratio);
  put("peak_error_cms", m.peak_error_cms);
  put("lag_hours", m.lag_hours);
  put("volume_ratio", m.volume_ratio);
  put("recession_slope_sim", m.recession_slope_sim);
  put("recession_slope_obs", m.recession_slope_obs);
  put("time_to_peak_hours", m.time_to_peak_hours);
  put("baseflow_cms", m.baseflow_cms);
  put("event_count", m.event_count);
  if (m.band) {
    j["band"] = std::string(to_string(*m.band));
  } else {
    j["band"] = nullptr;
  }
  put("kge_high", m.kge_high);
  put("kge_low", m.kge_low);
  return j;
}

}  // namespace hydrocal
