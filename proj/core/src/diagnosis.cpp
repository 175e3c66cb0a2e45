#include "gsr/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "gsr/config_error.hpp"
#include "gsr/diff/tensor.hpp"
#include "gsr/io.hpp"
#include "gsr/parallel.hpp"
#include "gsr/rng.hpp"

namespace gsr::diagnosis {

namespace {

// Off-diagonal min-max rescale; constant matrices map to zero.
Matrix rescale_off_diagonal(const Matrix& m) {
  const std::size_t n = m.rows();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      lo = std::min(lo, m(i, j));
      hi = std::max(hi, m(i, j));
    }
  }
  Matrix out(n, n);
  const double range = hi - lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) out(i, j) = (m(i, j) - lo) / range;
    }
  }
  return out;
}

}  // namespace

SignalWindow WindowSet::window(std::size_t i) const {
  return {source.values.columns(starts.at(i), starts.at(i) + length)};
}

WindowSet collect_windows(const SignalMatrix& signal, std::size_t start, std::size_t end,
                          std::size_t stride, std::size_t window) {
  if (window < 1) throw std::invalid_argument("collect_windows: window must be >= 1");
  if (stride < 1) throw std::invalid_argument("collect_windows: stride must be >= 1");
  if (end < start || end - start < window) {
    throw std::invalid_argument("collect_windows: region [" + std::to_string(start) + "," +
                                std::to_string(end) + ") is shorter than the window " +
                                std::to_string(window));
  }
  if (end > signal.values.cols()) {
    throw std::invalid_argument("collect_windows: region end " + std::to_string(end) +
                                " exceeds signal length " +
                                std::to_string(signal.values.cols()));
  }
  WindowSet ws;
  ws.length = window;
  ws.source = signal;
  for (std::size_t s = start; s + window <= end; s += stride) ws.starts.push_back(s);
  return ws;
}

Adjacency average_observation(const WindowSet& windows, const GsrModel& observation) {
  if (windows.count() == 0) throw std::invalid_argument("average_observation: no windows");
  const std::size_t n = windows.source.values.rows();
  Matrix acc(n, n);
  for (std::size_t w = 0; w < windows.count(); ++w) {
    const Adjacency a = observation.adjacency_for(windows.window(w));
    for (std::size_t k = 0; k < acc.values().size(); ++k) acc.values()[k] += a.values.values()[k];
  }
  for (double& v : acc.values()) v /= static_cast<double>(windows.count());
  return {acc};
}

ResidualMatrix residual(const Adjacency& reference, const Adjacency& observation, double tau) {
  const std::size_t n = reference.n();
  if (observation.n() != n || reference.values.cols() != n || observation.values.cols() != n) {
    throw std::invalid_argument("residual: dimension mismatch");
  }
  if (!(tau >= 0.0)) throw std::invalid_argument("residual: tau must be >= 0");
  const Matrix a = rescale_off_diagonal(reference.values);
  const Matrix b = rescale_off_diagonal(observation.values);
  ResidualMatrix r{Matrix(n, n), tau};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::abs(a(i, j) - b(i, j));
      r.values(i, j) = d < tau ? 0.0 : d;
    }
  }
  return r;
}

std::vector<std::size_t> FaultReport::ranked_nodes() const {
  std::vector<std::size_t> idx(node_scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return node_scores[a] > node_scores[b]; });
  return idx;
}

FaultReport rank_faults(const ResidualMatrix& r) {
  const std::size_t n = r.values.rows();
  FaultReport rep;
  rep.node_scores.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) rep.node_scores[i] += r.values(i, j);
    for (std::size_t j = i + 1; j < n; ++j) rep.ranked_edges.push_back({i, j, r.values(i, j)});
  }
  // Edges are generated in lexicographic order, so a stable sort breaks ties by (i,j).
  std::stable_sort(rep.ranked_edges.begin(), rep.ranked_edges.end(),
                   [](const RankedEdge& a, const RankedEdge& b) { return a.residual > b.residual; });
  return rep;
}

WindowPolicy::Resolved WindowPolicy::resolve(std::size_t window) const {
  Resolved r{start.value_or(2 * window), end.value_or(5 * window),
             stride.value_or(std::max<std::size_t>(1, window / 4))};
  return r;
}

void DiagnosisConfig::validate(std::string_view context) const {
  const std::string c(context);
  if (tau && !(*tau >= 0.0 && std::isfinite(*tau))) {
    throw ConfigError(c + ".tau", "must be finite and >= 0");
  }
  if (policy.stride && *policy.stride < 1) throw ConfigError(c + ".stride", "must be >= 1");
  if (policy.start && policy.end && *policy.end <= *policy.start) {
    throw ConfigError(c + ".region", "end must exceed start");
  }
  if (calibration_runs < 1) throw ConfigError(c + ".calibration_runs", "must be >= 1");
  if (!(calibration_quantile >= 0.0 && calibration_quantile <= 1.0)) {
    throw ConfigError(c + ".calibration_quantile", "must lie in [0,1]");
  }
  if (!(calibration_margin >= 0.0) || !std::isfinite(calibration_margin)) {
    throw ConfigError(c + ".calibration_margin", "must be finite and >= 0");
  }
}

void to_json(nlohmann::json& j, const DiagnosisConfig& c) {
  j = {{"calibration_runs", c.calibration_runs},
       {"calibration_quantile", c.calibration_quantile},
       {"calibration_margin", c.calibration_margin}};
  if (c.tau) j["tau"] = *c.tau;
  if (c.policy.stride) j["stride"] = *c.policy.stride;
  if (c.policy.start || c.policy.end) {
    j["region"] = {c.policy.start ? nlohmann::json(*c.policy.start) : nlohmann::json(nullptr),
                   c.policy.end ? nlohmann::json(*c.policy.end) : nlohmann::json(nullptr)};
  }
}

void from_json(const nlohmann::json& j, DiagnosisConfig& c) {
  reject_unknown_keys(j, "diagnosis",
                      {"tau", "stride", "region", "calibration_runs", "calibration_quantile",
                       "calibration_margin"});
  if (j.contains("tau") && !j.at("tau").is_null()) {
    double tau = 0.0;
    read_optional(j, "tau", tau, "diagnosis");
    c.tau = tau;
  }
  if (j.contains("stride") && !j.at("stride").is_null()) {
    std::size_t stride = 0;
    read_optional(j, "stride", stride, "diagnosis");
    c.policy.stride = stride;
  }
  if (j.contains("region") && !j.at("region").is_null()) {
    const auto& r = j.at("region");
    if (!r.is_array() || r.size() != 2) {
      throw ConfigError("diagnosis.region", "expected [start, end]");
    }
    try {
      if (!r[0].is_null()) c.policy.start = r[0].get<std::size_t>();
      if (!r[1].is_null()) c.policy.end = r[1].get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("diagnosis.region", std::string("wrong type (") + e.what() + ")");
    }
  }
  read_optional(j, "calibration_runs", c.calibration_runs, "diagnosis");
  read_optional(j, "calibration_quantile", c.calibration_quantile, "diagnosis");
  read_optional(j, "calibration_margin", c.calibration_margin, "diagnosis");
}

Diagnosis diagnose(const SignalMatrix& signal, const GsrModel& reference,
                   const GsrModel& observation, double tau, const WindowPolicy& policy,
                   std::size_t window) {
  const auto p = policy.resolve(window);
  Diagnosis d;
  d.windows = collect_windows(signal, p.start, p.end, p.stride, window);
  d.reference = reference.static_adjacency();
  d.observation_avg = average_observation(d.windows, observation);
  d.raw = residual(d.reference, d.observation_avg, 0.0);
  d.thresholded = residual(d.reference, d.observation_avg, tau);
  d.report = rank_faults(d.raw);
  for (const RankedEdge& e : rank_faults(d.thresholded).ranked_edges) {
    if (e.residual > 0.0) d.flagged.push_back(e);
  }
  return d;
}

std::vector<ResidualMatrix> healthy_residuals(const kuramoto::KuramotoConfig& config,
                                              const CouplingMatrix& coupling,
                                              const GsrModel& reference,
                                              const GsrModel& observation,
                                              const WindowPolicy& policy, std::size_t runs) {
  std::vector<ResidualMatrix> out(runs);
  const kuramoto::FaultSpec none = kuramoto::Explicit{coupling};
  parallel_for(runs, worker_count(), [&](std::size_t r) {
    const auto run = kuramoto::make_diagnosis_run(config, coupling, none,
                                                  derive_seed(stream::kCalibrationRuns, r));
    out[r] = diagnose(run.signal, reference, observation, 0.0, policy, config.window).raw;
  });
  return out;
}

std::string_view to_string(FaultCase c) {
  switch (c) {
    case FaultCase::healthy: return "healthy";
    case FaultCase::decoupling: return "decoupling";
    case FaultCase::swap: return "swap";
  }
  throw std::logic_error("unreachable");
}

FaultCase fault_case_from_string(std::string_view s) {
  if (s == "healthy") return FaultCase::healthy;
  if (s == "decoupling") return FaultCase::decoupling;
  if (s == "swap") return FaultCase::swap;
  throw std::invalid_argument("unknown case '" + std::string(s) + "'");
}

kuramoto::FaultSpec fault_for(FaultCase c, const CouplingMatrix& coupling) {
  switch (c) {
    case FaultCase::healthy: return kuramoto::Explicit{coupling};
    case FaultCase::decoupling: return kuramoto::Decouple{0};
    case FaultCase::swap: return kuramoto::Swap{0, coupling.n() - 1};
  }
  throw std::logic_error("unreachable");
}

double resolve_tau(const DiagnosisConfig& config, const kuramoto::KuramotoConfig& kuramoto,
                   const CouplingMatrix& coupling, const GsrModel& reference,
                   const GsrModel& observation) {
  if (config.tau) return *config.tau;
  const auto healthy = healthy_residuals(kuramoto, coupling, reference, observation,
                                         config.policy, config.calibration_runs);
  return calibrate_tau(healthy, config.calibration_quantile, config.calibration_margin);
}

double calibrate_tau(const std::vector<ResidualMatrix>& healthy, double quantile, double margin) {
  if (healthy.empty()) throw std::invalid_argument("calibrate_tau: no healthy residuals");
  if (!(quantile >= 0.0 && quantile <= 1.0)) {
    throw std::invalid_argument("calibrate_tau: quantile must lie in [0,1]");
  }
  std::vector<double> maxima;
  for (const auto& r : healthy) {
    double m = 0.0;
    for (double v : r.values.values()) m = std::max(m, v);
    maxima.push_back(m);
  }
  std::sort(maxima.begin(), maxima.end());
  const double pos = quantile * static_cast<double>(maxima.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, maxima.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return maxima[lo] + frac * (maxima[hi] - maxima[lo]) + margin;
}

nlohmann::json report_json(const Diagnosis& d, const WindowPolicy::Resolved& policy) {
  auto edges = [](const std::vector<RankedEdge>& list) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : list) out.push_back({{"i", e.i}, {"j", e.j}, {"residual", e.residual}});
    return out;
  };
  return {{"tau", d.thresholded.tau},
          {"window_policy",
           {{"start", policy.start},
            {"end", policy.end},
            {"stride", policy.stride},
            {"length", d.windows.length},
            {"count", d.windows.count()}}},
          {"ranked_edges", edges(d.report.ranked_edges)},
          {"node_scores", d.report.node_scores},
          {"ranked_nodes", d.report.ranked_nodes()},
          {"flagged_edges", edges(d.flagged)}};
}

void write_outputs(const std::filesystem::path& dir, const Diagnosis& d,
                   const WindowPolicy::Resolved& policy) {
  std::filesystem::create_directories(dir);
  io::write_csv(dir / "residual.csv", d.thresholded.values);
  io::write_json(dir / "report.json", report_json(d, policy));
  io::write_pgm(dir / "reference.pgm", d.reference.values);
  io::write_pgm(dir / "observation_avg.pgm", d.observation_avg.values);
  io::write_pgm(dir / "residual.pgm", d.thresholded.values);
}

}  // namespace gsr::diagnosis
