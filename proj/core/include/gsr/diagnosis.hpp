#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsr/kuramoto.hpp"
#include "gsr/models.hpp"
#include "gsr/types.hpp"

namespace gsr::diagnosis {

using models::GsrModel;

struct WindowSet {
  std::vector<std::size_t> starts;
  std::size_t length = 0;
  SignalMatrix source;

  std::size_t count() const { return starts.size(); }
  SignalWindow window(std::size_t i) const;
};

/// Windows [s, s+W) for s = start, start+stride, ... that fit inside [start, end).
WindowSet collect_windows(const SignalMatrix& signal, std::size_t start, std::size_t end,
                          std::size_t stride, std::size_t window);

/// Mean of the observation adjacencies over all windows, summed in window order.
Adjacency average_observation(const WindowSet& windows, const GsrModel& observation);

struct ResidualMatrix {
  Matrix values;
  double tau = 0.0;
};

/// |minmax(A_ref) - minmax(A_obs)| off-diagonal, entries below tau zeroed.
ResidualMatrix residual(const Adjacency& reference, const Adjacency& observation, double tau);

struct RankedEdge {
  std::size_t i = 0;
  std::size_t j = 0;
  double residual = 0.0;
};

struct FaultReport {
  std::vector<RankedEdge> ranked_edges;  // upper triangle, descending
  std::vector<double> node_scores;

  /// Node indices by descending score, ties by index.
  std::vector<std::size_t> ranked_nodes() const;
};

FaultReport rank_faults(const ResidualMatrix& r);

/// Unset fields resolve against the window length W: region [2W, 5W), stride W/4.
struct WindowPolicy {
  std::optional<std::size_t> start;
  std::optional<std::size_t> end;
  std::optional<std::size_t> stride;

  struct Resolved {
    std::size_t start, end, stride;
  };
  Resolved resolve(std::size_t window) const;
};

struct DiagnosisConfig {
  WindowPolicy policy;
  /// Fixed threshold; calibrated from healthy runs when unset.
  std::optional<double> tau;
  std::size_t calibration_runs = 20;
  /// Quantile of the per-run maximum healthy residual.
  double calibration_quantile = 0.99;
  /// Added to the quantile.
  double calibration_margin = 0.0;

  void validate(std::string_view context = "diagnosis") const;
};

void to_json(nlohmann::json& j, const DiagnosisConfig& c);
void from_json(const nlohmann::json& j, DiagnosisConfig& c);

struct Diagnosis {
  WindowSet windows;
  Adjacency reference;
  Adjacency observation_avg;
  /// Unthresholded residual; the ranking is computed from it.
  ResidualMatrix raw;
  /// Residual at the diagnosis tau; its nonzero upper-triangle entries are flagged.
  ResidualMatrix thresholded;
  FaultReport report;
  std::vector<RankedEdge> flagged;
};

Diagnosis diagnose(const SignalMatrix& signal, const GsrModel& reference,
                   const GsrModel& observation, double tau, const WindowPolicy& policy,
                   std::size_t window);

/// Unthresholded residuals of no-fault diagnosis runs drawn from a stream
/// disjoint from the regular diagnosis runs.
std::vector<ResidualMatrix> healthy_residuals(const kuramoto::KuramotoConfig& config,
                                              const CouplingMatrix& coupling,
                                              const GsrModel& reference,
                                              const GsrModel& observation,
                                              const WindowPolicy& policy, std::size_t runs);

/// Linear-interpolated quantile of the per-run maximum off-diagonal residual, plus margin.
double calibrate_tau(const std::vector<ResidualMatrix>& healthy, double quantile,
                     double margin = 0.0);

enum class FaultCase { healthy, decoupling, swap };
std::string_view to_string(FaultCase c);
FaultCase fault_case_from_string(std::string_view s);
/// healthy: the unperturbed coupling; decoupling: node 0; swap: nodes 0 and n-1.
kuramoto::FaultSpec fault_for(FaultCase c, const CouplingMatrix& coupling);

/// config.tau when set, otherwise calibrated on config.calibration_runs healthy runs.
double resolve_tau(const DiagnosisConfig& config, const kuramoto::KuramotoConfig& kuramoto,
                   const CouplingMatrix& coupling, const GsrModel& reference,
                   const GsrModel& observation);

nlohmann::json report_json(const Diagnosis& d, const WindowPolicy::Resolved& policy);

/// residual.csv, report.json, reference.pgm, observation_avg.pgm, residual.pgm.
void write_outputs(const std::filesystem::path& dir, const Diagnosis& d,
                   const WindowPolicy::Resolved& policy);

}  // namespace gsr::diagnosis
