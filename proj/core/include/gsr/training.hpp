#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsr/kuramoto.hpp"
#include "gsr/models.hpp"
#include "gsr/types.hpp"

namespace gsr::training {

using kuramoto::NoiseConfig;
using models::GraphSource;
using models::GsrModel;

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  GraphSource model_kind = GraphSource::reference;

  void validate(std::string_view context = "training") const;
};

struct TrainResult {
  GsrModel model;
  /// Mean batch loss per epoch.
  std::vector<double> epoch_loss;
  /// Eval-mode loss on a fixed probe batch before and after training.
  double probe_loss_initial = 0.0;
  double probe_loss_final = 0.0;
  std::size_t optimizer_steps = 0;
};

/// Trains `model` in place on clean windows. model.source() must match
/// config.model_kind.
TrainResult train(GsrModel model, const std::vector<SignalWindow>& dataset,
                  const TrainConfig& config);

/// Creates a fresh model of config.model_kind seeded by config.seed and trains it.
TrainResult train(const std::vector<SignalWindow>& dataset, const TrainConfig& config,
                  const models::ModelConfig& model_config,
                  std::optional<Adjacency> fixed = std::nullopt);

/// Mean over the dataset of MSE(denoised, clean), dropout off. Window i is
/// corrupted with noise seeded by derive_seed(seed, i).
double reconstruction_error(const GsrModel& model, const std::vector<SignalWindow>& dataset,
                            const NoiseConfig& noise, std::uint64_t seed);

/// Mean absolute off-diagonal difference between min-max rescaled A and binarized C.
double adjacency_error(const Adjacency& a, const CouplingMatrix& c);

/// Mean of adjacency_error over the per-window adjacencies of the dataset.
double adjacency_error(const GsrModel& model, const std::vector<SignalWindow>& dataset,
                       const CouplingMatrix& c);

Adjacency baseline_true(const CouplingMatrix& c);
/// Mean absolute Pearson correlation over samples, zero diagonal.
Adjacency baseline_correlation(const std::vector<SignalWindow>& train);
Adjacency baseline_features(const SignalWindow& x);

// ---------------------------------------------------------------------------
// Multi-seed experiment

struct ExperimentConfig {
  kuramoto::KuramotoConfig kuramoto;
  NoiseConfig noise;
  models::ModelConfig model;
  /// Simulated runs per seed; each yields one training and one validation window.
  std::size_t runs = 500;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;

  void validate() const;
  TrainConfig train_config(GraphSource source, std::uint64_t seed) const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Display rows in table order: True, Correlation, G_ref, Features, G_obs.
struct RowSpec {
  std::string goal;
  std::string configuration;
  GraphSource source;
};
const std::vector<RowSpec>& table_rows();

struct RowResult {
  GraphSource source;
  double e_adj = 0.0;
  double e_rec = 0.0;
  std::vector<double> epoch_loss;
  double probe_loss_initial = 0.0;
  double probe_loss_final = 0.0;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<RowResult> rows;
  /// Trained models, parallel to rows.
  std::vector<GsrModel> models;

  const RowResult& row(GraphSource s) const;
  const GsrModel& model(GraphSource s) const;
};

/// Trains one configuration of the table; baselines get their fixed adjacency here.
TrainResult train_source(const kuramoto::Dataset& data, const CouplingMatrix& coupling,
                         const ExperimentConfig& config, GraphSource source, std::uint64_t seed);
/// Validation metrics with noise seeded by derive_seed(seed, kValidationNoise).
RowResult evaluate(const GsrModel& model, const std::vector<SignalWindow>& val,
                   const CouplingMatrix& coupling, const NoiseConfig& noise, std::uint64_t seed);

/// Simulates a dataset for one seed, trains every requested configuration and
/// evaluates it on the validation split. Jobs run on up to `threads` workers.
std::vector<SeedOutcome> run_experiment(const ExperimentConfig& config,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::vector<GraphSource>& sources,
                                        std::size_t threads);

struct MetricsRow {
  std::string goal;
  std::string configuration;
  GraphSource source;
  std::vector<double> e_adj;  // per seed
  std::vector<double> e_rec;
  double e_adj_mean = 0.0, e_adj_std = 0.0;
  double e_rec_mean = 0.0, e_rec_std = 0.0;
};

struct MetricsReport {
  std::vector<std::uint64_t> seeds;
  std::vector<MetricsRow> rows;

  const MetricsRow& row(GraphSource s) const;
  nlohmann::json to_json() const;
  /// seed,configuration,e_adj,e_rec
  std::string per_seed_csv() const;
};

/// Population mean and standard deviation (std = 0 for a single value).
std::pair<double, double> mean_std(const std::vector<double>& values);

MetricsReport aggregate(const std::vector<SeedOutcome>& outcomes);

MetricsReport run_seeds(const ExperimentConfig& config, const std::vector<std::uint64_t>& seeds);

}  // namespace gsr::training
