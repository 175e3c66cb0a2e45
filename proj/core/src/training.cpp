#include "gsr/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gsr/config_error.hpp"
#include "gsr/diff/adam.hpp"
#include "gsr/parallel.hpp"
#include "gsr/rng.hpp"

namespace gsr::training {

using diff::Tensor;
using models::stack_windows;

namespace {

constexpr std::size_t kEvalBatch = 64;

std::vector<const SignalWindow*> pointers(const std::vector<SignalWindow>& windows,
                                          const std::vector<std::size_t>& idx, std::size_t begin,
                                          std::size_t end) {
  std::vector<const SignalWindow*> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(&windows[idx[i]]);
  return out;
}

std::vector<const SignalWindow*> pointers(const std::vector<SignalWindow>& windows,
                                          std::size_t begin, std::size_t end) {
  std::vector<const SignalWindow*> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(&windows[i]);
  return out;
}

double probe_loss(const GsrModel& model, const std::vector<SignalWindow>& probe_clean,
                  const std::vector<SignalWindow>& probe_noisy) {
  diff::NoGradGuard guard;
  Tensor clean = stack_windows(pointers(probe_clean, 0, probe_clean.size()));
  Tensor noisy = stack_windows(pointers(probe_noisy, 0, probe_noisy.size()));
  Tensor a = model.adjacency(clean, false, nullptr);
  return diff::mse_loss(model.denoise(noisy, a, false, nullptr), clean).item();
}

}  // namespace

void TrainConfig::validate(std::string_view context) const {
  const std::string c(context);
  if (epochs < 1) throw ConfigError(c + ".epochs", "must be >= 1");
  if (batch_size < 1) throw ConfigError(c + ".batch_size", "must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError(c + ".learning_rate", "must be positive and finite");
  }
  noise.validate(c + ".noise");
}

TrainResult train(GsrModel model, const std::vector<SignalWindow>& dataset,
                  const TrainConfig& config) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (model.source() != config.model_kind) {
    throw std::invalid_argument("train: model source does not match model_kind");
  }
  tune_allocator();

  Rng shuffle_rng(derive_seed(config.seed, stream::kShuffle));
  Rng noise_rng(derive_seed(config.seed, stream::kTrainingNoise));
  Rng dropout_rng(derive_seed(config.seed, stream::kDropout));

  const std::size_t probe_size = std::min(config.batch_size, dataset.size());
  std::vector<SignalWindow> probe_clean(dataset.begin(),
                                        dataset.begin() + static_cast<long>(probe_size));
  std::vector<SignalWindow> probe_noisy;
  const std::uint64_t probe_seed = derive_seed(config.seed, stream::kValidationNoise);
  for (std::size_t i = 0; i < probe_size; ++i) {
    probe_noisy.push_back(kuramoto::add_noise(probe_clean[i], config.noise,
                                              derive_seed(probe_seed, i)));
  }

  TrainResult result{std::move(model), {}, 0.0, 0.0, 0};
  GsrModel& m = result.model;
  result.probe_loss_initial = probe_loss(m, probe_clean, probe_noisy);

  diff::ParameterStore& params = m.parameters();
  params.ensure_grads();
  diff::AdamState adam(diff::AdamConfig{config.learning_rate});

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<SignalWindow> noisy;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(shuffle_rng)]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      auto clean_ptrs = pointers(dataset, order, begin, end);
      noisy.clear();
      for (const SignalWindow* w : clean_ptrs) {
        noisy.push_back(kuramoto::add_noise(*w, config.noise, noise_rng()));
      }
      Tensor clean = stack_windows(clean_ptrs);
      Tensor noisy_t = stack_windows(pointers(noisy, 0, noisy.size()));
      Tensor a = m.adjacency(clean, true, &dropout_rng);
      Tensor loss = diff::mse_loss(m.denoise(noisy_t, a, true, &dropout_rng), clean);
      diff::backward(loss);
      adam.step(params);
      loss_sum += loss.item();
      ++batches;
      ++result.optimizer_steps;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  result.probe_loss_final = probe_loss(m, probe_clean, probe_noisy);
  return result;
}

TrainResult train(const std::vector<SignalWindow>& dataset, const TrainConfig& config,
                  const models::ModelConfig& model_config, std::optional<Adjacency> fixed) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  GsrModel model = GsrModel::create(config.model_kind, model_config, dataset.front().nodes(),
                                    config.seed, std::move(fixed));
  return train(std::move(model), dataset, config);
}

double reconstruction_error(const GsrModel& model, const std::vector<SignalWindow>& dataset,
                            const NoiseConfig& noise, std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("reconstruction_error: empty dataset");
  diff::NoGradGuard guard;
  double total = 0.0;
  std::vector<SignalWindow> noisy;
  for (std::size_t begin = 0; begin < dataset.size(); begin += kEvalBatch) {
    const std::size_t end = std::min(dataset.size(), begin + kEvalBatch);
    noisy.clear();
    for (std::size_t i = begin; i < end; ++i) {
      noisy.push_back(kuramoto::add_noise(dataset[i], noise, derive_seed(seed, i)));
    }
    Tensor clean = stack_windows(pointers(dataset, begin, end));
    Tensor a = model.adjacency(clean, false, nullptr);
    Tensor out = model.denoise(stack_windows(pointers(noisy, 0, noisy.size())), a, false, nullptr);
    // Equal window sizes: sum of per-window MSEs = batch MSE times batch size.
    total += diff::mse_loss(out, clean).item() * static_cast<double>(end - begin);
  }
  return total / static_cast<double>(dataset.size());
}

double adjacency_error(const Adjacency& a, const CouplingMatrix& c) {
  const std::size_t n = a.n();
  if (c.n() != n || a.values.cols() != n || c.values.cols() != n) {
    throw diff::DimensionError("adjacency_error: shape mismatch");
  }
  if (n < 2) return 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      lo = std::min(lo, a.values(i, j));
      hi = std::max(hi, a.values(i, j));
    }
  }
  const double range = hi - lo;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double scaled = range > 0.0 ? (a.values(i, j) - lo) / range : 0.0;
      const double target = c.values(i, j) != 0.0 ? 1.0 : 0.0;
      total += std::abs(scaled - target);
    }
  }
  return total / static_cast<double>(n * (n - 1));
}

double adjacency_error(const GsrModel& model, const std::vector<SignalWindow>& dataset,
                       const CouplingMatrix& c) {
  if (model.source() != GraphSource::observation && model.source() != GraphSource::features) {
    return adjacency_error(model.static_adjacency(), c);
  }
  if (dataset.empty()) throw std::invalid_argument("adjacency_error: empty dataset");
  diff::NoGradGuard guard;
  const std::size_t n = model.nodes();
  double total = 0.0;
  for (std::size_t begin = 0; begin < dataset.size(); begin += kEvalBatch) {
    const std::size_t end = std::min(dataset.size(), begin + kEvalBatch);
    Tensor a = model.adjacency(stack_windows(pointers(dataset, begin, end)), false, nullptr);
    const auto data = a.data();
    for (std::size_t s = 0; s < end - begin; ++s) {
      Adjacency one{Matrix(n, n, std::vector<double>(data.begin() + static_cast<long>(s * n * n),
                                                     data.begin() + static_cast<long>((s + 1) * n * n)))};
      total += adjacency_error(one, c);
    }
  }
  return total / static_cast<double>(dataset.size());
}

Adjacency baseline_true(const CouplingMatrix& c) {
  Matrix out = c.values;
  double hi = 0.0;
  for (double v : out.values()) hi = std::max(hi, v);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = hi > 0.0 ? out(i, j) / hi : 0.0;
  }
  return {out};
}

Adjacency baseline_correlation(const std::vector<SignalWindow>& train) {
  if (train.empty()) throw std::invalid_argument("baseline_correlation: empty dataset");
  const std::size_t n = train.front().nodes();
  Matrix acc(n, n);
  std::vector<double> centered;
  std::vector<double> norms(n);
  for (const SignalWindow& x : train) {
    if (x.nodes() != n) throw diff::DimensionError("baseline_correlation: node count mismatch");
    const std::size_t w = x.length();
    centered.assign(n * w, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double mu = 0.0;
      for (std::size_t t = 0; t < w; ++t) mu += x.values(i, t);
      mu /= static_cast<double>(w);
      double ss = 0.0;
      for (std::size_t t = 0; t < w; ++t) {
        const double d = x.values(i, t) - mu;
        centered[i * w + t] = d;
        ss += d * d;
      }
      norms[i] = std::sqrt(ss);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (norms[i] == 0.0 || norms[j] == 0.0) continue;
        double dot = 0.0;
        for (std::size_t t = 0; t < w; ++t) dot += centered[i * w + t] * centered[j * w + t];
        const double r = std::min(1.0, std::abs(dot / (norms[i] * norms[j])));
        acc(i, j) += r;
        acc(j, i) += r;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) acc(i, j) /= static_cast<double>(train.size());
  }
  return {acc};
}

Adjacency baseline_features(const SignalWindow& x) {
  diff::NoGradGuard guard;
  return models::to_adjacency(models::feature_similarity(models::to_tensor(x.values)));
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  kuramoto.validate();
  noise.validate();
  model.validate();
  if (runs < 1) throw ConfigError("train.runs", "must be >= 1");
  train_config(GraphSource::reference, 0).validate("train");
}

TrainConfig ExperimentConfig::train_config(GraphSource source, std::uint64_t seed) const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.learning_rate = learning_rate;
  t.noise = noise;
  t.seed = seed;
  t.model_kind = source;
  return t;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"kuramoto", c.kuramoto},
       {"noise", c.noise},
       {"model", c.model},
       {"train",
        {{"runs", c.runs},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate}}}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  reject_unknown_keys(j, "", {"kuramoto", "noise", "model", "train"});
  if (j.contains("kuramoto")) c.kuramoto = j.at("kuramoto").get<kuramoto::KuramotoConfig>();
  if (j.contains("noise")) c.noise = j.at("noise").get<NoiseConfig>();
  if (j.contains("model")) c.model = j.at("model").get<models::ModelConfig>();
  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown_keys(t, "train", {"runs", "epochs", "batch_size", "learning_rate"});
    read_optional(t, "runs", c.runs, "train");
    read_optional(t, "epochs", c.epochs, "train");
    read_optional(t, "batch_size", c.batch_size, "train");
    read_optional(t, "learning_rate", c.learning_rate, "train");
  }
}

const std::vector<RowSpec>& table_rows() {
  static const std::vector<RowSpec> rows = {
      {"reference", "True", GraphSource::true_structure},
      {"reference", "Correlation", GraphSource::correlation},
      {"reference", "G_ref", GraphSource::reference},
      {"observation", "Features", GraphSource::features},
      {"observation", "G_obs", GraphSource::observation},
  };
  return rows;
}

const RowResult& SeedOutcome::row(GraphSource s) const {
  for (const auto& r : rows) {
    if (r.source == s) return r;
  }
  throw std::out_of_range("seed outcome has no row '" + std::string(models::to_string(s)) + "'");
}

const GsrModel& SeedOutcome::model(GraphSource s) const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].source == s) return models[i];
  }
  throw std::out_of_range("seed outcome has no model '" + std::string(models::to_string(s)) + "'");
}

TrainResult train_source(const kuramoto::Dataset& data, const CouplingMatrix& coupling,
                         const ExperimentConfig& config, GraphSource source, std::uint64_t seed) {
  std::optional<Adjacency> fixed;
  if (source == GraphSource::true_structure) fixed = baseline_true(coupling);
  if (source == GraphSource::correlation) fixed = baseline_correlation(data.train);
  return train(data.train, config.train_config(source, seed), config.model, std::move(fixed));
}

RowResult evaluate(const GsrModel& model, const std::vector<SignalWindow>& val,
                   const CouplingMatrix& coupling, const NoiseConfig& noise, std::uint64_t seed) {
  RowResult row;
  row.source = model.source();
  row.e_adj = adjacency_error(model, val, coupling);
  row.e_rec = reconstruction_error(model, val, noise, derive_seed(seed, stream::kValidationNoise));
  return row;
}

std::vector<SeedOutcome> run_experiment(const ExperimentConfig& config,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::vector<GraphSource>& sources,
                                        std::size_t threads) {
  config.validate();
  if (seeds.empty()) throw std::invalid_argument("run_experiment: no seeds");
  tune_allocator();
  const CouplingMatrix coupling = kuramoto::build_two_cluster_coupling(config.kuramoto);

  std::vector<kuramoto::Dataset> datasets(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t s) {
    kuramoto::KuramotoConfig k = config.kuramoto;
    k.seed = seeds[s];
    datasets[s] = kuramoto::make_training_dataset(k, coupling, config.runs);
  });

  struct Job {
    std::optional<RowResult> row;
    std::optional<GsrModel> model;
  };
  std::vector<Job> jobs(seeds.size() * sources.size());
  parallel_for(jobs.size(), threads, [&](std::size_t idx) {
    const std::size_t s = idx / sources.size();
    const GraphSource source = sources[idx % sources.size()];
    TrainResult trained = train_source(datasets[s], coupling, config, source, seeds[s]);
    RowResult row = evaluate(trained.model, datasets[s].val, coupling, config.noise, seeds[s]);
    row.epoch_loss = std::move(trained.epoch_loss);
    row.probe_loss_initial = trained.probe_loss_initial;
    row.probe_loss_final = trained.probe_loss_final;
    jobs[idx].row = std::move(row);
    jobs[idx].model.emplace(std::move(trained.model));
  });

  std::vector<SeedOutcome> out(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    out[s].seed = seeds[s];
    for (std::size_t k = 0; k < sources.size(); ++k) {
      Job& job = jobs[s * sources.size() + k];
      out[s].rows.push_back(std::move(*job.row));
      out[s].models.push_back(std::move(*job.model));
    }
  }
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

MetricsReport aggregate(const std::vector<SeedOutcome>& outcomes) {
  MetricsReport report;
  for (const auto& o : outcomes) report.seeds.push_back(o.seed);
  for (const RowSpec& spec : table_rows()) {
    MetricsRow row{spec.goal, spec.configuration, spec.source, {}, {}, 0, 0, 0, 0};
    bool present = false;
    for (const auto& o : outcomes) {
      for (const auto& r : o.rows) {
        if (r.source != spec.source) continue;
        present = true;
        row.e_adj.push_back(r.e_adj);
        row.e_rec.push_back(r.e_rec);
      }
    }
    if (!present) continue;
    std::tie(row.e_adj_mean, row.e_adj_std) = mean_std(row.e_adj);
    std::tie(row.e_rec_mean, row.e_rec_std) = mean_std(row.e_rec);
    report.rows.push_back(std::move(row));
  }
  return report;
}

const MetricsRow& MetricsReport::row(GraphSource s) const {
  for (const auto& r : rows) {
    if (r.source == s) return r;
  }
  throw std::out_of_range("report has no row '" + std::string(models::to_string(s)) + "'");
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"goal", r.goal},
                   {"configuration", r.configuration},
                   {"e_adj_mean", r.e_adj_mean},
                   {"e_adj_std", r.e_adj_std},
                   {"e_rec_mean", r.e_rec_mean},
                   {"e_rec_std", r.e_rec_std}});
  }
  return out;
}

std::string MetricsReport::per_seed_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "seed,configuration,e_adj,e_rec\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.e_adj.size(); ++i) {
      os << seeds.at(i) << ',' << r.configuration << ',' << r.e_adj[i] << ',' << r.e_rec[i]
         << '\n';
    }
  }
  return os.str();
}

MetricsReport run_seeds(const ExperimentConfig& config, const std::vector<std::uint64_t>& seeds) {
  std::vector<GraphSource> sources;
  for (const auto& spec : table_rows()) sources.push_back(spec.source);
  return aggregate(run_experiment(config, seeds, sources, worker_count()));
}

}  // namespace gsr::training
