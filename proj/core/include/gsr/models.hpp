#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsr/diff/ops.hpp"
#include "gsr/diff/parameter_store.hpp"
#include "gsr/rng.hpp"
#include "gsr/types.hpp"

namespace gsr::models {

using diff::Activation;
using diff::ParameterStore;
using diff::Tensor;

struct TcnConfig {
  std::size_t kernel_size = 7;
  std::size_t hidden_channels = 8;
  std::size_t levels = 3;
  double dropout = 0.5;

  void validate(std::string_view context = "model.tcn") const;
  /// 1 + 2*(K-1)*(2^levels - 1): two convolutions per block.
  std::size_t receptive_field() const;
};

struct ModelConfig {
  TcnConfig tcn;
  /// Graph layers in the denoiser: depth-1 hidden layers plus the output layer.
  std::size_t depth = 2;

  void validate(std::string_view context = "model") const;
};

/// Where the denoiser's adjacency comes from. The first two are the learned
/// generators; the others are the fixed baselines.
enum class GraphSource { reference, observation, true_structure, correlation, features };

std::string_view to_string(GraphSource s);
GraphSource graph_source_from_string(std::string_view s);
/// Prefixes used in checkpoints ("gref"/"dref" or "gobs"/"dobs").
std::string_view generator_prefix(GraphSource s);
std::string_view denoiser_prefix(GraphSource s);
/// Activation applied to the preliminary adjacency for learned sources.
Activation generator_activation(GraphSource s);

// ---------------------------------------------------------------------------
// Adjacency post-processing

/// activation -> (M + M^T)/2 -> zero diagonal -> D^{-1/2} M D^{-1/2}.
/// Works on [N,N] and batched [S,N,N] tensors.
Tensor postprocess(const Tensor& raw, Activation activation);
Adjacency postprocess(const Matrix& raw, Activation activation);

Adjacency to_adjacency(const Tensor& a);
Tensor to_tensor(const Matrix& m);
/// Stacks windows into [S,N,W].
Tensor stack_windows(const std::vector<const SignalWindow*>& windows);

// ---------------------------------------------------------------------------
// Temporal convolutional network

/// Residual stack of dilated causal convolutions mapping [B,W] -> [B,W].
///
/// Channel plan is 1 -> H -> ... -> H -> 1 across `levels` blocks. Each block
/// is conv-relu-dropout twice plus a skip path that is the identity when the
/// channel counts match and a 1x1 convolution otherwise.
class Tcn {
 public:
  /// Registers freshly initialized parameters under `prefix`.
  static Tcn create(ParameterStore& store, const std::string& prefix, const TcnConfig& config,
                    Rng& init_rng);
  /// Binds to parameters already present in `store`.
  static Tcn bind(ParameterStore& store, const std::string& prefix, const TcnConfig& config);

  /// `rng` supplies dropout seeds and is required when training.
  Tensor forward(const Tensor& series, bool training, Rng* rng) const;

  const TcnConfig& config() const { return config_; }

 private:
  struct Block {
    Tensor conv1_weight, conv1_bias, conv2_weight, conv2_bias;
    std::optional<Tensor> skip_weight, skip_bias;
    int dilation = 1;
  };
  static Tcn build(ParameterStore& store, const std::string& prefix, const TcnConfig& config,
                   Rng* init_rng);

  TcnConfig config_;
  std::vector<Block> blocks_;
};

// ---------------------------------------------------------------------------
// Graph generators

/// Static adjacency fully parameterized by a raw N x N matrix.
class ReferenceGenerator {
 public:
  static ReferenceGenerator create(ParameterStore& store, std::size_t nodes);
  static ReferenceGenerator bind(ParameterStore& store);

  /// Ignores any input features.
  Tensor forward() const;
  Tensor& raw() { return raw_; }

 private:
  Tensor raw_;
};

/// Per-window adjacency from the dot-product similarity of TCN embeddings.
class ObservationGenerator {
 public:
  static ObservationGenerator create(ParameterStore& store, const TcnConfig& config,
                                     Rng& init_rng);
  static ObservationGenerator bind(ParameterStore& store, const TcnConfig& config);

  /// x is [N,W] or [S,N,W]; returns [N,N] or [S,N,N].
  Tensor forward(const Tensor& x, bool training, Rng* rng) const;
  const Tcn& tcn() const { return tcn_; }

 private:
  Tcn tcn_;
};

/// Same post-processing as the observation generator with the TCN removed.
Tensor feature_similarity(const Tensor& x);

// ---------------------------------------------------------------------------
// Denoiser

/// Graph-TCN denoising network: hidden layers X + relu(TCN(A X)) followed by
/// an output layer TCN(A X) without the residual term.
class Denoiser {
 public:
  static Denoiser create(ParameterStore& store, const std::string& prefix,
                         const ModelConfig& config, Rng& init_rng);
  static Denoiser bind(ParameterStore& store, const std::string& prefix,
                       const ModelConfig& config);

  /// x is [N,W] or [S,N,W]; a is [N,N] (shared) or [S,N,N].
  Tensor forward(const Tensor& x, const Tensor& a, bool training, Rng* rng) const;
  Tensor hidden_layer(std::size_t layer, const Tensor& x, const Tensor& a, bool training,
                      Rng* rng) const;
  Tensor output_layer(const Tensor& x, const Tensor& a, bool training, Rng* rng) const;

  std::size_t depth() const { return layers_.size(); }

 private:
  Tensor apply_tcn(const Tcn& tcn, const Tensor& x, bool training, Rng* rng) const;
  std::vector<Tcn> layers_;
};

// ---------------------------------------------------------------------------
// Full model: adjacency source + denoiser + parameters

class GsrModel {
 public:
  GsrModel(GsrModel&&) = default;
  GsrModel& operator=(GsrModel&&) = default;
  // Copies would alias the same parameter storage.
  GsrModel(const GsrModel&) = delete;
  GsrModel& operator=(const GsrModel&) = delete;

  /// Learned sources register generator parameters; baselines only a denoiser.
  /// `fixed` must be given for true_structure and correlation.
  static GsrModel create(GraphSource source, const ModelConfig& config, std::size_t nodes,
                         std::uint64_t seed, std::optional<Adjacency> fixed = std::nullopt);

  GraphSource source() const { return source_; }
  const ModelConfig& config() const { return config_; }
  std::size_t nodes() const { return nodes_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  /// Adjacency for a batch of clean windows x ([S,N,W]); [N,N] for static
  /// sources, [S,N,N] for per-window sources.
  Tensor adjacency(const Tensor& x, bool training, Rng* rng) const;
  Tensor denoise(const Tensor& noisy, const Tensor& a, bool training, Rng* rng) const;

  /// Evaluation-mode helpers.
  Adjacency adjacency_for(const SignalWindow& window) const;
  /// Static adjacency; throws for per-window sources.
  Adjacency static_adjacency() const;
  SignalWindow denoise_window(const SignalWindow& noisy, const SignalWindow& clean) const;

  nlohmann::json to_json() const;
  static GsrModel from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static GsrModel load(const std::filesystem::path& path);

 private:
  GsrModel() = default;
  void bind_modules();

  GraphSource source_ = GraphSource::reference;
  ModelConfig config_;
  std::size_t nodes_ = 0;
  ParameterStore store_;
  std::optional<ReferenceGenerator> reference_;
  std::optional<ObservationGenerator> observation_;
  std::optional<Denoiser> denoiser_;
  std::optional<Adjacency> fixed_;
};

void to_json(nlohmann::json& j, const TcnConfig& c);
void from_json(const nlohmann::json& j, TcnConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// ---------------------------------------------------------------------------
// Single-window convenience wrappers

Adjacency gen_reference(const ReferenceGenerator& gen);
std::vector<double> tcn_forward(std::span<const double> series, const Tcn& tcn, bool training,
                                Rng* rng);
Adjacency gen_observation(const SignalWindow& x, const ObservationGenerator& gen);
SignalWindow denoise(const SignalWindow& noisy, const Adjacency& a, const Denoiser& den,
                     bool training, Rng* rng);

}  // namespace gsr::models
