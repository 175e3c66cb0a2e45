#include "gsr/models.hpp"

#include <cmath>
#include <stdexcept>

#include "gsr/config_error.hpp"
#include "gsr/io.hpp"

namespace gsr::models {

using diff::Shape;

namespace {

constexpr double kInitStd = 0.01;

std::vector<double> normal_init(std::size_t n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, kInitStd);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

Tensor& add_or_bind(ParameterStore& store, const std::string& name, Shape shape, Rng* rng,
                    bool zero) {
  if (!rng) {
    Tensor& t = store.at(name);
    if (t.shape() != shape) {
      throw diff::DimensionError("parameter '" + name + "' has shape " +
                                 diff::shape_to_string(t.shape()) + ", expected " +
                                 diff::shape_to_string(shape));
    }
    return t;
  }
  const std::size_t n = diff::shape_numel(shape);
  return store.add(name, std::move(shape),
                   zero ? std::vector<double>(n, 0.0) : normal_init(n, *rng));
}

std::uint64_t next_seed(Rng* rng) {
  if (!rng) throw std::invalid_argument("training-mode forward needs a dropout RNG");
  return (*rng)();
}

}  // namespace

// ---------------------------------------------------------------------------

void TcnConfig::validate(std::string_view context) const {
  const std::string c(context);
  if (kernel_size < 2) throw ConfigError(c + ".kernel_size", "must be >= 2");
  if (levels < 1) throw ConfigError(c + ".levels", "must be >= 1");
  if (levels > 16) throw ConfigError(c + ".levels", "must be <= 16");
  if (hidden_channels < 1) throw ConfigError(c + ".hidden_channels", "must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError(c + ".dropout", "must lie in [0,1)");
}

std::size_t TcnConfig::receptive_field() const {
  return 1 + 2 * (kernel_size - 1) * ((std::size_t{1} << levels) - 1);
}

void ModelConfig::validate(std::string_view context) const {
  tcn.validate(std::string(context) + ".tcn");
  if (depth < 1) throw ConfigError(std::string(context) + ".depth", "must be >= 1");
}

std::string_view to_string(GraphSource s) {
  switch (s) {
    case GraphSource::reference: return "reference";
    case GraphSource::observation: return "observation";
    case GraphSource::true_structure: return "true";
    case GraphSource::correlation: return "correlation";
    case GraphSource::features: return "features";
  }
  return "?";
}

GraphSource graph_source_from_string(std::string_view s) {
  if (s == "reference") return GraphSource::reference;
  if (s == "observation") return GraphSource::observation;
  if (s == "true") return GraphSource::true_structure;
  if (s == "correlation") return GraphSource::correlation;
  if (s == "features") return GraphSource::features;
  throw std::invalid_argument("unknown graph source '" + std::string(s) + "'");
}

std::string_view generator_prefix(GraphSource s) {
  return s == GraphSource::observation ? "gobs" : "gref";
}

std::string_view denoiser_prefix(GraphSource s) {
  return (s == GraphSource::observation || s == GraphSource::features) ? "dobs" : "dref";
}

Activation generator_activation(GraphSource s) {
  return (s == GraphSource::observation || s == GraphSource::features) ? Activation::sigmoid
                                                                      : Activation::elu_plus_one;
}

// ---------------------------------------------------------------------------

Tensor postprocess(const Tensor& raw, Activation activation) {
  return diff::degree_normalize(diff::zero_diagonal(diff::symmetrize(diff::pointwise(raw, activation))));
}

Adjacency postprocess(const Matrix& raw, Activation activation) {
  diff::NoGradGuard guard;
  return to_adjacency(postprocess(to_tensor(raw), activation));
}

Adjacency to_adjacency(const Tensor& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw diff::DimensionError("to_adjacency: expected [N,N], got " +
                               diff::shape_to_string(a.shape()));
  }
  return {Matrix(a.dim(0), a.dim(1), std::vector<double>(a.data().begin(), a.data().end()))};
}

Tensor to_tensor(const Matrix& m) { return Tensor::from({m.rows(), m.cols()}, m.values()); }

Tensor stack_windows(const std::vector<const SignalWindow*>& windows) {
  if (windows.empty()) throw std::invalid_argument("stack_windows: empty batch");
  const std::size_t n = windows.front()->nodes();
  const std::size_t w = windows.front()->length();
  std::vector<double> data;
  data.reserve(windows.size() * n * w);
  for (const auto* win : windows) {
    if (win->nodes() != n || win->length() != w) {
      throw diff::DimensionError("stack_windows: inconsistent window shapes");
    }
    data.insert(data.end(), win->values.values().begin(), win->values.values().end());
  }
  return Tensor::from({windows.size(), n, w}, std::move(data));
}

// ---------------------------------------------------------------------------

Tcn Tcn::create(ParameterStore& store, const std::string& prefix, const TcnConfig& config,
                Rng& init_rng) {
  return build(store, prefix, config, &init_rng);
}

Tcn Tcn::bind(ParameterStore& store, const std::string& prefix, const TcnConfig& config) {
  return build(store, prefix, config, nullptr);
}

Tcn Tcn::build(ParameterStore& store, const std::string& prefix, const TcnConfig& config,
               Rng* init_rng) {
  config.validate();
  Tcn tcn;
  tcn.config_ = config;
  const std::size_t h = config.hidden_channels;
  const std::size_t k = config.kernel_size;
  for (std::size_t level = 0; level < config.levels; ++level) {
    const std::size_t in = level == 0 ? 1 : h;
    const std::size_t out = level + 1 == config.levels ? 1 : h;
    const std::string p = prefix + ".block" + std::to_string(level);
    Block b;
    b.dilation = 1 << level;
    b.conv1_weight = add_or_bind(store, p + ".conv1.weight", {out, in, k}, init_rng, false);
    b.conv1_bias = add_or_bind(store, p + ".conv1.bias", {out}, init_rng, true);
    b.conv2_weight = add_or_bind(store, p + ".conv2.weight", {out, out, k}, init_rng, false);
    b.conv2_bias = add_or_bind(store, p + ".conv2.bias", {out}, init_rng, true);
    if (in != out) {
      b.skip_weight = add_or_bind(store, p + ".skip.weight", {out, in, 1}, init_rng, false);
      b.skip_bias = add_or_bind(store, p + ".skip.bias", {out}, init_rng, true);
    }
    tcn.blocks_.push_back(std::move(b));
  }
  return tcn;
}

Tensor Tcn::forward(const Tensor& series, bool training, Rng* rng) const {
  if (series.rank() != 2) {
    throw diff::DimensionError("Tcn::forward: expected [B,W], got " +
                               diff::shape_to_string(series.shape()));
  }
  const std::size_t batch = series.dim(0);
  const std::size_t len = series.dim(1);
  const double p = config_.dropout;
  auto drop = [&](const Tensor& t) {
    return training && p > 0.0 ? diff::dropout(t, p, true, next_seed(rng)) : t;
  };

  Tensor x = diff::reshape(series, {batch, 1, len});
  for (const Block& b : blocks_) {
    Tensor h = drop(diff::pointwise(
        diff::causal_conv1d(x, b.conv1_weight, b.conv1_bias, b.dilation), Activation::relu));
    h = drop(diff::pointwise(
        diff::causal_conv1d(h, b.conv2_weight, b.conv2_bias, b.dilation), Activation::relu));
    Tensor skip = b.skip_weight ? diff::causal_conv1d(x, *b.skip_weight, *b.skip_bias, 1) : x;
    x = diff::add(h, skip);
  }
  return diff::reshape(x, {batch, len});
}

// ---------------------------------------------------------------------------

ReferenceGenerator ReferenceGenerator::create(ParameterStore& store, std::size_t nodes) {
  ReferenceGenerator g;
  g.raw_ = store.add("gref.raw", {nodes, nodes}, std::vector<double>(nodes * nodes, 0.0));
  return g;
}

ReferenceGenerator ReferenceGenerator::bind(ParameterStore& store) {
  ReferenceGenerator g;
  g.raw_ = store.at("gref.raw");
  return g;
}

Tensor ReferenceGenerator::forward() const { return postprocess(raw_, Activation::elu_plus_one); }

ObservationGenerator ObservationGenerator::create(ParameterStore& store, const TcnConfig& config,
                                                  Rng& init_rng) {
  ObservationGenerator g;
  g.tcn_ = Tcn::create(store, "gobs.tcn", config, init_rng);
  return g;
}

ObservationGenerator ObservationGenerator::bind(ParameterStore& store, const TcnConfig& config) {
  ObservationGenerator g;
  g.tcn_ = Tcn::bind(store, "gobs.tcn", config);
  return g;
}

namespace {

// Applies a TCN to every node series of an [N,W] or [S,N,W] tensor.
Tensor per_node(const Tcn& tcn, const Tensor& x, bool training, Rng* rng) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw diff::DimensionError("expected [N,W] or [S,N,W], got " +
                               diff::shape_to_string(x.shape()));
  }
  const std::size_t len = x.shape().back();
  const std::size_t rows = x.numel() / len;
  Tensor flat = x.rank() == 2 ? x : diff::reshape(x, {rows, len});
  Tensor out = tcn.forward(flat, training, rng);
  return x.rank() == 2 ? out : diff::reshape(out, x.shape());
}

}  // namespace

Tensor ObservationGenerator::forward(const Tensor& x, bool training, Rng* rng) const {
  Tensor embedded = per_node(tcn_, x, training, rng);
  return postprocess(diff::matmul(embedded, diff::transpose(embedded)), Activation::sigmoid);
}

Tensor feature_similarity(const Tensor& x) {
  return postprocess(diff::matmul(x, diff::transpose(x)), Activation::sigmoid);
}

// ---------------------------------------------------------------------------

Denoiser Denoiser::create(ParameterStore& store, const std::string& prefix,
                          const ModelConfig& config, Rng& init_rng) {
  config.validate();
  Denoiser d;
  for (std::size_t l = 0; l < config.depth; ++l) {
    d.layers_.push_back(
        Tcn::create(store, prefix + ".layer" + std::to_string(l), config.tcn, init_rng));
  }
  return d;
}

Denoiser Denoiser::bind(ParameterStore& store, const std::string& prefix,
                        const ModelConfig& config) {
  config.validate();
  Denoiser d;
  for (std::size_t l = 0; l < config.depth; ++l) {
    d.layers_.push_back(Tcn::bind(store, prefix + ".layer" + std::to_string(l), config.tcn));
  }
  return d;
}

Tensor Denoiser::apply_tcn(const Tcn& tcn, const Tensor& x, bool training, Rng* rng) const {
  return per_node(tcn, x, training, rng);
}

Tensor Denoiser::hidden_layer(std::size_t layer, const Tensor& x, const Tensor& a, bool training,
                              Rng* rng) const {
  Tensor aggregated = diff::matmul(a, x);
  Tensor update = apply_tcn(layers_.at(layer), aggregated, training, rng);
  return diff::add(x, diff::pointwise(update, Activation::relu));
}

Tensor Denoiser::output_layer(const Tensor& x, const Tensor& a, bool training, Rng* rng) const {
  return apply_tcn(layers_.back(), diff::matmul(a, x), training, rng);
}

Tensor Denoiser::forward(const Tensor& x, const Tensor& a, bool training, Rng* rng) const {
  Tensor h = x;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) h = hidden_layer(l, h, a, training, rng);
  return output_layer(h, a, training, rng);
}

// ---------------------------------------------------------------------------

GsrModel GsrModel::create(GraphSource source, const ModelConfig& config, std::size_t nodes,
                          std::uint64_t seed, std::optional<Adjacency> fixed) {
  config.validate();
  const bool needs_fixed =
      source == GraphSource::true_structure || source == GraphSource::correlation;
  if (needs_fixed != fixed.has_value()) {
    throw std::invalid_argument(std::string("graph source '") + std::string(to_string(source)) +
                                (needs_fixed ? "' needs" : "' does not take") +
                                " a fixed adjacency");
  }
  if (fixed && fixed->n() != nodes) {
    throw diff::DimensionError("fixed adjacency size does not match node count");
  }
  GsrModel m;
  m.source_ = source;
  m.config_ = config;
  m.nodes_ = nodes;
  m.fixed_ = std::move(fixed);
  m.store_.seed = seed;
  Rng init(derive_seed(seed, stream::kInit));
  if (source == GraphSource::reference) {
    m.reference_ = ReferenceGenerator::create(m.store_, nodes);
  } else if (source == GraphSource::observation) {
    m.observation_ = ObservationGenerator::create(m.store_, config.tcn, init);
  }
  m.denoiser_ = Denoiser::create(m.store_, std::string(denoiser_prefix(source)), config, init);
  return m;
}

void GsrModel::bind_modules() {
  if (source_ == GraphSource::reference) reference_ = ReferenceGenerator::bind(store_);
  if (source_ == GraphSource::observation)
    observation_ = ObservationGenerator::bind(store_, config_.tcn);
  denoiser_ = Denoiser::bind(store_, std::string(denoiser_prefix(source_)), config_);
}

Tensor GsrModel::adjacency(const Tensor& x, bool training, Rng* rng) const {
  switch (source_) {
    case GraphSource::reference: return reference_->forward();
    case GraphSource::observation: return observation_->forward(x, training, rng);
    case GraphSource::features: return feature_similarity(x);
    case GraphSource::true_structure:
    case GraphSource::correlation: return to_tensor(fixed_->values);
  }
  throw std::logic_error("unreachable");
}

Tensor GsrModel::denoise(const Tensor& noisy, const Tensor& a, bool training, Rng* rng) const {
  return denoiser_->forward(noisy, a, training, rng);
}

Adjacency GsrModel::adjacency_for(const SignalWindow& window) const {
  diff::NoGradGuard guard;
  return to_adjacency(adjacency(to_tensor(window.values), false, nullptr));
}

Adjacency GsrModel::static_adjacency() const {
  if (source_ == GraphSource::observation || source_ == GraphSource::features) {
    throw std::logic_error("graph source '" + std::string(to_string(source_)) +
                           "' has no static adjacency");
  }
  diff::NoGradGuard guard;
  return to_adjacency(adjacency(Tensor(), false, nullptr));
}

SignalWindow GsrModel::denoise_window(const SignalWindow& noisy, const SignalWindow& clean) const {
  diff::NoGradGuard guard;
  Tensor a = adjacency(to_tensor(clean.values), false, nullptr);
  Tensor out = denoise(to_tensor(noisy.values), a, false, nullptr);
  return {Matrix(noisy.nodes(), noisy.length(),
                 std::vector<double>(out.data().begin(), out.data().end()))};
}

nlohmann::json GsrModel::to_json() const {
  nlohmann::json doc = store_.to_json();
  nlohmann::json mc = {{"source", to_string(source_)},
                       {"nodes", nodes_},
                       {"activation", diff::to_string(generator_activation(source_))}};
  nlohmann::json cfg = config_;
  mc["tcn"] = cfg["tcn"];
  mc["depth"] = cfg["depth"];
  if (fixed_) mc["fixed_adjacency"] = fixed_->values.values();
  doc["model_config"] = std::move(mc);
  return doc;
}

GsrModel GsrModel::from_json(const nlohmann::json& doc) {
  if (!doc.contains("model_config")) throw diff::StateError("checkpoint: missing model_config");
  const auto& mc = doc.at("model_config");
  GsrModel m;
  m.source_ = graph_source_from_string(mc.at("source").get<std::string>());
  m.nodes_ = mc.at("nodes").get<std::size_t>();
  m.config_ = nlohmann::json{{"tcn", mc.at("tcn")}, {"depth", mc.at("depth")}}.get<ModelConfig>();
  if (mc.contains("fixed_adjacency")) {
    m.fixed_ = Adjacency{
        Matrix(m.nodes_, m.nodes_, mc.at("fixed_adjacency").get<std::vector<double>>())};
  }
  m.store_ = ParameterStore::from_json(doc);
  m.bind_modules();
  return m;
}

void GsrModel::save(const std::filesystem::path& path) const {
  io::write_file_atomic(path, to_json().dump());
}

GsrModel GsrModel::load(const std::filesystem::path& path) { return from_json(io::read_json(path)); }

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const TcnConfig& c) {
  j = {{"kernel_size", c.kernel_size},
       {"hidden_channels", c.hidden_channels},
       {"levels", c.levels},
       {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, TcnConfig& c) {
  reject_unknown_keys(j, "model.tcn", {"kernel_size", "hidden_channels", "levels", "dropout"});
  read_optional(j, "kernel_size", c.kernel_size, "model.tcn");
  read_optional(j, "hidden_channels", c.hidden_channels, "model.tcn");
  read_optional(j, "levels", c.levels, "model.tcn");
  read_optional(j, "dropout", c.dropout, "model.tcn");
  c.validate();
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"tcn", c.tcn}, {"depth", c.depth}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  reject_unknown_keys(j, "model", {"tcn", "depth"});
  if (j.contains("tcn")) c.tcn = j.at("tcn").get<TcnConfig>();
  read_optional(j, "depth", c.depth, "model");
  c.validate();
}

// ---------------------------------------------------------------------------

Adjacency gen_reference(const ReferenceGenerator& gen) {
  diff::NoGradGuard guard;
  return to_adjacency(gen.forward());
}

std::vector<double> tcn_forward(std::span<const double> series, const Tcn& tcn, bool training,
                                Rng* rng) {
  diff::NoGradGuard guard;
  Tensor out = tcn.forward(Tensor::from({1, series.size()}, {series.begin(), series.end()}),
                           training, rng);
  return {out.data().begin(), out.data().end()};
}

Adjacency gen_observation(const SignalWindow& x, const ObservationGenerator& gen) {
  diff::NoGradGuard guard;
  return to_adjacency(gen.forward(to_tensor(x.values), false, nullptr));
}

SignalWindow denoise(const SignalWindow& noisy, const Adjacency& a, const Denoiser& den,
                     bool training, Rng* rng) {
  diff::NoGradGuard guard;
  Tensor out = den.forward(to_tensor(noisy.values), to_tensor(a.values), training, rng);
  return {Matrix(noisy.nodes(), noisy.length(),
                 std::vector<double>(out.data().begin(), out.data().end()))};
}

}  // namespace gsr::models
