#include "gsr/kuramoto.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "gsr/config_error.hpp"

namespace gsr::kuramoto {

namespace {

std::string field(std::string_view context, const char* name) {
  return std::string(context) + "." + name;
}

std::size_t require_node(std::size_t node, std::size_t n) {
  if (node >= n) {
    throw std::invalid_argument("fault node index " + std::to_string(node) +
                                " out of range for " + std::to_string(n) + " nodes");
  }
  return node;
}

class Rk4 {
 public:
  Rk4(const KuramotoConfig& config, const CouplingMatrix& coupling,
      std::span<const double> omegas)
      : n_(config.n),
        dt_(config.dt),
        sign_(config.printed_sign ? -1.0 : 1.0),
        coupling_(coupling.values),
        omegas_(omegas.begin(), omegas.end()),
        k1_(n_), k2_(n_), k3_(n_), k4_(n_), tmp_(n_) {}

  void step(std::vector<double>& phase) {
    derivative(phase, k1_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = phase[i] + 0.5 * dt_ * k1_[i];
    derivative(tmp_, k2_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = phase[i] + 0.5 * dt_ * k2_[i];
    derivative(tmp_, k3_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = phase[i] + dt_ * k3_[i];
    derivative(tmp_, k4_);
    for (std::size_t i = 0; i < n_; ++i)
      phase[i] += dt_ / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
  }

 private:
  // d(phi_i)/dt = omega_i + sum_j k_ij sin(phi_j - phi_i)
  void derivative(const std::vector<double>& phase, std::vector<double>& out) const {
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n_; ++j) {
        const double kij = coupling_(i, j);
        if (kij != 0.0) acc += kij * std::sin(sign_ * (phase[j] - phase[i]));
      }
      out[i] = omegas_[i] + acc;
    }
  }

  std::size_t n_;
  double dt_;
  double sign_;
  const Matrix& coupling_;
  std::vector<double> omegas_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

void check_coupling(const KuramotoConfig& config, const CouplingMatrix& coupling) {
  if (coupling.values.rows() != config.n || coupling.values.cols() != config.n) {
    throw std::invalid_argument("coupling matrix is " + std::to_string(coupling.values.rows()) +
                                "x" + std::to_string(coupling.values.cols()) + ", expected " +
                                std::to_string(config.n) + "x" + std::to_string(config.n));
  }
}

}  // namespace

void KuramotoConfig::validate(std::string_view context) const {
  if (n < 2) throw ConfigError(field(context, "n"), "must be >= 2");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError(field(context, "dt"), "must be > 0");
  if (window < 1) throw ConfigError(field(context, "window"), "must be >= 1");
  if (!(k >= 0.0) || !std::isfinite(k)) throw ConfigError(field(context, "k"), "must be >= 0");
  if (!(omega_std >= 0.0)) throw ConfigError(field(context, "omega_std"), "must be >= 0");
  if (!std::isfinite(omega_mean)) throw ConfigError(field(context, "omega_mean"), "not finite");
}

void NoiseConfig::validate(std::string_view context) const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ConfigError(field(context, "sigma"), "must be >= 0");
  }
  if (!std::isfinite(mu)) throw ConfigError(field(context, "mu"), "not finite");
}

std::string describe(const FaultSpec& fault) {
  struct Visitor {
    std::string operator()(const Decouple& d) const {
      return "decouple(" + std::to_string(d.node) + ")";
    }
    std::string operator()(const Swap& s) const {
      return "swap(" + std::to_string(s.a) + "," + std::to_string(s.b) + ")";
    }
    std::string operator()(const Explicit&) const { return "explicit"; }
  };
  return std::visit(Visitor{}, fault);
}

CouplingMatrix build_two_cluster_coupling(const KuramotoConfig& config) {
  config.validate();
  if (config.n % 2 != 0) {
    throw std::invalid_argument("two-cluster coupling needs an even node count, got " +
                                std::to_string(config.n));
  }
  const std::size_t half = config.n / 2;
  CouplingMatrix c{Matrix(config.n, config.n)};
  for (std::size_t i = 0; i < config.n; ++i)
    for (std::size_t j = 0; j < config.n; ++j)
      if (i != j && (i < half) == (j < half)) c.values(i, j) = config.k;
  return c;
}

InitialState draw_initial_state(const KuramotoConfig& config, Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> omega(config.omega_mean, config.omega_std);
  InitialState s;
  s.phases.resize(config.n);
  s.omegas.resize(config.n);
  for (auto& p : s.phases) p = phase(rng);
  for (auto& w : s.omegas) w = config.omega_std > 0.0 ? omega(rng) : config.omega_mean;
  return s;
}

PhaseTrajectory simulate(const KuramotoConfig& config, const CouplingMatrix& coupling,
                         std::size_t steps, std::span<const double> initial_phases,
                         std::span<const double> omegas) {
  config.validate();
  check_coupling(config, coupling);
  if (initial_phases.size() != config.n || omegas.size() != config.n) {
    throw std::invalid_argument("simulate: expected " + std::to_string(config.n) +
                                " initial phases and frequencies");
  }
  PhaseTrajectory traj{Matrix(config.n, steps), {omegas.begin(), omegas.end()}};
  if (steps == 0) return traj;
  std::vector<double> phase(initial_phases.begin(), initial_phases.end());
  Rk4 integrator(config, coupling, omegas);
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) integrator.step(phase);
    for (std::size_t i = 0; i < config.n; ++i) traj.phases(i, t) = phase[i];
  }
  return traj;
}

PhaseTrajectory simulate(const KuramotoConfig& config, const CouplingMatrix& coupling,
                         std::size_t steps, std::span<const double> initial_phases) {
  Rng rng(config.seed);
  std::normal_distribution<double> omega(config.omega_mean, config.omega_std);
  std::vector<double> omegas(config.n);
  for (auto& w : omegas) w = config.omega_std > 0.0 ? omega(rng) : config.omega_mean;
  return simulate(config, coupling, steps, initial_phases, omegas);
}

SignalMatrix to_signal(const PhaseTrajectory& trajectory) {
  Matrix s(trajectory.phases.rows(), trajectory.phases.cols());
  for (std::size_t i = 0; i < s.size(); ++i) s.values()[i] = std::sin(trajectory.phases.values()[i]);
  return {std::move(s)};
}

CouplingMatrix perturb_coupling(const CouplingMatrix& coupling, const FaultSpec& fault) {
  const std::size_t n = coupling.n();
  struct Visitor {
    const CouplingMatrix& c;
    std::size_t n;

    CouplingMatrix operator()(const Decouple& d) const {
      const std::size_t v = require_node(d.node, n);
      CouplingMatrix out = c;
      for (std::size_t j = 0; j < n; ++j) {
        out.values(v, j) = 0.0;
        out.values(j, v) = 0.0;
      }
      return out;
    }

    // Exchanges the full edge sets of a and b (conjugation by the a<->b transposition).
    CouplingMatrix operator()(const Swap& s) const {
      const std::size_t a = require_node(s.a, n);
      const std::size_t b = require_node(s.b, n);
      if (a == b || c.values(a, b) != 0.0) {
        throw std::invalid_argument("swap(" + std::to_string(a) + "," + std::to_string(b) +
                                    "): nodes must belong to different clusters");
      }
      auto relabel = [&](std::size_t i) { return i == a ? b : (i == b ? a : i); };
      CouplingMatrix out{Matrix(n, n)};
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.values(i, j) = c.values(relabel(i), relabel(j));
      return out;
    }

    CouplingMatrix operator()(const Explicit& e) const {
      if (e.coupling.n() != n) throw std::invalid_argument("explicit fault: size mismatch");
      return e.coupling;
    }
  };
  return std::visit(Visitor{coupling, n}, fault);
}

PhaseTrajectory training_run_trajectory(const KuramotoConfig& config,
                                        const CouplingMatrix& coupling, std::size_t run) {
  Rng rng(derive_seed(derive_seed(config.seed, stream::kTrainingRuns), run));
  const InitialState init = draw_initial_state(config, rng);
  return simulate(config, coupling, 2 * config.window, init.phases, init.omegas);
}

Dataset make_training_dataset(const KuramotoConfig& config, const CouplingMatrix& coupling,
                              std::size_t runs) {
  if (runs < 1) throw std::invalid_argument("make_training_dataset: runs must be >= 1");
  const std::size_t w = config.window;
  Dataset ds;
  ds.train.reserve(runs);
  ds.val.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    const SignalMatrix s = to_signal(training_run_trajectory(config, coupling, r));
    ds.train.push_back({s.values.columns(0, w)});
    ds.val.push_back({s.values.columns(w, 2 * w)});
  }
  return ds;
}

DiagnosisRun make_diagnosis_run(const KuramotoConfig& config, const CouplingMatrix& coupling,
                                const FaultSpec& fault, std::uint64_t run) {
  const std::size_t w = config.window;
  Rng rng(derive_seed(derive_seed(config.seed, stream::kDiagnosisRuns), run));
  const InitialState init = draw_initial_state(config, rng);
  CouplingMatrix after = perturb_coupling(coupling, fault);

  const PhaseTrajectory healthy = simulate(config, coupling, 2 * w, init.phases, init.omegas);
  std::vector<double> switch_state(config.n);
  for (std::size_t i = 0; i < config.n; ++i) switch_state[i] = healthy.phases(i, 2 * w - 1);
  // Restarting from the last healthy column keeps the phases continuous.
  const PhaseTrajectory faulty = simulate(config, after, 3 * w + 1, switch_state, init.omegas);

  PhaseTrajectory full{Matrix(config.n, 5 * w), init.omegas};
  for (std::size_t i = 0; i < config.n; ++i) {
    for (std::size_t t = 0; t < 2 * w; ++t) full.phases(i, t) = healthy.phases(i, t);
    for (std::size_t t = 1; t <= 3 * w; ++t) full.phases(i, 2 * w - 1 + t) = faulty.phases(i, t);
  }
  DiagnosisRun out{to_signal(full), std::move(full), coupling, std::move(after)};
  return out;
}

SignalWindow add_noise(const SignalWindow& x, const NoiseConfig& noise, std::uint64_t seed) {
  SignalWindow out = x;
  if (noise.sigma == 0.0 && noise.mu == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> eta(noise.mu, noise.sigma);
  for (double& v : out.values.values()) v += noise.sigma > 0.0 ? eta(rng) : noise.mu;
  return out;
}

double order_parameter(std::span<const double> phases, std::span<const std::size_t> subset) {
  if (subset.empty()) throw std::invalid_argument("order_parameter: empty subset");
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i : subset) acc += std::polar(1.0, phases[i]);
  return std::abs(acc) / static_cast<double>(subset.size());
}

double within_cluster_order(std::span<const double> phases) {
  const std::size_t half = phases.size() / 2;
  std::vector<std::size_t> first(half);
  std::vector<std::size_t> second(phases.size() - half);
  for (std::size_t i = 0; i < half; ++i) first[i] = i;
  for (std::size_t i = half; i < phases.size(); ++i) second[i - half] = i;
  return 0.5 * (order_parameter(phases, first) + order_parameter(phases, second));
}

void to_json(nlohmann::json& j, const KuramotoConfig& c) {
  j = {{"n", c.n},           {"omega_mean", c.omega_mean}, {"omega_std", c.omega_std},
       {"k", c.k},           {"dt", c.dt},                 {"window", c.window},
       {"seed", c.seed},     {"printed_sign", c.printed_sign}};
}

void from_json(const nlohmann::json& j, KuramotoConfig& c) {
  reject_unknown_keys(j, "kuramoto",
                      {"n", "omega_mean", "omega_std", "k", "dt", "window", "seed",
                       "printed_sign"});
  read_optional(j, "n", c.n, "kuramoto");
  read_optional(j, "omega_mean", c.omega_mean, "kuramoto");
  read_optional(j, "omega_std", c.omega_std, "kuramoto");
  read_optional(j, "k", c.k, "kuramoto");
  read_optional(j, "dt", c.dt, "kuramoto");
  read_optional(j, "window", c.window, "kuramoto");
  read_optional(j, "seed", c.seed, "kuramoto");
  read_optional(j, "printed_sign", c.printed_sign, "kuramoto");
  c.validate();
}

void to_json(nlohmann::json& j, const NoiseConfig& c) {
  j = {{"mu", c.mu}, {"sigma", c.sigma}};
}

void from_json(const nlohmann::json& j, NoiseConfig& c) {
  reject_unknown_keys(j, "noise", {"mu", "sigma"});
  read_optional(j, "mu", c.mu, "noise");
  read_optional(j, "sigma", c.sigma, "noise");
  c.validate();
}

nlohmann::json fault_to_json(const FaultSpec& fault) {
  struct Visitor {
    nlohmann::json operator()(const Decouple& d) const {
      return {{"kind", "decouple"}, {"node", d.node}};
    }
    nlohmann::json operator()(const Swap& s) const {
      return {{"kind", "swap"}, {"a", s.a}, {"b", s.b}};
    }
    nlohmann::json operator()(const Explicit& e) const {
      return {{"kind", "explicit"}, {"coupling", e.coupling.values.values()}};
    }
  };
  return std::visit(Visitor{}, fault);
}

}  // namespace gsr::kuramoto
