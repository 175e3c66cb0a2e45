#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsr/matrix.hpp"
#include "gsr/rng.hpp"
#include "gsr/types.hpp"

namespace gsr::kuramoto {

/// Simulation constants. The defaults put the two four-node clusters in a
/// regime where the first window is still synchronizing and the second is
/// largely synchronized.
struct KuramotoConfig {
  std::size_t n = 8;
  double omega_mean = 4.0;
  double omega_std = 0.45;
  double k = 0.5;
  double dt = 0.007;
  std::size_t window = 200;
  std::uint64_t seed = 0;
  /// Use the repulsive sin(phi_i - phi_j) instead of the attractive sin(phi_j - phi_i).
  bool printed_sign = false;

  void validate(std::string_view context = "kuramoto") const;
};

struct PhaseTrajectory {
  Matrix phases;  // n x T, radians, unwrapped
  std::vector<double> omegas;
};

struct Decouple {
  std::size_t node;
};
struct Swap {
  std::size_t a;
  std::size_t b;
};
struct Explicit {
  CouplingMatrix coupling;
};
using FaultSpec = std::variant<Decouple, Swap, Explicit>;

std::string describe(const FaultSpec& fault);

struct NoiseConfig {
  double mu = 0.0;
  double sigma = 0.1;

  void validate(std::string_view context = "noise") const;
};

CouplingMatrix build_two_cluster_coupling(const KuramotoConfig& config);

/// Draws n initial phases from U[0, 2*pi) followed by n frequencies from
/// N(omega_mean, omega_std).
struct InitialState {
  std::vector<double> phases;
  std::vector<double> omegas;
};
InitialState draw_initial_state(const KuramotoConfig& config, Rng& rng);

/// RK4 integration. Column 0 holds the initial phases; `steps` columns total.
PhaseTrajectory simulate(const KuramotoConfig& config, const CouplingMatrix& coupling,
                         std::size_t steps, std::span<const double> initial_phases,
                         std::span<const double> omegas);

/// Same, drawing the frequencies from config.seed.
PhaseTrajectory simulate(const KuramotoConfig& config, const CouplingMatrix& coupling,
                         std::size_t steps, std::span<const double> initial_phases);

SignalMatrix to_signal(const PhaseTrajectory& trajectory);

CouplingMatrix perturb_coupling(const CouplingMatrix& coupling, const FaultSpec& fault);

struct Dataset {
  std::vector<SignalWindow> train;
  std::vector<SignalWindow> val;
};

/// One 2W-step run per index; train gets columns [0,W), val [W,2W).
Dataset make_training_dataset(const KuramotoConfig& config, const CouplingMatrix& coupling,
                              std::size_t runs);

/// Full 2W-step trajectory of one training run, for inspection.
PhaseTrajectory training_run_trajectory(const KuramotoConfig& config,
                                        const CouplingMatrix& coupling, std::size_t run);

struct DiagnosisRun {
  SignalMatrix signal;  // n x 5W
  PhaseTrajectory trajectory;
  CouplingMatrix before;
  CouplingMatrix after;
};

/// 2W steps under `coupling`, then 3W steps under the perturbed coupling.
/// `run` selects an independent random stream.
DiagnosisRun make_diagnosis_run(const KuramotoConfig& config, const CouplingMatrix& coupling,
                                const FaultSpec& fault, std::uint64_t run = 0);

SignalWindow add_noise(const SignalWindow& x, const NoiseConfig& noise, std::uint64_t seed);

/// |mean over subset of exp(i*phi)|.
double order_parameter(std::span<const double> phases, std::span<const std::size_t> subset);

/// Mean of the order parameters of both halves of a two-cluster system.
double within_cluster_order(std::span<const double> phases);

void to_json(nlohmann::json& j, const KuramotoConfig& c);
void from_json(const nlohmann::json& j, KuramotoConfig& c);
void to_json(nlohmann::json& j, const NoiseConfig& c);
void from_json(const nlohmann::json& j, NoiseConfig& c);
nlohmann::json fault_to_json(const FaultSpec& fault);

}  // namespace gsr::kuramoto
