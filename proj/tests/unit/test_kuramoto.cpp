#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gsr/config_error.hpp"
#include "gsr/kuramoto.hpp"

namespace {

using namespace gsr;
using namespace gsr::kuramoto;

CouplingMatrix pair_coupling(double k) { return {Matrix(2, 2, std::vector<double>{0, k, k, 0})}; }

KuramotoConfig pair_config(double k, double dt) {
  KuramotoConfig c;
  c.n = 2;
  c.k = k;
  c.dt = dt;
  return c;
}

// Forward Euler with a tiny step on the same right-hand side.
std::vector<double> euler_oracle(const Matrix& c, std::vector<double> phi,
                                 const std::vector<double>& omega, double t_end, double h) {
  const std::size_t n = phi.size();
  const auto steps = static_cast<std::size_t>(std::llround(t_end / h));
  std::vector<double> d(n);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = omega[i];
      for (std::size_t j = 0; j < n; ++j) acc += c(i, j) * std::sin(phi[j] - phi[i]);
      d[i] = acc;
    }
    for (std::size_t i = 0; i < n; ++i) phi[i] += h * d[i];
  }
  return phi;
}

TEST(Coupling, TwoClusterStructure) {
  KuramotoConfig cfg;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  ASSERT_EQ(c.n(), 8u);
  int edges = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(c.values(i, i), 0.0);
    for (std::size_t j = 0; j < 8; ++j) {
      EXPECT_EQ(c.values(i, j), c.values(j, i));
      const bool same = (i < 4) == (j < 4);
      EXPECT_EQ(c.values(i, j), (same && i != j) ? cfg.k : 0.0);
      edges += c.values(i, j) != 0.0;
    }
  }
  EXPECT_EQ(edges, 24);
  cfg.n = 7;
  EXPECT_THROW(build_two_cluster_coupling(cfg), std::invalid_argument);
}

TEST(Simulate, UncoupledDriftIsLinear) {
  KuramotoConfig cfg;
  cfg.k = 0.0;
  const CouplingMatrix c{Matrix(8, 8)};
  std::vector<double> phi0{0.1, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.5};
  std::vector<double> omega{4.0, 3.5, 4.2, 4.4, 3.9, 4.1, 4.6, 3.3};
  const auto traj = simulate(cfg, c, 1000, phi0, omega);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(traj.phases(i, 0), phi0[i]);
    for (std::size_t t : {1u, 10u, 500u, 999u}) {
      EXPECT_NEAR(traj.phases(i, t), phi0[i] + omega[i] * cfg.dt * static_cast<double>(t), 1e-11);
    }
  }
}

TEST(Simulate, MatchesFineStepEulerOracle) {
  KuramotoConfig cfg;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  std::vector<double> phi0{0.3, 2.0, 4.0, 5.5, 1.0, 1.1, 3.0, 6.0};
  std::vector<double> omega{4.0, 3.7, 4.3, 4.1, 3.6, 4.5, 4.2, 3.9};
  const std::size_t steps = 201;
  const auto traj = simulate(cfg, c, steps, phi0, omega);
  const auto ref = euler_oracle(c.values, phi0, omega, cfg.dt * (steps - 1), cfg.dt / 2000.0);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(traj.phases(i, steps - 1), ref[i], 1e-4);
}

TEST(Simulate, TwoOscillatorsLockBelowCriticalDetuning) {
  // psi = phi_1 - phi_0 obeys psi' = d_omega - 2k sin(psi): locks iff |d_omega| <= 2k.
  const double k = 0.4;
  const auto cfg = pair_config(k, 0.01);
  std::vector<double> phi0{0.0, 0.0};
  {
    std::vector<double> omega{1.0, 1.5};  // d_omega = 0.5 < 0.8
    const auto traj = simulate(cfg, pair_coupling(k), 6001, phi0, omega);
    const double psi = traj.phases(1, 6000) - traj.phases(0, 6000);
    EXPECT_NEAR(psi, std::asin(0.5 / (2 * k)), 1e-6);
    const auto ref = euler_oracle(pair_coupling(k).values, phi0, omega, 60.0, 1e-5);
    EXPECT_NEAR(psi, ref[1] - ref[0], 1e-4);
  }
  {
    std::vector<double> omega{1.0, 2.0};  // d_omega = 1.0 > 0.8
    const auto traj = simulate(cfg, pair_coupling(k), 6001, phi0, omega);
    const double psi = traj.phases(1, 6000) - traj.phases(0, 6000);
    EXPECT_GT(psi, 2 * std::numbers::pi);
    const auto ref = euler_oracle(pair_coupling(k).values, phi0, omega, 60.0, 1e-5);
    EXPECT_NEAR(psi, ref[1] - ref[0], 1e-3);
  }
}

TEST(Simulate, PrintedSignRepels) {
  const double k = 0.4;
  auto cfg = pair_config(k, 0.01);
  std::vector<double> phi0{0.0, 0.1};
  std::vector<double> omega{1.0, 1.0};
  const auto attract = simulate(cfg, pair_coupling(k), 101, phi0, omega);
  cfg.printed_sign = true;
  const auto repel = simulate(cfg, pair_coupling(k), 101, phi0, omega);
  EXPECT_LT(attract.phases(1, 100) - attract.phases(0, 100), 0.1);
  EXPECT_GT(repel.phases(1, 100) - repel.phases(0, 100), 0.1);
}

TEST(Simulate, HalvingStepAgrees) {
  KuramotoConfig cfg;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  Rng rng(12);
  const auto init = draw_initial_state(cfg, rng);
  const std::size_t steps = 2 * cfg.window;
  const auto coarse = simulate(cfg, c, steps, init.phases, init.omegas);
  KuramotoConfig fine_cfg = cfg;
  fine_cfg.dt = cfg.dt / 2;
  const auto fine = simulate(fine_cfg, c, 2 * steps - 1, init.phases, init.omegas);
  double worst = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t t = 0; t < steps; ++t) {
      worst = std::max(worst, std::abs(coarse.phases(i, t) - fine.phases(i, 2 * t)));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Simulate, RejectsBadInputs) {
  KuramotoConfig cfg;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  std::vector<double> three{0, 0, 0};
  EXPECT_THROW(simulate(cfg, c, 10, three, three), std::invalid_argument);
  EXPECT_THROW(simulate(cfg, pair_coupling(1.0), 10, std::vector<double>(8)), std::invalid_argument);
  cfg.dt = 0.0;
  EXPECT_THROW(simulate(cfg, c, 10, std::vector<double>(8)), ConfigError);
}

TEST(Faults, DecoupleRemovesAllIncidentEdges) {
  KuramotoConfig cfg;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  const CouplingMatrix d = perturb_coupling(c, Decouple{0});
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_EQ(d.values(0, j), 0.0);
    EXPECT_EQ(d.values(j, 0), 0.0);
  }
  EXPECT_EQ(d.values(1, 2), cfg.k);
  EXPECT_EQ(d.values(5, 6), cfg.k);
  EXPECT_THROW(perturb_coupling(c, Decouple{8}), std::invalid_argument);
}

TEST(Faults, SwapExchangesClusterMembership) {
  KuramotoConfig cfg;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  const CouplingMatrix s = perturb_coupling(c, Swap{0, 7});
  // Node 0 now belongs with 4,5,6 and node 7 with 1,2,3.
  for (std::size_t j : {4u, 5u, 6u}) EXPECT_EQ(s.values(0, j), cfg.k);
  for (std::size_t j : {1u, 2u, 3u}) {
    EXPECT_EQ(s.values(0, j), 0.0);
    EXPECT_EQ(s.values(7, j), cfg.k);
  }
  EXPECT_EQ(s.values(0, 7), 0.0);
  EXPECT_EQ(perturb_coupling(s, Swap{0, 7}), c);
  EXPECT_THROW(perturb_coupling(c, Swap{0, 1}), std::invalid_argument);
  EXPECT_THROW(perturb_coupling(c, Swap{3, 3}), std::invalid_argument);
  EXPECT_THROW(perturb_coupling(c, Explicit{pair_coupling(1.0)}), std::invalid_argument);
}

TEST(DiagnosisRun, PhasesContinuousAcrossFault) {
  KuramotoConfig cfg;
  cfg.seed = 4;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  const auto run = make_diagnosis_run(cfg, c, Decouple{0});
  const std::size_t w = cfg.window;
  ASSERT_EQ(run.signal.values.cols(), 5 * w);
  double max_rate = 0.0;
  for (double om : run.trajectory.omegas) max_rate = std::max(max_rate, std::abs(om));
  max_rate += 3 * cfg.k;
  for (std::size_t i = 0; i < 8; ++i) {
    const double jump = std::abs(run.trajectory.phases(i, 2 * w) - run.trajectory.phases(i, 2 * w - 1));
    EXPECT_LE(jump, max_rate * cfg.dt);
  }
  EXPECT_EQ(run.after, perturb_coupling(c, Decouple{0}));
}

TEST(DiagnosisRun, NoFaultEqualsUninterruptedSimulation) {
  KuramotoConfig cfg;
  cfg.seed = 9;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  const auto run = make_diagnosis_run(cfg, c, Explicit{c}, 3);
  const auto full = simulate(cfg, c, 5 * cfg.window, run.trajectory.phases.columns(0, 1).values(),
                             run.trajectory.omegas);
  EXPECT_EQ(run.trajectory.phases, full.phases);
}

TEST(DiagnosisRun, RunIndexSelectsIndependentStreams) {
  KuramotoConfig cfg;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  const auto a = make_diagnosis_run(cfg, c, Decouple{0}, 0);
  const auto b = make_diagnosis_run(cfg, c, Decouple{0}, 1);
  const auto a2 = make_diagnosis_run(cfg, c, Decouple{0}, 0);
  EXPECT_EQ(a.signal, a2.signal);
  EXPECT_NE(a.signal, b.signal);
}

TEST(Dataset, ShapesAndSplit) {
  KuramotoConfig cfg;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  const auto ds = make_training_dataset(cfg, c, 3);
  ASSERT_EQ(ds.train.size(), 3u);
  ASSERT_EQ(ds.val.size(), 3u);
  const auto s = to_signal(training_run_trajectory(cfg, c, 2));
  EXPECT_EQ(ds.train[2].values, s.values.columns(0, cfg.window));
  EXPECT_EQ(ds.val[2].values, s.values.columns(cfg.window, 2 * cfg.window));
  EXPECT_EQ(ds.train[0].nodes(), 8u);
  EXPECT_EQ(ds.train[0].length(), 200u);
  EXPECT_THROW(make_training_dataset(cfg, c, 0), std::invalid_argument);
}

TEST(Dataset, PureFunctionOfSeed) {
  KuramotoConfig cfg;
  const CouplingMatrix c = build_two_cluster_coupling(cfg);
  const auto a = make_training_dataset(cfg, c, 4);
  const auto b = make_training_dataset(cfg, c, 4);
  EXPECT_EQ(a.train, b.train);
  // Run i is the same whatever the total count.
  const auto more = make_training_dataset(cfg, c, 6);
  EXPECT_EQ(a.train[3], more.train[3]);
  cfg.seed = 1;
  EXPECT_NE(make_training_dataset(cfg, c, 1).train[0], a.train[0]);
}

TEST(Signal, IsSineOfPhase) {
  PhaseTrajectory t{Matrix(1, 3, std::vector<double>{0.0, std::numbers::pi / 2, 1.0}), {1.0}};
  const auto s = to_signal(t);
  EXPECT_EQ(s.values(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(s.values(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(s.values(0, 2), std::sin(1.0));
}

TEST(OrderParameter, Extremes) {
  std::vector<double> same{1.0, 1.0, 1.0, 1.0};
  std::vector<std::size_t> all{0, 1, 2, 3};
  EXPECT_NEAR(order_parameter(same, all), 1.0, 1e-15);
  std::vector<double> spread{0.0, std::numbers::pi / 2, std::numbers::pi, 3 * std::numbers::pi / 2};
  EXPECT_NEAR(order_parameter(spread, all), 0.0, 1e-15);
  std::vector<double> two_clusters{0, 0, 0, 0, 0, std::numbers::pi, 0, std::numbers::pi};
  EXPECT_NEAR(within_cluster_order(two_clusters), 0.5, 1e-15);
  EXPECT_THROW(order_parameter(same, std::vector<std::size_t>{}), std::invalid_argument);
}

TEST(Noise, ZeroSigmaIsIdentityAndSeedDeterminesDraws) {
  SignalWindow x{Matrix(8, 200, 0.25)};
  EXPECT_EQ(add_noise(x, NoiseConfig{0.0, 0.0}, 1), x);
  const auto a = add_noise(x, NoiseConfig{}, 5);
  EXPECT_EQ(a, add_noise(x, NoiseConfig{}, 5));
  EXPECT_NE(a, add_noise(x, NoiseConfig{}, 6));
  double mean = 0.0, sq = 0.0;
  for (double v : a.values.values()) {
    mean += v - 0.25;
    sq += (v - 0.25) * (v - 0.25);
  }
  mean /= 1600.0;
  const double sd = std::sqrt(sq / 1600.0 - mean * mean);
  EXPECT_NEAR(mean, 0.0, 5 * 0.1 / 40.0);
  EXPECT_NEAR(sd, 0.1, 0.01);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  KuramotoConfig cfg;
  cfg.k = 0.8;
  cfg.seed = 11;
  const nlohmann::json j = cfg;
  const auto back = j.get<KuramotoConfig>();
  EXPECT_EQ(back.k, 0.8);
  EXPECT_EQ(back.seed, 11u);
  EXPECT_THROW(nlohmann::json::parse(R"({"kk": 1})").get<KuramotoConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json::parse(R"({"dt": "x"})").get<KuramotoConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json::parse(R"({"sigma": -1})").get<NoiseConfig>(), ConfigError);
}

TEST(Config, ValidationNamesField) {
  KuramotoConfig cfg;
  cfg.omega_std = -1.0;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "kuramoto.omega_std");
  }
}

TEST(Faults, Describe) {
  EXPECT_NE(describe(Decouple{0}).find('0'), std::string::npos);
  EXPECT_NE(describe(Swap{0, 7}).find('7'), std::string::npos);
}

}  // namespace
