// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "gsr/diagnosis.hpp"
#include "gsr/diff/ops.hpp"
#include "gsr/kuramoto.hpp"
#include "gsr/models.hpp"
#include "gsr/parallel.hpp"
#include "gsr/training.hpp"
#include "grad_check.hpp"

namespace {

using namespace gsr;
using diff::Activation;
using diff::Shape;
using diff::Tensor;
using models::GraphSource;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

int failures = 0;

void report(int id, const char* name, Outcome o, double seconds) {
  if (!o.pass) ++failures;
  std::printf("criterion %d %-22s %s  (%.1f s)%s%s\n", id, name, o.pass ? "PASS" : "FAIL", seconds,
              o.detail.empty() ? "" : "  ", o.detail.c_str());
  std::fflush(stdout);
}

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Numerics

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

double worst_grad_error(const Fn& f, const std::vector<Shape>& shapes, std::uint64_t seed,
                        double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int p = 0; p < 20; ++p) {
    std::vector<Tensor> inputs;
    for (const auto& s : shapes) inputs.push_back(testing::random_param(s, rng, lo, hi));
    worst = std::max(worst, testing::grad_check(f, inputs, rng()).max_rel_error);
  }
  return worst;
}

double conv_oracle_error() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  diff::NoGradGuard guard;
  for (std::size_t len : {1u, 9u, 64u, 200u}) {
    for (int dil : {1, 2, 4, 8}) {
      const std::size_t batch = 2, cin = 3, cout = 4, k = 7;
      std::vector<double> x(batch * cin * len), w(cout * cin * k), b(cout);
      for (auto* v : {&x, &w, &b})
        for (double& e : *v) e = u(rng);
      const Tensor y = diff::causal_conv1d(Tensor::from({batch, cin, len}, x),
                                           Tensor::from({cout, cin, k}, w), Tensor::from({cout}, b), dil);
      for (std::size_t bi = 0; bi < batch; ++bi)
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t t = 0; t < len; ++t) {
            double acc = b[co];
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t kk = 0; kk < k; ++kk) {
                const long src = static_cast<long>(t) - static_cast<long>((k - 1 - kk) * dil);
                if (src >= 0) acc += w[(co * cin + ci) * k + kk] * x[(bi * cin + ci) * len + src];
              }
            worst = std::max(worst, std::abs(acc - y.data()[(bi * cout + co) * len + t]));
          }
    }
  }
  return worst;
}

Outcome numerics() {
  namespace d = diff;
  struct Case {
    const char* name;
    Fn f;
    std::vector<Shape> shapes;
    double lo = -1.0, hi = 1.0;
  };
  std::vector<Case> cases = {
      {"matmul", [](auto& in) { return d::matmul(in[0], in[1]); }, {{3, 4}, {4, 2}}},
      {"matmul_batched", [](auto& in) { return d::matmul(in[0], in[1]); }, {{2, 3, 4}, {4, 5}}},
      {"transpose", [](auto& in) { return d::transpose(in[0]); }, {{2, 3, 4}}},
      {"add", [](auto& in) { return d::add(in[0], in[1]); }, {{3, 4}, {3, 4}}},
      {"sub", [](auto& in) { return d::sub(in[0], in[1]); }, {{3, 4}, {3, 4}}},
      {"mul", [](auto& in) { return d::mul(in[0], in[1]); }, {{3, 4}, {3, 4}}},
      {"scale", [](auto& in) { return d::scale(in[0], 1.7); }, {{3, 4}}},
      {"reshape", [](auto& in) { return d::reshape(in[0], {6, 2}); }, {{3, 4}}},
      {"sum", [](auto& in) { return d::sum(in[0]); }, {{3, 4}}},
      {"mean", [](auto& in) { return d::mean(in[0]); }, {{3, 4}}},
      {"causal_conv1d", [](auto& in) { return d::causal_conv1d(in[0], in[1], in[2], 2); },
       {{2, 2, 10}, {3, 2, 3}, {3}}},
      {"relu", [](auto& in) { return d::pointwise(in[0], Activation::relu); }, {{4, 5}}, -3, 3},
      {"sigmoid", [](auto& in) { return d::pointwise(in[0], Activation::sigmoid); }, {{4, 5}}, -3, 3},
      {"elu", [](auto& in) { return d::pointwise(in[0], Activation::elu); }, {{4, 5}}, -3, 3},
      {"elu_plus_one", [](auto& in) { return d::pointwise(in[0], Activation::elu_plus_one); },
       {{4, 5}}, -3, 3},
      {"dropout", [](auto& in) { return d::dropout(in[0], 0.4, true, 99); }, {{5, 6}}},
      {"mse_loss", [](auto& in) { return d::mse_loss(in[0], in[1]); }, {{3, 5}, {3, 5}}},
      {"zero_diagonal", [](auto& in) { return d::zero_diagonal(in[0]); }, {{4, 4}}},
      {"symmetrize", [](auto& in) { return d::symmetrize(in[0]); }, {{2, 4, 4}}},
      {"degree_normalize", [](auto& in) { return d::degree_normalize(in[0]); }, {{5, 5}}, 0.1, 2},
  };
  Outcome o;
  double worst_all = 0.0;
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    const double e = worst_grad_error(c.f, c.shapes, seed++, c.lo, c.hi);
    worst_all = std::max(worst_all, e);
    o.require(e < 1e-4, std::string(c.name) + " rel err " + fmt("%.2e", e));
  }
  const double conv = conv_oracle_error();
  o.require(conv <= 1e-12, "conv oracle err " + fmt("%.2e", conv));
  if (o.pass) {
    o.detail = std::to_string(cases.size()) + " ops, worst grad rel err " + fmt("%.1e", worst_all) +
               ", conv oracle err " + fmt("%.1e", conv);
  }
  return o;
}

// ---------------------------------------------------------------------------
// 2. Simulator

std::vector<double> euler(const Matrix& c, std::vector<double> phi, const std::vector<double>& omega,
                          double t_end, double h) {
  const std::size_t n = phi.size();
  const auto steps = static_cast<std::size_t>(std::llround(t_end / h));
  std::vector<double> rate(n);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      rate[i] = omega[i];
      for (std::size_t j = 0; j < n; ++j) rate[i] += c(i, j) * std::sin(phi[j] - phi[i]);
    }
    for (std::size_t i = 0; i < n; ++i) phi[i] += h * rate[i];
  }
  return phi;
}

Outcome simulator() {
  using namespace kuramoto;
  Outcome o;
  KuramotoConfig cfg;

  {
    KuramotoConfig free = cfg;
    free.k = 0.0;
    const std::vector<double> phi0{0.1, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.5};
    const std::vector<double> omega{4.0, 3.5, 4.2, 4.4, 3.9, 4.1, 4.6, 3.3};
    const auto traj = simulate(free, {Matrix(8, 8)}, 2 * cfg.window, phi0, omega);
    double err = 0.0;
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t t = 0; t < 2 * cfg.window; ++t)
        err = std::max(err, std::abs(traj.phases(i, t) - (phi0[i] + omega[i] * cfg.dt * double(t))));
    o.require(err < 1e-11, "uncoupled drift err " + fmt("%.1e", err));
  }
  {
    const double k = 0.4;
    KuramotoConfig pair = cfg;
    pair.n = 2;
    pair.k = k;
    pair.dt = 0.01;
    const CouplingMatrix c{Matrix(2, 2, std::vector<double>{0, k, k, 0})};
    for (double d_omega : {0.5, 0.7, 0.9, 1.2}) {
      const std::vector<double> omega{1.0, 1.0 + d_omega};
      const auto traj = simulate(pair, c, 6001, std::vector<double>{0.0, 0.0}, omega);
      const double psi = traj.phases(1, 6000) - traj.phases(0, 6000);
      const auto ref = euler(c.values, {0.0, 0.0}, omega, 60.0, 1e-5);
      const bool locks = d_omega <= 2 * k;
      o.require(std::abs(psi - (ref[1] - ref[0])) < 1e-3, "pair oracle mismatch at d_omega " + fmt("%.1f", d_omega));
      if (locks) {
        o.require(std::abs(psi - std::asin(d_omega / (2 * k))) < 1e-6, "pair should lock at " + fmt("%.1f", d_omega));
      } else {
        o.require(psi > 2 * std::numbers::pi, "pair should drift at " + fmt("%.1f", d_omega));
      }
    }
  }
  {
    const CouplingMatrix c = build_two_cluster_coupling(cfg);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      Rng rng(s);
      const auto init = draw_initial_state(cfg, rng);
      const auto coarse = simulate(cfg, c, 2 * cfg.window, init.phases, init.omegas);
      KuramotoConfig fine_cfg = cfg;
      fine_cfg.dt /= 2;
      const auto fine = simulate(fine_cfg, c, 4 * cfg.window - 1, init.phases, init.omegas);
      for (std::size_t i = 0; i < cfg.n; ++i)
        worst = std::max(worst, std::abs(coarse.phases(i, 2 * cfg.window - 1) -
                                         fine.phases(i, 4 * cfg.window - 2)));
    }
    o.require(worst < 1e-6, "dt halving diff " + fmt("%.1e", worst));
    if (o.pass) o.detail = "dt halving diff " + fmt("%.1e", worst) + ", pair lock and drift match the oracle";
  }
  {
    const CouplingMatrix c = build_two_cluster_coupling(cfg);
    const std::size_t w = cfg.window;
    for (const FaultSpec& f : {FaultSpec{Decouple{0}}, FaultSpec{Swap{0, 7}}}) {
      KuramotoConfig k = cfg;
      k.seed = 3;
      const auto run = make_diagnosis_run(k, c, f);
      const auto healthy = make_diagnosis_run(k, c, Explicit{c});
      double jump = 0.0, max_rate = 0.0;
      for (double om : run.trajectory.omegas) max_rate = std::max(max_rate, std::abs(om) + 3 * cfg.k);
      bool same_before = true;
      for (std::size_t i = 0; i < cfg.n; ++i) {
        jump = std::max(jump, std::abs(run.trajectory.phases(i, 2 * w) - run.trajectory.phases(i, 2 * w - 1)));
        same_before = same_before && run.trajectory.phases(i, 2 * w - 1) == healthy.trajectory.phases(i, 2 * w - 1);
      }
      o.require(same_before, "pre-fault phases differ from the healthy run");
      o.require(jump <= max_rate * cfg.dt, "phase jump at the fault switch");
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// 3. Calibration

Outcome calibration() {
  kuramoto::KuramotoConfig cfg;
  const CouplingMatrix c = kuramoto::build_two_cluster_coupling(cfg);
  double at_w = 0.0, at_2w = 0.0;
  const std::size_t runs = 100;
  std::vector<double> col(cfg.n);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto traj = kuramoto::training_run_trajectory(cfg, c, r);
    for (std::size_t i = 0; i < cfg.n; ++i) col[i] = traj.phases(i, cfg.window - 1);
    at_w += kuramoto::within_cluster_order(col);
    for (std::size_t i = 0; i < cfg.n; ++i) col[i] = traj.phases(i, 2 * cfg.window - 1);
    at_2w += kuramoto::within_cluster_order(col);
  }
  at_w /= runs;
  at_2w /= runs;
  Outcome o;
  o.require(at_w < 0.9, "r(W) too high");
  o.require(at_2w > 0.95, "r(2W) too low");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("mean r at W ") + fmt("%.3f", at_w) +
              ", at 2W " + fmt("%.3f", at_2w) + " over 100 runs";
  return o;
}

// ---------------------------------------------------------------------------
// 9. Invariants

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

void randomize(diff::ParameterStore& store, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& [name, t] : store)
    for (double& v : t.mutable_data()) v = u(rng);
}

Outcome invariants() {
  Outcome o;
  std::mt19937_64 rng(2024);
  models::ModelConfig mc;
  mc.tcn.kernel_size = 3;
  mc.tcn.hidden_channels = 4;
  mc.tcn.levels = 2;
  mc.tcn.dropout = 0.0;

  bool post_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix raw = random_matrix(8, 8, rng, -6, 6);
    for (Activation act : {Activation::sigmoid, Activation::elu_plus_one}) {
      const Adjacency a = models::postprocess(raw, act);
      for (std::size_t i = 0; i < 8; ++i) {
        post_ok = post_ok && a.values(i, i) == 0.0;
        for (std::size_t j = 0; j < 8; ++j)
          post_ok = post_ok && a.values(i, j) == a.values(j, i) && a.values(i, j) >= 0.0;
      }
    }
  }
  o.require(post_ok, "postprocess invariants");

  bool equiv_ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    auto m = models::GsrModel::create(GraphSource::observation, mc, 8, trial);
    randomize(m.parameters(), rng, 0.4);
    const Matrix x = random_matrix(8, 60, rng);
    std::vector<std::size_t> p(8);
    for (std::size_t i = 0; i < 8; ++i) p[i] = i;
    std::shuffle(p.begin(), p.end(), rng);
    Matrix xp(8, 60);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t t = 0; t < 60; ++t) xp(i, t) = x(p[i], t);
    const Adjacency a = m.adjacency_for({x});
    const Adjacency ap = m.adjacency_for({xp});
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) equiv_ok = equiv_ok && ap.values(i, j) == a.values(p[i], p[j]);
  }
  o.require(equiv_ok, "observation generator not exactly permutation equivariant");

  bool const_ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    auto m = models::GsrModel::create(GraphSource::features, mc, 6, trial);
    randomize(m.parameters(), rng, 0.5);
    const Tensor zero = Tensor::zeros({6, 6});
    diff::NoGradGuard guard;
    const Tensor y1 = m.denoise(models::to_tensor(random_matrix(6, 30, rng)), zero, false, nullptr);
    const Tensor y2 = m.denoise(models::to_tensor(random_matrix(6, 30, rng)), zero, false, nullptr);
    for (std::size_t k = 0; k < y1.numel(); ++k) const_ok = const_ok && std::abs(y1.data()[k] - y2.data()[k]) < 1e-12;
  }
  o.require(const_ok, "denoiser output depends on input when A = 0");

  bool mono_ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Adjacency a = models::postprocess(random_matrix(8, 8, rng, -3, 3), Activation::sigmoid);
    const Adjacency b = models::postprocess(random_matrix(8, 8, rng, -3, 3), Activation::sigmoid);
    std::size_t prev = 64;
    for (double tau = 0.0; tau <= 1.05; tau += 0.05) {
      const auto r = diagnosis::residual(a, b, tau);
      std::size_t nz = 0;
      for (double v : r.values.values()) nz += v != 0.0;
      mono_ok = mono_ok && nz <= prev;
      prev = nz;
    }
  }
  o.require(mono_ok, "residual support not monotone in tau");

  // Full pipeline on a small configuration, twice and with different worker counts.
  training::ExperimentConfig cfg;
  cfg.kuramoto.window = 40;
  cfg.runs = 8;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.model = mc;
  cfg.model.tcn.dropout = 0.2;
  std::vector<GraphSource> sources;
  for (const auto& row : training::table_rows()) sources.push_back(row.source);
  auto pipeline = [&](std::size_t threads) {
    const auto out = training::run_experiment(cfg, {7}, sources, threads);
    nlohmann::json doc = nlohmann::json::array();
    for (std::size_t i = 0; i < sources.size(); ++i) {
      doc.push_back({out[0].rows[i].e_adj, out[0].rows[i].e_rec, out[0].models[i].to_json()});
    }
    auto k = cfg.kuramoto;
    k.seed = 7;
    const CouplingMatrix c = kuramoto::build_two_cluster_coupling(k);
    const auto run = kuramoto::make_diagnosis_run(k, c, kuramoto::Decouple{0});
    const auto& ref = out[0].model(GraphSource::reference);
    const auto& obs = out[0].model(GraphSource::observation);
    const double tau = diagnosis::resolve_tau({}, k, c, ref, obs);
    doc.push_back(tau);
    doc.push_back(diagnosis::diagnose(run.signal, ref, obs, tau, {}, k.window).raw.values.values());
    return doc.dump();
  };
  const std::string first = pipeline(1);
  o.require(first == pipeline(1), "pipeline not deterministic");
  o.require(first == pipeline(3), "pipeline depends on worker count");
  return o;
}

// ---------------------------------------------------------------------------
// 4-8. Trained models

struct SeedDiagnosis {
  std::uint64_t seed;
  double tau;
  diagnosis::Diagnosis decoupling, swap, healthy;
  kuramoto::DiagnosisRun decoupling_run;
};

bool recoverable_by_threshold(const Adjacency& a, const CouplingMatrix& c, double& gap) {
  double lowest_edge = 1e300, highest_other = -1e300;
  for (std::size_t i = 0; i < c.n(); ++i)
    for (std::size_t j = i + 1; j < c.n(); ++j) {
      if (c.values(i, j) != 0.0) {
        lowest_edge = std::min(lowest_edge, a.values(i, j));
      } else {
        highest_other = std::max(highest_other, a.values(i, j));
      }
    }
  gap = lowest_edge - highest_other;
  return gap > 0.0;
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : " ") + p;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  // --quick runs only the criteria that need no trained models.
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  std::printf("acceptance: %zu worker thread(s), %u hardware thread(s)\n", worker_count(),
              std::thread::hardware_concurrency());
  std::fflush(stdout);

  auto t0 = Clock::now();
  Outcome o1 = numerics();
  double s1 = since(t0);
  o1.require(s1 < 60.0, "runtime over 1 min");
  report(1, "numerics", o1, s1);

  t0 = Clock::now();
  Outcome o2 = simulator();
  double s2 = since(t0);
  o2.require(s2 < 120.0, "runtime over 2 min");
  report(2, "simulator", o2, s2);

  t0 = Clock::now();
  report(3, "calibration", calibration(), since(t0));

  t0 = Clock::now();
  Outcome o9 = invariants();
  const double s9 = since(t0);
  o9.require(s9 < 300.0, "runtime over 5 min");
  if (quick) {
    report(9, "invariants", o9, s9);
    return failures == 0 ? 0 : 1;
  }

  // Table reproduction at default settings.
  t0 = Clock::now();
  const training::ExperimentConfig cfg;
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<GraphSource> sources;
  for (const auto& row : training::table_rows()) sources.push_back(row.source);
  const auto outcomes = training::run_experiment(cfg, seeds, sources, worker_count());
  const auto report4 = training::aggregate(outcomes);
  const double s4 = since(t0);
  {
    std::printf("table (5 seeds):\n");
    for (const auto& r : report4.rows) {
      std::printf("  %-12s %-12s e_adj %.3f (%.3f)  e_rec %.3f (%.3f)\n", r.goal.c_str(),
                  r.configuration.c_str(), r.e_adj_mean, r.e_adj_std, r.e_rec_mean, r.e_rec_std);
    }
    std::fflush(stdout);
  }
  Outcome o4;
  const auto& tru = report4.row(GraphSource::true_structure);
  const auto& cor = report4.row(GraphSource::correlation);
  const auto& ref = report4.row(GraphSource::reference);
  const auto& fea = report4.row(GraphSource::features);
  const auto& obs = report4.row(GraphSource::observation);
  bool true_zero = true;
  for (double v : tru.e_adj) true_zero = true_zero && v == 0.0;
  o4.require(true_zero, "True e_adj not exactly 0");
  o4.require(ref.e_adj_mean <= 0.10, "G_ref e_adj " + fmt("%.3f", ref.e_adj_mean) + " > 0.10");
  o4.require(ref.e_adj_mean < cor.e_adj_mean, "G_ref e_adj not below Correlation");
  o4.require(obs.e_adj_mean < fea.e_adj_mean, "G_obs e_adj not below Features");
  o4.require(obs.e_rec_mean < fea.e_rec_mean, "G_obs e_rec not below Features");
  // The budget is stated for 8 cores; scale it when fewer are available.
  const double cores = std::min<double>(8.0, std::max<std::size_t>(1, worker_count()));
  const double budget = 30.0 * 60.0 * 8.0 / cores;
  o4.require(s4 < budget, "runtime " + fmt("%.0f", s4) + " s over the scaled budget");
  o4.detail += (o4.detail.empty() ? "" : "; ") + std::string("G_ref ") + fmt("%.3f", ref.e_adj_mean) +
               " vs Correlation " + fmt("%.3f", cor.e_adj_mean) + ", G_obs " +
               fmt("%.3f", obs.e_adj_mean) + "/" + fmt("%.3f", obs.e_rec_mean) + " vs Features " +
               fmt("%.3f", fea.e_adj_mean) + "/" + fmt("%.3f", fea.e_rec_mean) + ", budget " +
               fmt("%.0f", budget) + " s";
  report(4, "table", o4, s4);

  const CouplingMatrix coupling = kuramoto::build_two_cluster_coupling(cfg.kuramoto);

  t0 = Clock::now();
  Outcome o5;
  int recovered = 0;
  std::vector<std::string> gaps;
  for (const auto& out : outcomes) {
    double gap = 0.0;
    recovered += recoverable_by_threshold(out.model(GraphSource::reference).static_adjacency(), coupling, gap);
    gaps.push_back(fmt("%+.3f", gap));
  }
  o5.require(recovered >= 4, "recovered on fewer than 4 seeds");
  o5.detail += (o5.detail.empty() ? "" : "; ") + std::to_string(recovered) + "/5 seeds, edge gap " + join(gaps);
  report(5, "structure recovery", o5, since(t0));

  t0 = Clock::now();
  std::vector<SeedDiagnosis> diags;
  const diagnosis::DiagnosisConfig dcfg;
  for (const auto& out : outcomes) {
    auto k = cfg.kuramoto;
    k.seed = out.seed;
    const auto& mref = out.model(GraphSource::reference);
    const auto& mobs = out.model(GraphSource::observation);
    const double tau = diagnosis::resolve_tau(dcfg, k, coupling, mref, mobs);
    auto run_case = [&](diagnosis::FaultCase fc) {
      const auto run = kuramoto::make_diagnosis_run(k, coupling, diagnosis::fault_for(fc, coupling));
      return std::pair{diagnosis::diagnose(run.signal, mref, mobs, tau, dcfg.policy, k.window), run};
    };
    auto [dec, dec_run] = run_case(diagnosis::FaultCase::decoupling);
    auto swp = run_case(diagnosis::FaultCase::swap).first;
    auto hea = run_case(diagnosis::FaultCase::healthy).first;
    diags.push_back({out.seed, tau, std::move(dec), std::move(swp), std::move(hea), std::move(dec_run)});
  }
  const double s_diag = since(t0);

  Outcome o6;
  int top3 = 0;
  std::vector<std::string> d6;
  for (const auto& d : diags) {
    double changed = 0.0, unchanged = 0.0;
    int nc = 0, nu = 0;
    for (std::size_t i = 0; i < coupling.n(); ++i)
      for (std::size_t j = i + 1; j < coupling.n(); ++j) {
        const bool ch = d.decoupling_run.before.values(i, j) != d.decoupling_run.after.values(i, j);
        (ch ? changed : unchanged) += d.decoupling.raw.values(i, j);
        ++(ch ? nc : nu);
      }
    changed /= nc;
    unchanged /= nu;
    bool incident = true;
    for (std::size_t e = 0; e < 3; ++e) {
      const auto& edge = d.decoupling.report.ranked_edges[e];
      incident = incident && (edge.i == 0 || edge.j == 0);
    }
    top3 += incident;
    o6.require(changed > unchanged, "seed " + std::to_string(d.seed) + " removed-edge mean " +
                                         fmt("%.3f", changed) + " <= unchanged " + fmt("%.3f", unchanged));
    d6.push_back("s" + std::to_string(d.seed) + ":" + fmt("%.2f", changed) + "/" + fmt("%.2f", unchanged) +
                 (incident ? "+" : "-"));
  }
  o6.require(top3 >= 4, "top-3 edges incident to node 0 on " + std::to_string(top3) + "/5 seeds");
  o6.detail += (o6.detail.empty() ? "" : "; ") + std::string("removed/unchanged mean, top3 ") + join(d6);
  report(6, "decoupling", o6, s_diag);

  Outcome o7;
  int swap_ok = 0;
  std::vector<std::string> d7;
  for (const auto& d : diags) {
    const auto nodes = d.swap.report.ranked_nodes();
    const bool ok = std::set<std::size_t>{nodes[0], nodes[1]} == std::set<std::size_t>{0, 7};
    swap_ok += ok;
    d7.push_back("s" + std::to_string(d.seed) + ":" + std::to_string(nodes[0]) + "," + std::to_string(nodes[1]));
  }
  o7.require(swap_ok >= 4, "nodes 0 and 7 on top for " + std::to_string(swap_ok) + "/5 seeds");
  o7.detail += (o7.detail.empty() ? "" : "; ") + std::string("top-2 nodes ") + join(d7);
  report(7, "swap", o7, s_diag);

  Outcome o8;
  std::vector<std::string> d8;
  for (const auto& d : diags) {
    o8.require(d.healthy.flagged.empty(), "seed " + std::to_string(d.seed) + " flags " +
                                              std::to_string(d.healthy.flagged.size()) + " edges");
    d8.push_back("s" + std::to_string(d.seed) + ":tau " + fmt("%.3f", d.tau) + " flagged " +
                 std::to_string(d.healthy.flagged.size()));
  }
  o8.detail += (o8.detail.empty() ? "" : "; ") + join(d8);
  report(8, "healthy control", o8, s_diag);

  report(9, "invariants", o9, s9);

  std::printf("acceptance: %d criterion/criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
