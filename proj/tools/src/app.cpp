#include "app.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "gsr/config_error.hpp"
#include "gsr/io.hpp"
#include "gsr/kuramoto.hpp"
#include "gsr/parallel.hpp"

namespace gsr::cli {

namespace fs = std::filesystem;
using diagnosis::FaultCase;
using models::GraphSource;
using models::GsrModel;
using nlohmann::json;

void CliConfig::validate() const {
  experiment.validate();
  diagnosis.validate();
  if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds", "must not repeat");
  }
  const std::size_t w = experiment.kuramoto.window;
  const auto p = diagnosis.policy.resolve(w);
  if (p.end > 5 * w) throw ConfigError("diagnosis.region", "must end within the 5W diagnosis run");
  if (p.end < p.start + w) throw ConfigError("diagnosis.region", "must hold at least one window");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

void to_json(json& j, const CliConfig& c) {
  j = c.experiment;
  j["diagnosis"] = c.diagnosis;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir.string();
}

void from_json(const json& j, CliConfig& c) {
  reject_unknown_keys(j, "",
                      {"kuramoto", "noise", "model", "train", "diagnosis", "seeds", "output_dir"});
  json experiment = json::object();
  for (const char* key : {"kuramoto", "noise", "model", "train"}) {
    if (j.contains(key)) experiment[key] = j.at(key);
  }
  c.experiment = experiment.get<training::ExperimentConfig>();
  if (j.contains("diagnosis")) c.diagnosis = j.at("diagnosis").get<diagnosis::DiagnosisConfig>();
  read_optional(j, "seeds", c.seeds, "");
  std::string out = c.output_dir.string();
  read_optional(j, "output_dir", out, "");
  c.output_dir = out;
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

Manifest::Manifest(fs::path dir) : path_(std::move(dir) / "manifest.json") {
  if (fs::exists(path_)) {
    doc_ = io::read_json(path_);
  } else {
    doc_ = {{"format_version", 1}, {"stages", json::object()}};
  }
}

bool Manifest::complete(const std::string& stage, const std::string& hash) const {
  const auto& stages = doc_.at("stages");
  if (!stages.contains(stage)) return false;
  const auto& s = stages.at(stage);
  return s.value("status", "") == "complete" && s.value("config_hash", "") == hash;
}

std::string Manifest::hash_of(const std::string& stage) const {
  const auto& stages = doc_.at("stages");
  return stages.contains(stage) ? stages.at(stage).value("config_hash", "") : "";
}

void Manifest::begin(const std::string& stage, const std::string& hash) {
  doc_["stages"][stage] = {{"config_hash", hash}, {"status", "running"}, {"started", timestamp()}};
  save();
}

void Manifest::finish(const std::string& stage, std::vector<std::string> files) {
  auto& s = doc_["stages"][stage];
  s["status"] = "complete";
  s["finished"] = timestamp();
  s["files"] = std::move(files);
  save();
}

void Manifest::fail(const std::string& stage, const std::string& error) {
  auto& s = doc_["stages"][stage];
  s["status"] = "failed";
  s["finished"] = timestamp();
  s["error"] = error;
  save();
}

void Manifest::set_config(const json& config) {
  doc_["config"] = config;
  doc_["config_hash"] = config_hash(config);
  save();
}

void Manifest::save() const {
  fs::create_directories(path_.parent_path());
  io::write_json(path_, doc_);
}

// ---------------------------------------------------------------------------

namespace {

struct Paths {
  fs::path root;
  fs::path seed(std::uint64_t s) const { return root / ("seed_" + std::to_string(s)); }
  fs::path data(std::uint64_t s) const { return seed(s) / "data"; }
  fs::path models(std::uint64_t s) const { return seed(s) / "models"; }
  fs::path diagnosis(std::uint64_t s, FaultCase c) const {
    return seed(s) / "diagnosis" / std::string(diagnosis::to_string(c));
  }
  std::string rel(const fs::path& p) const { return fs::relative(p, root).generic_string(); }
};

std::string run_file(std::size_t run, const char* split) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "run_%04zu_%s.csv", run, split);
  return buf;
}

fs::path diagnosis_signal_file(const Paths& paths, std::uint64_t seed, FaultCase c) {
  return paths.data(seed) / ("diag_" + std::string(diagnosis::to_string(c)) + ".csv");
}

std::mutex log_mutex;

template <typename... Args>
void log(const Args&... args) {
  std::lock_guard lock(log_mutex);
  (std::cout << ... << args) << std::endl;
}

std::string simulate_hash(const CliConfig& c) {
  return config_hash({{"stage", "simulate"},
                      {"kuramoto", c.experiment.kuramoto},
                      {"runs", c.experiment.runs},
                      {"seeds", c.seeds}});
}

json training_section(const CliConfig& c) {
  const auto& e = c.experiment;
  return {{"model", e.model},
          {"noise", e.noise},
          {"epochs", e.epochs},
          {"batch_size", e.batch_size},
          {"learning_rate", e.learning_rate}};
}

std::string train_stage(GraphSource s) { return "train." + std::string(models::to_string(s)); }

std::string train_hash(const CliConfig& c, GraphSource s) {
  return config_hash({{"stage", train_stage(s)},
                      {"data", simulate_hash(c)},
                      {"training", training_section(c)}});
}

std::string eval_hash(const CliConfig& c) {
  return config_hash({{"stage", "eval"},
                      {"reference", train_hash(c, GraphSource::reference)},
                      {"observation", train_hash(c, GraphSource::observation)},
                      {"training", training_section(c)}});
}

std::string diagnose_stage(FaultCase fc) { return "diagnose." + std::string(diagnosis::to_string(fc)); }

std::string diagnose_hash(const CliConfig& c, FaultCase fc) {
  return config_hash({{"stage", diagnose_stage(fc)},
                      {"reference", train_hash(c, GraphSource::reference)},
                      {"observation", train_hash(c, GraphSource::observation)},
                      {"diagnosis", c.diagnosis}});
}

void require_stage(const Manifest& m, const std::string& stage, const std::string& hash,
                   const std::string& command) {
  if (m.complete(stage, hash)) return;
  const bool stale = !m.hash_of(stage).empty();
  throw MissingPrerequisite(stage + (stale ? " was run with a different configuration"
                                           : " has not been run") +
                            "; run `gsr " + command + "` first");
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw MissingPrerequisite("missing " + p.string());
}

template <typename Fn>
void run_stage(Manifest& m, const std::string& stage, const std::string& hash, bool force, Fn&& fn) {
  if (!force && m.complete(stage, hash)) {
    log(stage, ": up to date, skipped");
    return;
  }
  log(stage, ": running");
  m.begin(stage, hash);
  std::vector<std::string> files;
  try {
    files = fn();
  } catch (const std::exception& e) {
    m.fail(stage, e.what());
    throw;
  }
  m.finish(stage, std::move(files));
  log(stage, ": done");
}

Matrix coupling_matrix_from(const CliConfig& c) {
  return kuramoto::build_two_cluster_coupling(c.experiment.kuramoto).values;
}

kuramoto::KuramotoConfig seeded(const CliConfig& c, std::uint64_t seed) {
  auto k = c.experiment.kuramoto;
  k.seed = seed;
  return k;
}

// ---------------------------------------------------------------------------
// Stages

std::vector<std::string> do_simulate(const CliConfig& cfg, const Paths& paths) {
  const auto& e = cfg.experiment;
  const CouplingMatrix coupling = kuramoto::build_two_cluster_coupling(e.kuramoto);
  std::vector<std::vector<std::string>> files(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), worker_count(), [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const auto k = seeded(cfg, seed);
    const fs::path dir = paths.data(seed);
    fs::create_directories(dir);
    const auto ds = kuramoto::make_training_dataset(k, coupling, e.runs);
    for (std::size_t r = 0; r < e.runs; ++r) {
      for (const auto& [split, window] :
           {std::pair{"train", &ds.train[r]}, std::pair{"val", &ds.val[r]}}) {
        const fs::path p = dir / run_file(r, split);
        io::write_csv(p, window->values);
        files[i].push_back(paths.rel(p));
      }
    }
    for (FaultCase fc : {FaultCase::decoupling, FaultCase::swap}) {
      const auto run = kuramoto::make_diagnosis_run(k, coupling, diagnosis::fault_for(fc, coupling));
      const fs::path p = diagnosis_signal_file(paths, seed, fc);
      io::write_csv(p, run.signal.values);
      files[i].push_back(paths.rel(p));
    }
    json coupling_rows = json::array();
    for (std::size_t r = 0; r < coupling.n(); ++r) {
      const auto row = coupling.values.row(r);
      coupling_rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    const fs::path manifest = dir / "dataset.json";
    io::write_json(manifest, {{"seed", seed},
                              {"runs", e.runs},
                              {"nodes", k.n},
                              {"window", k.window},
                              {"kuramoto", k},
                              {"coupling", coupling_rows},
                              {"train_files", "run_{idx}_train.csv"},
                              {"val_files", "run_{idx}_val.csv"}});
    files[i].push_back(paths.rel(manifest));
    log("simulate: seed ", seed, ": ", e.runs, " runs");
  });
  std::vector<std::string> all;
  for (auto& f : files) all.insert(all.end(), f.begin(), f.end());
  return all;
}

std::vector<SignalWindow> load_split(const CliConfig& cfg, const Paths& paths, std::uint64_t seed,
                                     const char* split) {
  const fs::path dir = paths.data(seed);
  require_file(dir / "dataset.json");
  const auto& k = cfg.experiment.kuramoto;
  std::vector<SignalWindow> out;
  out.reserve(cfg.experiment.runs);
  for (std::size_t r = 0; r < cfg.experiment.runs; ++r) {
    const fs::path p = dir / run_file(r, split);
    require_file(p);
    Matrix m = io::read_csv(p);
    if (m.rows() != k.n || m.cols() != k.window) {
      throw io::FormatError(p.string() + ": expected " + std::to_string(k.n) + "x" +
                            std::to_string(k.window));
    }
    out.push_back({std::move(m)});
  }
  return out;
}

void write_loss_curve(const fs::path& p, const std::vector<double>& loss) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss\n";
  for (std::size_t e = 0; e < loss.size(); ++e) os << e + 1 << ',' << loss[e] << '\n';
  io::write_file_atomic(p, os.str());
}

fs::path checkpoint_file(const Paths& paths, std::uint64_t seed, GraphSource s) {
  return paths.models(seed) / (std::string(models::to_string(s)) + ".json");
}

fs::path loss_file(const Paths& paths, std::uint64_t seed, GraphSource s) {
  return paths.models(seed) / (std::string(models::to_string(s)) + "_loss.csv");
}

// Trains one configuration for one seed and writes checkpoint and loss curve.
training::TrainResult train_and_save(const CliConfig& cfg, const Paths& paths, std::uint64_t seed,
                                     GraphSource source, const kuramoto::Dataset& data,
                                     std::vector<std::string>& files) {
  const CouplingMatrix coupling{coupling_matrix_from(cfg)};
  auto result = training::train_source(data, coupling, cfg.experiment, source, seed);
  fs::create_directories(paths.models(seed));
  const fs::path ckpt = checkpoint_file(paths, seed, source);
  const fs::path loss = loss_file(paths, seed, source);
  result.model.save(ckpt);
  write_loss_curve(loss, result.epoch_loss);
  files.push_back(paths.rel(ckpt));
  files.push_back(paths.rel(loss));
  log(train_stage(source), ": seed ", seed, ": probe loss ", result.probe_loss_initial, " -> ",
      result.probe_loss_final);
  return result;
}

std::vector<std::string> do_train(const CliConfig& cfg, const Paths& paths, GraphSource source) {
  std::vector<std::vector<std::string>> files(cfg.seeds.size());
  std::vector<kuramoto::Dataset> data(cfg.seeds.size());
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    data[i].train = load_split(cfg, paths, cfg.seeds[i], "train");
  }
  parallel_for(cfg.seeds.size(), worker_count(), [&](std::size_t i) {
    train_and_save(cfg, paths, cfg.seeds[i], source, data[i], files[i]);
  });
  std::vector<std::string> all;
  for (auto& f : files) all.insert(all.end(), f.begin(), f.end());
  return all;
}

std::string format_table(const training::MetricsReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(13) << "goal" << std::setw(14) << "configuration" << std::setw(20)
     << "e_adj mean (std)"
     << "e_rec mean (std)\n";
  for (const auto& r : report.rows) {
    std::ostringstream adj, rec;
    adj << std::fixed << std::setprecision(3) << r.e_adj_mean << " (" << r.e_adj_std << ")";
    rec << std::fixed << std::setprecision(3) << r.e_rec_mean << " (" << r.e_rec_std << ")";
    os << std::setw(13) << r.goal << std::setw(14) << r.configuration << std::setw(20) << adj.str()
       << rec.str() << '\n';
  }
  return os.str();
}

std::vector<std::string> do_eval(const CliConfig& cfg, const Paths& paths) {
  const CouplingMatrix coupling{coupling_matrix_from(cfg)};
  const auto& rows = training::table_rows();
  const std::size_t n_seeds = cfg.seeds.size();

  for (std::uint64_t seed : cfg.seeds) {
    for (GraphSource s : {GraphSource::reference, GraphSource::observation}) {
      require_file(checkpoint_file(paths, seed, s));
    }
  }
  std::vector<kuramoto::Dataset> data(n_seeds);
  for (std::size_t i = 0; i < n_seeds; ++i) {
    data[i].train = load_split(cfg, paths, cfg.seeds[i], "train");
    data[i].val = load_split(cfg, paths, cfg.seeds[i], "val");
  }

  std::vector<training::SeedOutcome> outcomes(n_seeds);
  for (std::size_t i = 0; i < n_seeds; ++i) {
    outcomes[i].seed = cfg.seeds[i];
    outcomes[i].rows.resize(rows.size());
  }
  std::vector<std::vector<std::string>> files(n_seeds * rows.size());
  parallel_for(n_seeds * rows.size(), worker_count(), [&](std::size_t idx) {
    const std::size_t i = idx / rows.size();
    const GraphSource source = rows[idx % rows.size()].source;
    const std::uint64_t seed = cfg.seeds[i];
    const bool learned = source == GraphSource::reference || source == GraphSource::observation;
    const GsrModel model = learned
                               ? GsrModel::load(checkpoint_file(paths, seed, source))
                               : train_and_save(cfg, paths, seed, source, data[i], files[idx]).model;
    outcomes[i].rows[idx % rows.size()] =
        training::evaluate(model, data[i].val, coupling, cfg.experiment.noise, seed);
  });

  const auto report = training::aggregate(outcomes);
  const fs::path metrics = paths.root / "metrics.json";
  const fs::path per_seed = paths.root / "metrics_per_seed.csv";
  io::write_json(metrics, {{"seeds", report.seeds}, {"rows", report.to_json()}});
  io::write_file_atomic(per_seed, report.per_seed_csv());
  log(format_table(report));

  std::vector<std::string> all{paths.rel(metrics), paths.rel(per_seed)};
  for (auto& f : files) all.insert(all.end(), f.begin(), f.end());
  return all;
}

std::vector<std::string> do_diagnose(const CliConfig& cfg, const Paths& paths, FaultCase fc) {
  const CouplingMatrix coupling{coupling_matrix_from(cfg)};
  const std::size_t w = cfg.experiment.kuramoto.window;
  const auto policy = cfg.diagnosis.policy.resolve(w);
  std::vector<std::string> files;
  json summary = json::array();
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path ref_path = checkpoint_file(paths, seed, GraphSource::reference);
    const fs::path obs_path = checkpoint_file(paths, seed, GraphSource::observation);
    require_file(ref_path);
    require_file(obs_path);
    const GsrModel ref = GsrModel::load(ref_path);
    const GsrModel obs = GsrModel::load(obs_path);
    const auto k = seeded(cfg, seed);

    SignalMatrix signal;
    if (fc == FaultCase::healthy) {
      signal = kuramoto::make_diagnosis_run(k, coupling, diagnosis::fault_for(fc, coupling)).signal;
    } else {
      const fs::path p = diagnosis_signal_file(paths, seed, fc);
      require_file(p);
      signal.values = io::read_csv(p);
      if (signal.values.rows() != k.n || signal.values.cols() != 5 * w) {
        throw io::FormatError(p.string() + ": expected " + std::to_string(k.n) + "x" +
                              std::to_string(5 * w));
      }
    }
    const double tau = diagnosis::resolve_tau(cfg.diagnosis, k, coupling, ref, obs);
    const auto d = diagnosis::diagnose(signal, ref, obs, tau, cfg.diagnosis.policy, w);
    const fs::path dir = paths.diagnosis(seed, fc);
    diagnosis::write_outputs(dir, d, policy);
    for (const char* name :
         {"residual.csv", "report.json", "reference.pgm", "observation_avg.pgm", "residual.pgm"}) {
      files.push_back(paths.rel(dir / name));
    }

    const auto nodes = d.report.ranked_nodes();
    json top = json::array();
    for (std::size_t e = 0; e < std::min<std::size_t>(3, d.report.ranked_edges.size()); ++e) {
      top.push_back({d.report.ranked_edges[e].i, d.report.ranked_edges[e].j});
    }
    summary.push_back({{"seed", seed},
                       {"tau", tau},
                       {"flagged_edges", d.flagged.size()},
                       {"top_edges", top},
                       {"top_nodes", std::vector<std::size_t>(nodes.begin(), nodes.begin() + 2)}});
    log(diagnose_stage(fc), ": seed ", seed, ": tau ", tau, ", ", d.flagged.size(),
        " flagged, top edges ", top.dump(), ", top nodes ", nodes[0], " ", nodes[1]);
  }
  const fs::path out = paths.root / ("diagnosis_" + std::string(diagnosis::to_string(fc)) + ".json");
  io::write_json(out, {{"case", diagnosis::to_string(fc)}, {"seeds", summary}});
  files.push_back(paths.rel(out));
  return files;
}

// ---------------------------------------------------------------------------
// Commands

struct Options {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed_base;
  std::optional<std::size_t> runs;
  bool force = false;
  std::string model;
  std::string fault_case;
};

CliConfig load_config(const Options& o) {
  CliConfig cfg;
  if (!o.config_path.empty()) {
    json doc;
    try {
      doc = io::read_json(o.config_path);
    } catch (const io::FormatError& e) {
      throw ConfigError("--config", e.what());
    }
    cfg = doc.get<CliConfig>();
  }
  if (o.out) cfg.output_dir = *o.out;
  if (o.runs) cfg.experiment.runs = *o.runs;
  if (o.seed_base) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) cfg.seeds[i] = *o.seed_base + i;
  }
  cfg.validate();
  return cfg;
}

struct Session {
  CliConfig cfg;
  Paths paths;
  Manifest manifest;

  explicit Session(const Options& o)
      : cfg(load_config(o)), paths{cfg.output_dir}, manifest(cfg.output_dir) {
    fs::create_directories(cfg.output_dir);
    manifest.set_config(cfg);
  }
};

void cmd_simulate(Session& s, bool force) {
  run_stage(s.manifest, "simulate", simulate_hash(s.cfg), force,
            [&] { return do_simulate(s.cfg, s.paths); });
}

void cmd_train(Session& s, GraphSource source, bool force) {
  require_stage(s.manifest, "simulate", simulate_hash(s.cfg), "simulate");
  run_stage(s.manifest, train_stage(source), train_hash(s.cfg, source), force,
            [&] { return do_train(s.cfg, s.paths, source); });
}

void cmd_eval(Session& s, bool force) {
  require_stage(s.manifest, "simulate", simulate_hash(s.cfg), "simulate");
  for (GraphSource src : {GraphSource::reference, GraphSource::observation}) {
    require_stage(s.manifest, train_stage(src), train_hash(s.cfg, src),
                  "train --model " + std::string(models::to_string(src)));
  }
  run_stage(s.manifest, "eval", eval_hash(s.cfg), force, [&] { return do_eval(s.cfg, s.paths); });
}

void cmd_diagnose(Session& s, FaultCase fc, bool force) {
  if (fc != FaultCase::healthy) {
    require_stage(s.manifest, "simulate", simulate_hash(s.cfg), "simulate");
  }
  for (GraphSource src : {GraphSource::reference, GraphSource::observation}) {
    require_stage(s.manifest, train_stage(src), train_hash(s.cfg, src),
                  "train --model " + std::string(models::to_string(src)));
  }
  run_stage(s.manifest, diagnose_stage(fc), diagnose_hash(s.cfg, fc), force,
            [&] { return do_diagnose(s.cfg, s.paths, fc); });
}

void write_summary(const Session& s) {
  const json metrics = io::read_json(s.paths.root / "metrics.json");
  std::ostringstream os;
  os << "seeds:";
  for (std::uint64_t seed : s.cfg.seeds) os << ' ' << seed;
  os << "\n\n";
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(13) << "goal" << std::setw(14) << "configuration" << std::setw(20)
     << "e_adj mean (std)"
     << "e_rec mean (std)\n";
  for (const auto& r : metrics.at("rows")) {
    std::ostringstream adj, rec;
    adj << std::fixed << std::setprecision(3) << r.at("e_adj_mean").get<double>() << " ("
        << r.at("e_adj_std").get<double>() << ")";
    rec << std::fixed << std::setprecision(3) << r.at("e_rec_mean").get<double>() << " ("
        << r.at("e_rec_std").get<double>() << ")";
    os << std::setw(13) << r.at("goal").get<std::string>() << std::setw(14)
       << r.at("configuration").get<std::string>() << std::setw(20) << adj.str() << rec.str()
       << '\n';
  }
  for (FaultCase fc : {FaultCase::decoupling, FaultCase::swap, FaultCase::healthy}) {
    const json d = io::read_json(s.paths.root /
                                 ("diagnosis_" + std::string(diagnosis::to_string(fc)) + ".json"));
    os << "\n" << diagnosis::to_string(fc) << ":\n";
    for (const auto& e : d.at("seeds")) {
      os << "  seed " << e.at("seed").get<std::uint64_t>() << "  tau " << e.at("tau").get<double>()
         << "  flagged " << e.at("flagged_edges").get<std::size_t>() << "  top edges "
         << e.at("top_edges").dump() << "  top nodes " << e.at("top_nodes").dump() << '\n';
    }
  }
  io::write_file_atomic(s.paths.root / "summary.txt", os.str());
  log(os.str());
}

void cmd_reproduce(Session& s, bool force) {
  cmd_simulate(s, force);
  cmd_train(s, GraphSource::reference, force);
  cmd_train(s, GraphSource::observation, force);
  cmd_eval(s, force);
  for (FaultCase fc : {FaultCase::decoupling, FaultCase::swap, FaultCase::healthy}) {
    cmd_diagnose(s, fc, force);
  }
  write_summary(s);
}

}  // namespace

int run(int argc, const char* const* argv) {
  tune_allocator();
  CLI::App app{"Graph structure learning and residual-based fault diagnosis on Kuramoto data"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory (overrides output_dir)");
    sub->add_option("--seed-base", o.seed_base, "Use seeds base, base+1, ...");
    sub->add_option("--runs", o.runs, "Simulated runs per seed (overrides train.runs)");
    sub->add_flag("--force", o.force, "Re-run stages that are up to date");
  };
  auto* simulate = app.add_subcommand("simulate", "Simulate training data and diagnosis runs");
  auto* train = app.add_subcommand("train", "Train the reference and/or observation model");
  auto* eval = app.add_subcommand("eval", "Evaluate all configurations and write metrics.json");
  auto* diag = app.add_subcommand("diagnose", "Run residual diagnosis for a fault case");
  auto* reproduce = app.add_subcommand("reproduce", "Run every stage for all seeds");
  for (auto* sub : {simulate, train, eval, diag, reproduce}) common(sub);
  train->add_option("--model", o.model, "reference or observation (default: both)")
      ->check(CLI::IsMember({"reference", "observation"}));
  diag->add_option("--case", o.fault_case, "decoupling, swap or healthy (default: all)")
      ->check(CLI::IsMember({"decoupling", "swap", "healthy"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_code::ok : exit_code::config;
  }

  try {
    Session s(o);
    if (simulate->parsed()) {
      cmd_simulate(s, o.force);
    } else if (train->parsed()) {
      if (o.model.empty() || o.model == "reference") cmd_train(s, GraphSource::reference, o.force);
      if (o.model.empty() || o.model == "observation") cmd_train(s, GraphSource::observation, o.force);
    } else if (eval->parsed()) {
      cmd_eval(s, o.force);
    } else if (diag->parsed()) {
      if (o.fault_case.empty()) {
        for (FaultCase fc : {FaultCase::decoupling, FaultCase::swap, FaultCase::healthy}) {
          cmd_diagnose(s, fc, o.force);
        }
      } else {
        cmd_diagnose(s, diagnosis::fault_case_from_string(o.fault_case), o.force);
      }
    } else if (reproduce->parsed()) {
      cmd_reproduce(s, o.force);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const MissingPrerequisite& e) {
    std::cerr << "missing prerequisite: " << e.what() << '\n';
    return exit_code::missing_prerequisite;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::internal;
  }
  return exit_code::ok;
}

}  // namespace gsr::cli
