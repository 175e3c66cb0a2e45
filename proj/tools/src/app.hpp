#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsr/diagnosis.hpp"
#include "gsr/training.hpp"

namespace gsr::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int internal = 1;
inline constexpr int config = 2;
inline constexpr int missing_prerequisite = 3;
}  // namespace exit_code

/// An earlier stage has not produced the files this stage needs.
class MissingPrerequisite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CliConfig {
  training::ExperimentConfig experiment;
  diagnosis::DiagnosisConfig diagnosis;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path output_dir = "gsr_out";

  void validate() const;
};

void to_json(nlohmann::json& j, const CliConfig& c);
void from_json(const nlohmann::json& j, CliConfig& c);

/// 16 hex digits of FNV-1a over the compact JSON dump.
std::string config_hash(const nlohmann::json& j);

/// Per-stage bookkeeping stored as manifest.json in the output directory.
class Manifest {
 public:
  explicit Manifest(std::filesystem::path dir);

  bool complete(const std::string& stage, const std::string& hash) const;
  std::string hash_of(const std::string& stage) const;
  void begin(const std::string& stage, const std::string& hash);
  void finish(const std::string& stage, std::vector<std::string> files);
  void fail(const std::string& stage, const std::string& error);
  void set_config(const nlohmann::json& config);
  const nlohmann::json& document() const { return doc_; }

 private:
  void save() const;
  std::filesystem::path path_;
  nlohmann::json doc_;
};

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(int argc, const char* const* argv);

}  // namespace gsr::cli
