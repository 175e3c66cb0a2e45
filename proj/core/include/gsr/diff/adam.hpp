#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gsr/diff/parameter_store.hpp"

namespace gsr::diff {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates keyed by parameter name.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::uint64_t step_count() const { return t_; }

  const std::vector<double>& first_moment(const std::string& name) const;
  const std::vector<double>& second_moment(const std::string& name) const;

  /// One bias-corrected Adam update over every entry of the store, after
  /// which all grads are zeroed.
  void step(ParameterStore& store);

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

inline void adam_step(ParameterStore& store, AdamState& state) { state.step(store); }

}  // namespace gsr::diff
