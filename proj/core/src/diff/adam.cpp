#include "gsr/diff/adam.hpp"

#include <cmath>

namespace gsr::diff {

const std::vector<double>& AdamState::first_moment(const std::string& name) const {
  auto it = moments_.find(name);
  if (it == moments_.end()) throw StateError("no Adam state for '" + name + "'");
  return it->second.m;
}

const std::vector<double>& AdamState::second_moment(const std::string& name) const {
  auto it = moments_.find(name);
  if (it == moments_.end()) throw StateError("no Adam state for '" + name + "'");
  return it->second.v;
}

void AdamState::step(ParameterStore& store) {
  for (const auto& [name, t] : store) {
    if (!t.has_grad()) throw StateError("parameter '" + name + "' has no grad slot");
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double step_size = config_.learning_rate / correction1;

  for (auto& [name, t] : store) {
    auto& mom = moments_[name];
    if (mom.m.size() != t.numel()) {
      mom.m.assign(t.numel(), 0.0);
      mom.v.assign(t.numel(), 0.0);
    }
    auto values = t.mutable_data();
    auto grad = t.mutable_grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g;
      mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g * g;
      const double denom = std::sqrt(mom.v[i] / correction2) + config_.epsilon;
      values[i] -= step_size * mom.m[i] / denom;
      grad[i] = 0.0;
    }
  }
}

}  // namespace gsr::diff
