#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsr/diff/tensor.hpp"

namespace gsr::diff {

/// Named learnable tensors. Iteration order is lexicographic by name, which
/// keeps optimizer updates and serialization deterministic.
class ParameterStore {
 public:
  static constexpr int kFormatVersion = 1;

  /// Registers a new leaf parameter. Names must be unique.
  Tensor& add(const std::string& name, Shape shape, std::vector<double> data);
  Tensor& add(const std::string& name, Tensor tensor);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(std::string_view prefix) const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  /// Allocates a zeroed grad slot for every entry.
  void ensure_grads();
  std::size_t parameter_count() const;

  /// Merges another store. Names must not collide.
  void merge(const ParameterStore& other);

  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ParameterStore from_json(const nlohmann::json& doc);

  void save(const std::filesystem::path& path) const;
  static ParameterStore load(const std::filesystem::path& path);

 private:
  std::map<std::string, Tensor> entries_;
};

}  // namespace gsr::diff
