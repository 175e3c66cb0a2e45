#include "gsr/diff/parameter_store.hpp"

#include <fstream>

#include "gsr/io.hpp"

namespace gsr::diff {

Tensor& ParameterStore::add(const std::string& name, Shape shape, std::vector<double> data) {
  return add(name, Tensor::parameter(std::move(shape), std::move(data)));
}

Tensor& ParameterStore::add(const std::string& name, Tensor tensor) {
  if (name.empty()) throw ArgumentError("parameter name must be non-empty");
  if (contains(name)) throw StateError("duplicate parameter name '" + name + "'");
  tensor.node()->requires_grad = true;
  return entries_.emplace(name, std::move(tensor)).first->second;
}

Tensor& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw StateError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw StateError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParameterStore::names() const { return names_with_prefix(""); }

std::vector<std::string> ParameterStore::names_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) {
    if (std::string_view(name).substr(0, prefix.size()) == prefix) out.push_back(name);
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

void ParameterStore::ensure_grads() {
  for (auto& [_, t] : entries_) t.ensure_grad();
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

void ParameterStore::merge(const ParameterStore& other) {
  for (const auto& [name, t] : other.entries_) add(name, t);
}

nlohmann::json ParameterStore::to_json() const {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : entries_) {
    params[name] = {{"shape", t.shape()},
                    {"data", std::vector<double>(t.data().begin(), t.data().end())}};
  }
  return {{"format_version", kFormatVersion}, {"seed", seed}, {"params", std::move(params)}};
}

ParameterStore ParameterStore::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("format_version") || !doc.contains("params")) {
    throw StateError("checkpoint: missing format_version or params");
  }
  if (doc.at("format_version").get<int>() != kFormatVersion) {
    throw StateError("checkpoint: unsupported format_version " +
                     doc.at("format_version").dump());
  }
  ParameterStore store;
  store.seed = doc.value("seed", std::uint64_t{0});
  for (const auto& [name, entry] : doc.at("params").items()) {
    auto shape = entry.at("shape").get<Shape>();
    auto data = entry.at("data").get<std::vector<double>>();
    if (shape_numel(shape) != data.size()) {
      throw StateError("checkpoint: parameter '" + name + "' has inconsistent shape");
    }
    store.add(name, std::move(shape), std::move(data));
  }
  return store;
}

void ParameterStore::save(const std::filesystem::path& path) const {
  io::write_file_atomic(path, to_json().dump());
}

ParameterStore ParameterStore::load(const std::filesystem::path& path) {
  return from_json(io::read_json(path));
}

}  // namespace gsr::diff
