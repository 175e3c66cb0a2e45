#pragma once

#include "gsr/matrix.hpp"

namespace gsr {

/// Ground-truth oscillator coupling: symmetric, zero diagonal.
struct CouplingMatrix {
  Matrix values;
  std::size_t n() const { return values.rows(); }
  bool operator==(const CouplingMatrix&) const = default;
};

/// Observable signal of a whole run, nodes x time steps.
struct SignalMatrix {
  Matrix values;
  bool operator==(const SignalMatrix&) const = default;
};

/// One N x W window of a multivariate series (clean, noisy, or denoised).
struct SignalWindow {
  Matrix values;
  std::size_t nodes() const { return values.rows(); }
  std::size_t length() const { return values.cols(); }
  bool operator==(const SignalWindow&) const = default;
};

/// Learned or baseline graph structure: symmetric, zero diagonal, non-negative.
struct Adjacency {
  Matrix values;
  std::size_t n() const { return values.rows(); }
  bool operator==(const Adjacency&) const = default;
};

}  // namespace gsr
