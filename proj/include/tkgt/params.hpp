#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tkgt/rng.hpp"
#include "tkgt/tensor.hpp"

namespace tkgt {

// Named registry of learnable tensors. Registration order is the canonical
// parameter order used by the optimizer, gradient stores, and checkpoints.
template <typename T>
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Tensor<T>> tensors;

  int add(std::string name, Tensor<T> t) {
    if (find(name) >= 0) throw std::runtime_error("param already registered: " + name);
    names.push_back(std::move(name));
    tensors.push_back(std::move(t));
    return static_cast<int>(tensors.size()) - 1;
  }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }

  Tensor<T>& operator[](int pid) { return tensors[pid]; }
  const Tensor<T>& operator[](int pid) const { return tensors[pid]; }
  std::size_t size() const { return tensors.size(); }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.numel();
    return n;
  }
};

// uniform(-0.1/sqrt(d), 0.1/sqrt(d)) table init.
template <typename T>
Tensor<T> uniform_init(std::vector<std::size_t> shape, std::size_t d, Rng& rng) {
  double bound = 0.1 / std::sqrt(static_cast<double>(d));
  Tensor<T> t(std::move(shape));
  for (auto& x : t.data) x = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace tkgt
