#pragma once

#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tkgt {

// Dense row-major tensor. Rank 1 and 2 cover everything in this project;
// a scalar is a rank-1 tensor with a single element.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(count(shape), T(0));
  }
  Tensor(std::vector<std::size_t> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != count(shape))
      throw std::runtime_error("tensor: data size does not match shape " + shape_str());
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
  }
  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::size_t> s, T v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  std::size_t numel() const { return data.size(); }
  bool is_scalar() const { return data.size() == 1; }
  std::size_t rank() const { return shape.size(); }

  std::size_t rows() const {
    if (rank() != 2) throw std::runtime_error("tensor: rows() on rank-" + std::to_string(rank()) + " tensor");
    return shape[0];
  }
  std::size_t cols() const {
    if (rank() != 2) throw std::runtime_error("tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
    return shape[1];
  }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
  T& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ')';
    return os.str();
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape == b.shape;
}

}  // namespace tkgt
