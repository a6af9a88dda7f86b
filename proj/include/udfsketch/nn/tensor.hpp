#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "udfsketch/error.hpp"

namespace udfsketch::nn {

/// Dense row-major tensor. Image tensors are (batch, channels, height, width);
/// vector tensors are (batch, features).
template <class S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, S fill = S{0}) : shape(std::move(dims)) {
    for (int d : shape) require(d > 0, ErrorCode::shape_error, "tensor dimensions must be positive");
    data.assign(count(shape), fill);
  }
  Tensor(std::vector<int> dims, std::vector<S> values) : shape(std::move(dims)), data(std::move(values)) {
    require(data.size() == count(shape), ErrorCode::shape_error, "tensor data length must equal product of shape");
  }

  static std::size_t count(const std::vector<int>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  std::size_t numel() const noexcept { return data.size(); }
  int rank() const noexcept { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  // Image accessors; valid for rank-4 tensors.
  int batch() const { return shape[0]; }
  int channels() const { return shape[1]; }
  int height() const { return shape[2]; }
  int width() const { return shape[3]; }
  std::size_t plane() const { return static_cast<std::size_t>(shape[2]) * shape[3]; }

  S& operator[](std::size_t i) { return data[i]; }
  const S& operator[](std::size_t i) const { return data[i]; }
  S& at(int n, int c, int y, int x) {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
  }
  const S& at(int n, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
  }
  S* channel_ptr(int n, int c) { return data.data() + (static_cast<std::size_t>(n) * shape[1] + c) * plane(); }
  const S* channel_ptr(int n, int c) const {
    return data.data() + (static_cast<std::size_t>(n) * shape[1] + c) * plane();
  }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  template <class T>
  Tensor<T> cast() const {
    return Tensor<T>(shape, std::vector<T>(data.begin(), data.end()));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

template <class S>
bool same_shape(const Tensor<S>& a, const Tensor<S>& b) {
  return a.shape == b.shape;
}

template <class S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
  require(a.shape == b.shape, ErrorCode::shape_error, what);
}

template <class S>
void require_finite(const Tensor<S>& t, const char* what) {
  for (S v : t.data)
    if (!std::isfinite(static_cast<double>(v))) fail(ErrorCode::parameter_error, std::string("non-finite value in ") + what);
}

/// Learnable tensor with its accumulated gradient.
template <class S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}

  void zero_grad() { grad.fill(S{0}); }
};

template <class S>
using ParameterList = std::vector<Parameter<S>*>;

template <class S>
void zero_grad(const ParameterList<S>& params) {
  for (auto* p : params) p->zero_grad();
}

template <class S, class Rng>
void fill_normal(Tensor<S>& t, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data) v = static_cast<S>(dist(rng));
}

/// Copies parameter values across scalar types; names and shapes must match in order.
template <class To, class From>
void copy_parameters(const ParameterList<To>& dst, const ParameterList<From>& src) {
  require(dst.size() == src.size(), ErrorCode::shape_error, "parameter count mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    require(dst[i]->value.shape == src[i]->value.shape && dst[i]->name == src[i]->name, ErrorCode::shape_error,
            "parameter layout mismatch");
    std::copy(src[i]->value.data.begin(), src[i]->value.data.end(), dst[i]->value.data.begin());
  }
}

}  // namespace udfsketch::nn
