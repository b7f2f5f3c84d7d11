#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "canfuse/error.hpp"

namespace canfuse {

// Dense row-major array of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> dims) {
    Tensor t;
    t.shape = std::move(dims);
    t.data.assign(t.numel_from_shape(), 0.0);
    return t;
  }

  static Tensor from(std::vector<std::size_t> dims, std::vector<double> values) {
    Tensor t;
    t.shape = std::move(dims);
    t.data = std::move(values);
    if (t.data.size() != t.numel_from_shape()) {
      fail(errc::shape_mismatch, "Tensor::from: data length does not match shape");
    }
    return t;
  }

  static Tensor vector(std::initializer_list<double> values) {
    return from({values.size()}, std::vector<double>(values));
  }

  std::size_t numel() const { return data.size(); }

  std::size_t numel_from_shape() const {
    std::size_t n = 1;
    for (const std::size_t d : shape) {
      if (d == 0) fail(errc::zero_dimension, "Tensor: zero dimension");
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (const double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool operator==(const Tensor&) const = default;
};

inline std::string shape_string(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape[i]);
  }
  return s + "]";
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    fail(errc::shape_mismatch,
         std::string(what) + ": shape " + shape_string(a) + " vs " + shape_string(b));
  }
}

}  // namespace canfuse
