#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetmp {

/// Dense row-major tensor of doubles. Desk scale: everything fits in memory,
/// no views, no striding tricks.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != static_cast<size_t>(numel_of(shape)))
      throw std::invalid_argument("Tensor: data length does not match shape");
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.data[i * n + i] = 1.0;
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[i]; }

  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  double& at(int i) { return data[i]; }
  double at(int i) const { return data[i]; }
  double& at(int i, int j) { return data[static_cast<int64_t>(i) * cols() + j]; }
  double at(int i, int j) const { return data[static_cast<int64_t>(i) * cols() + j]; }
  // 3-d access, shape [a,b,c]
  double& at(int i, int j, int k) {
    return data[(static_cast<int64_t>(i) * shape[1] + j) * shape[2] + k];
  }
  double at(int i, int j, int k) const {
    return data[(static_cast<int64_t>(i) * shape[1] + j) * shape[2] + k];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  double max_abs() const;

  std::string shape_str() const;
};

/// Deterministic RNG wrapper; one instance per independent stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}
  double uniform() { return uni_(gen_); }             // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return norm_(gen_); }
  int randint(int n) {  // [0, n)
    return static_cast<int>(gen_() % static_cast<uint64_t>(n));
  }
  std::mt19937_64& engine() { return gen_; }

  Tensor normal_tensor(std::vector<int> shape, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = normal() * stddev;
    return t;
  }
  Tensor uniform_tensor(std::vector<int> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = uniform(lo, hi);
    return t;
  }
  /// Glorot-uniform init for a [fan_in, fan_out] matrix.
  Tensor glorot(int fan_in, int fan_out) {
    double b = std::sqrt(6.0 / (fan_in + fan_out));
    return uniform_tensor({fan_in, fan_out}, -b, b);
  }

 private:
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> uni_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace hetmp
