#pragma once

#include <Eigen/Dense>
#include <cassert>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridse::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

/// Dense row-major tensor of doubles, rank 1..3.
struct Tensor {
  std::vector<long> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<long> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(count(shape)), 0.0);
  }

  static long count(const std::vector<long>& s) {
    long n = 1;
    for (long d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<long> s) { return Tensor(std::move(s)); }

  long size() const { return static_cast<long>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  long dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  double& operator()(long i) { return data[static_cast<std::size_t>(i)]; }
  double operator()(long i) const { return data[static_cast<std::size_t>(i)]; }
  double& operator()(long i, long j) {
    return data[static_cast<std::size_t>(i * shape[1] + j)];
  }
  double operator()(long i, long j) const {
    return data[static_cast<std::size_t>(i * shape[1] + j)];
  }
  double& operator()(long i, long j, long k) {
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  double operator()(long i, long j, long k) const {
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }

  /// Same buffer, new shape; element count must match.
  Tensor reshaped(std::vector<long> s) const {
    if (count(s) != size()) throw std::runtime_error("tensor reshape: size mismatch");
    Tensor t;
    t.shape = std::move(s);
    t.data = data;
    return t;
  }

  MatMap mat(long rows, long cols) {
    assert(rows * cols == size());
    return MatMap(data.data(), rows, cols);
  }
  ConstMatMap mat(long rows, long cols) const {
    assert(rows * cols == size());
    return ConstMatMap(data.data(), rows, cols);
  }
  /// Rank-2 view using the tensor's own shape.
  MatMap mat2() { return mat(shape[0], size() / shape[0]); }
  ConstMatMap mat2() const { return mat(shape[0], size() / shape[0]); }

  VecMap vec() { return VecMap(data.data(), size()); }
  ConstVecMap vec() const { return ConstVecMap(data.data(), size()); }

  void set_zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

}  // namespace gridse::nn
