#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gridse/nn/layers.hpp"

namespace gridse::nn {

/// A feed-forward chain of layers.
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  Layer& add(std::unique_ptr<Layer> layer);

  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr);
  Tensor backward(const Tensor& dy);

  std::vector<Tensor*> parameters();
  std::vector<Tensor*> gradients();
  void zero_grad();
  void init_params(Rng& rng);
  long parameter_count();

  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

  /// Text checkpoint; parameter values are stored in hexfloat so a loaded
  /// model reproduces inference bit-exactly.
  void save(const std::string& path) const;
  static Sequential load(const std::string& path);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

}  // namespace gridse::nn
