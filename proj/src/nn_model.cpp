#include "gridse/nn/model.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gridse::nn {

Layer& Sequential::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

Tensor Sequential::forward(const Tensor& x, Mode mode, Rng* rng) {
  Tensor cur = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      cur = layers_[i]->forward(cur, mode, rng);
    } catch (const std::exception& e) {
      throw std::runtime_error("layer " + std::to_string(i) + " (" +
                               layers_[i]->describe() + "): " + e.what());
    }
  }
  return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor cur = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) cur = layers_[i]->backward(cur);
  return cur;
}

std::vector<Tensor*> Sequential::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_)
    for (Tensor* p : l->parameters()) out.push_back(p);
  return out;
}

std::vector<Tensor*> Sequential::gradients() {
  std::vector<Tensor*> out;
  for (auto& l : layers_)
    for (Tensor* g : l->gradients()) out.push_back(g);
  return out;
}

void Sequential::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
}

void Sequential::init_params(Rng& rng) {
  for (auto& l : layers_) l->init_params(rng);
}

long Sequential::parameter_count() {
  long n = 0;
  for (Tensor* p : parameters()) n += p->size();
  return n;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  os << t.rank();
  for (long d : t.shape) os << ' ' << d;
  os << '\n';
  char buf[40];
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a", t.data[i]);
    if (i) os << ' ';
    os << buf;
  }
  os << '\n';
}

Tensor read_tensor(std::istream& is) {
  int rank = 0;
  is >> rank;
  if (!is || rank < 0 || rank > 3) throw std::runtime_error("checkpoint: bad tensor rank");
  std::vector<long> shape(static_cast<std::size_t>(rank));
  for (long& d : shape) is >> d;
  Tensor t(shape);
  for (double& v : t.data) {
    std::string tok;
    is >> tok;
    v = std::strtod(tok.c_str(), nullptr);
  }
  if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
  return t;
}

void Sequential::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  os << "gridse-model v1\n";
  os << "layers " << layers_.size() << '\n';
  for (const auto& l : layers_) os << l->describe() << '\n';
  for (const auto& l : layers_) {
    auto* mut = const_cast<Layer*>(l.get());
    for (Tensor* p : mut->parameters()) write_tensor(os, *p);
    for (Tensor* s : mut->state()) write_tensor(os, *s);
  }
}

Sequential Sequential::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::string line;
  std::getline(is, line);
  if (line != "gridse-model v1")
    throw std::runtime_error("unsupported checkpoint header '" + line + "'");
  std::string word;
  std::size_t n = 0;
  is >> word >> n;
  std::getline(is, line);
  if (word != "layers") throw std::runtime_error("malformed checkpoint");

  Sequential model;
  for (std::size_t i = 0; i < n; ++i) {
    std::getline(is, line);
    model.add(layer_from_description(line));
  }
  for (std::size_t i = 0; i < n; ++i) {
    Layer& l = model.layer(i);
    for (Tensor* p : l.parameters()) {
      Tensor t = read_tensor(is);
      if (t.shape != p->shape) throw std::runtime_error("checkpoint: shape mismatch");
      *p = t;
    }
    for (Tensor* s : l.state()) {
      Tensor t = read_tensor(is);
      if (t.shape != s->shape) throw std::runtime_error("checkpoint: shape mismatch");
      *s = t;
    }
  }
  return model;
}

}  // namespace gridse::nn
