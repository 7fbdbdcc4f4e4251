#include "urank/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "urank/kernels.hpp"
#include "urank/rng.hpp"

namespace urank {

void MlpGrad::zero() {
  for (auto& l : layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
}

void MlpGrad::scale(double a) {
  for (auto& l : layers) {
    kernels::scale(a, l.w.data(), l.w.size());
    kernels::scale(a, l.b.data(), l.b.size());
  }
}

bool MlpGrad::finite() const {
  for (const auto& l : layers) {
    for (double v : l.w)
      if (!std::isfinite(v)) return false;
    for (double v : l.b)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

Mlp::Mlp(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("mlp: dims must be positive");
  Rng rng(seed);
  layers_.resize(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer& layer = layers_[l];
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
    layer.b.assign(layer.out, 0.0);
    const double bound = std::sqrt(6.0 / (layer.in + layer.out));
    for (double& w : layer.w) w = rng.uniform(-bound, bound);
  }
}

std::vector<int> Mlp::dims() const {
  std::vector<int> d;
  if (layers_.empty()) return d;
  d.push_back(layers_.front().in);
  for (const auto& l : layers_) d.push_back(l.out);
  return d;
}

std::vector<double> Mlp::forward(std::span<const double> x,
                                 std::vector<std::vector<double>>* trace) const {
  if (layers_.empty()) throw std::logic_error("mlp: empty network");
  if (static_cast<int>(x.size()) != input_dim())
    throw std::invalid_argument("mlp: input size mismatch");
  if (trace) {
    trace->clear();
    trace->reserve(layers_.size());
  }
  std::vector<double> act(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    std::vector<double> next(layer.out);
    for (int o = 0; o < layer.out; ++o) {
      next[o] = layer.b[o] +
                kernels::dot(layer.w.data() + static_cast<std::size_t>(o) * layer.in,
                             act.data(), static_cast<std::size_t>(layer.in));
    }
    if (l + 1 < layers_.size()) {
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    }
    if (trace) trace->push_back(next);
    act = std::move(next);
  }
  return act;
}

void Mlp::backward(std::span<const double> x,
                   const std::vector<std::vector<double>>& trace,
                   std::span<const double> dout, MlpGrad& g,
                   std::vector<double>* dx) const {
  if (trace.size() != layers_.size()) throw std::invalid_argument("mlp: bad trace");
  if (static_cast<int>(dout.size()) != output_dim())
    throw std::invalid_argument("mlp: dout size mismatch");
  if (g.layers.size() != layers_.size()) throw std::invalid_argument("mlp: bad grad shape");

  std::vector<double> delta(dout.begin(), dout.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    // Post-ReLU activations are zero exactly where the pre-activations
    // were non-positive, so the trace doubles as the ReLU mask.
    const double* a_prev = li == 0 ? x.data() : trace[li - 1].data();
    const std::size_t in = static_cast<std::size_t>(layer.in);
    LayerGrad& lg = g.layers[li];
    for (int o = 0; o < layer.out; ++o) {
      lg.b[o] += delta[o];
      kernels::axpy(delta[o], a_prev, lg.w.data() + static_cast<std::size_t>(o) * in, in);
    }
    const bool need_prev = li > 0 || dx != nullptr;
    if (!need_prev) break;
    std::vector<double> prev(in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      kernels::axpy(delta[o], layer.w.data() + static_cast<std::size_t>(o) * in,
                    prev.data(), in);
    }
    if (li > 0) {
      for (std::size_t i = 0; i < in; ++i)
        if (trace[li - 1][i] <= 0.0) prev[i] = 0.0;
    }
    delta = std::move(prev);
  }
  if (dx) *dx = std::move(delta);
}

MlpGrad Mlp::zero_grad() const {
  MlpGrad g;
  g.layers.resize(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    g.layers[l].w.assign(layers_[l].w.size(), 0.0);
    g.layers[l].b.assign(layers_[l].b.size(), 0.0);
  }
  return g;
}

void Mlp::sgd_step(const MlpGrad& g, double lr) {
  if (g.layers.size() != layers_.size()) throw std::invalid_argument("mlp: bad grad shape");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    kernels::axpy(-lr, g.layers[l].w.data(), layers_[l].w.data(), layers_[l].w.size());
    kernels::axpy(-lr, g.layers[l].b.data(), layers_[l].b.data(), layers_[l].b.size());
  }
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

double Mlp::get_param(std::size_t flat) const {
  for (const auto& l : layers_) {
    if (flat < l.w.size()) return l.w[flat];
    flat -= l.w.size();
    if (flat < l.b.size()) return l.b[flat];
    flat -= l.b.size();
  }
  throw std::out_of_range("mlp: parameter index");
}

void Mlp::set_param(std::size_t flat, double v) {
  for (auto& l : layers_) {
    if (flat < l.w.size()) {
      l.w[flat] = v;
      return;
    }
    flat -= l.w.size();
    if (flat < l.b.size()) {
      l.b[flat] = v;
      return;
    }
    flat -= l.b.size();
  }
  throw std::out_of_range("mlp: parameter index");
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json j;
  j["dims"] = dims();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) layers.push_back({{"w", l.w}, {"b", l.b}});
  j["layers"] = std::move(layers);
  return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  const auto dims = j.at("dims").get<std::vector<int>>();
  Mlp net(dims, 0);
  const auto& layers = j.at("layers");
  if (layers.size() != net.layers_.size()) throw std::invalid_argument("mlp: bad layer count");
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    auto w = layers[l].at("w").get<std::vector<double>>();
    auto b = layers[l].at("b").get<std::vector<double>>();
    if (w.size() != net.layers_[l].w.size() || b.size() != net.layers_[l].b.size())
      throw std::invalid_argument("mlp: bad layer shape");
    net.layers_[l].w = std::move(w);
    net.layers_[l].b = std::move(b);
  }
  return net;
}

}  // namespace urank
