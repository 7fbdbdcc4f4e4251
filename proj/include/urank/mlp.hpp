#pragma once

// Small dense feed-forward network with manual backprop.
//
// All layers are affine; hidden layers apply ReLU, the last layer is
// linear. Callers squash the output themselves (sigmoid for click
// probabilities, clipping for ranking scores) so the same net serves
// both uses. Parameters are addressable through a flat index, which the
// finite-difference tests use to perturb single weights.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace urank {

struct LayerGrad {
  std::vector<double> w;
  std::vector<double> b;
};

struct MlpGrad {
  std::vector<LayerGrad> layers;
  void zero();
  void scale(double a);
  bool finite() const;
};

class Mlp {
 public:
  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major, w[o * in + i]
    std::vector<double> b;
  };

  Mlp() = default;
  // dims = {input, hidden..., output}; weights get Xavier-uniform init,
  // biases start at zero. Same seed, same net.
  Mlp(const std::vector<int>& dims, std::uint64_t seed);

  int input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  int output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::vector<int> dims() const;

  // Forward pass. When `trace` is non-null it receives the
  // post-activation vector of every layer (needed by backward).
  std::vector<double> forward(std::span<const double> x,
                              std::vector<std::vector<double>>* trace = nullptr) const;

  // Accumulates dL/dparams into `g` given dL/doutput. `trace` must come
  // from a forward() call on the same `x`. Optionally also yields dL/dx.
  void backward(std::span<const double> x,
                const std::vector<std::vector<double>>& trace,
                std::span<const double> dout, MlpGrad& g,
                std::vector<double>* dx = nullptr) const;

  MlpGrad zero_grad() const;
  void sgd_step(const MlpGrad& g, double lr);

  std::size_t param_count() const;
  double get_param(std::size_t flat) const;
  void set_param(std::size_t flat, double v);

  const std::vector<Layer>& layers() const { return layers_; }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::vector<Layer> layers_;
};

}  // namespace urank
