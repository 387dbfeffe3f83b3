#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "laser/diffcore/tape.hpp"

namespace laser::diff {

enum class Activation { identity, tanh, relu };

// How a forward pass places network parameters on the tape.
enum class ParamMode {
  track,     // gradients flow into the parameters
  constant,  // parameters are frozen for this pass
};

// Fully connected network. Weights are [d_in, d_out] so a batch [n, d_in]
// maps to [n, d_out] with a single matmul per layer.
class Mlp {
 public:
  Mlp() = default;
  // Uniform init in +-1/sqrt(fan_in) for weights and biases.
  Mlp(std::string name, std::vector<std::size_t> layer_dims, Activation hidden, Activation output,
      std::mt19937_64& rng);

  Mlp(const Mlp& other);
  Mlp& operator=(const Mlp& other);
  Mlp(Mlp&&) noexcept = default;
  Mlp& operator=(Mlp&&) noexcept = default;

  const std::string& name() const { return name_; }
  const std::vector<std::size_t>& layer_dims() const { return layer_dims_; }
  std::size_t input_dim() const { return layer_dims_.front(); }
  std::size_t output_dim() const { return layer_dims_.back(); }
  std::size_t num_layers() const { return weights_.size(); }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  const Parameter& weight(std::size_t layer) const { return weights_[layer]; }
  const Parameter& bias(std::size_t layer) const { return biases_[layer]; }
  Parameter& weight(std::size_t layer) { return weights_[layer]; }
  Parameter& bias(std::size_t layer) { return biases_[layer]; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;

  void zero_output_layer();
  void zero_all();
  // this <- tau * online + (1 - tau) * this, elementwise.
  void soft_update_from(const Mlp& online, double tau);
  bool same_architecture(const Mlp& other) const;

 private:
  std::string name_;
  std::vector<std::size_t> layer_dims_;
  Activation hidden_ = Activation::relu;
  Activation output_ = Activation::identity;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

// Records every layer on the input's tape. The input tensor is never modified.
Var forward_mlp(const Mlp& net, Var input, ParamMode mode = ParamMode::track);

// Tape-free evaluation for rollouts.
Tensor forward_mlp(const Mlp& net, const Tensor& input);

}  // namespace laser::diff
