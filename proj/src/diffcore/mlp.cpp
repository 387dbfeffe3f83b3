#include "laser/diffcore/mlp.hpp"

#include <Eigen/Core>
#include <cmath>

#include "laser/diffcore/ops.hpp"
#include "laser/error.hpp"

namespace laser::diff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Var activate(Var x, Activation act) {
  switch (act) {
    case Activation::identity:
      return x;
    case Activation::tanh:
      return tanh(x);
    case Activation::relu:
      return relu(x);
  }
  return x;
}

void activate_inplace(RowMat& x, Activation act) {
  switch (act) {
    case Activation::identity:
      return;
    case Activation::tanh:
      x = x.array().tanh();
      return;
    case Activation::relu:
      x = x.array().max(0.0);
      return;
  }
}

}  // namespace

Mlp::Mlp(std::string name, std::vector<std::size_t> layer_dims, Activation hidden, Activation output,
         std::mt19937_64& rng)
    : name_(std::move(name)), layer_dims_(std::move(layer_dims)), hidden_(hidden), output_(output) {
  if (layer_dims_.size() < 2) throw DimensionError("mlp '" + name_ + "' needs at least two layer dims");
  for (std::size_t d : layer_dims_) {
    if (d == 0) throw DimensionError("mlp '" + name_ + "' has a zero-width layer");
  }
  weights_.reserve(layer_dims_.size() - 1);
  biases_.reserve(layer_dims_.size() - 1);
  for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
    const std::size_t fan_in = layer_dims_[l];
    const std::size_t fan_out = layer_dims_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> init(-bound, bound);
    Tensor w({fan_in, fan_out});
    for (double& v : w.data()) v = init(rng);
    Tensor b({1, fan_out});
    for (double& v : b.data()) v = init(rng);
    const std::string prefix = name_ + ".l" + std::to_string(l);
    weights_.push_back(Parameter{prefix + ".w", std::move(w)});
    biases_.push_back(Parameter{prefix + ".b", std::move(b)});
  }
}

Mlp::Mlp(const Mlp& other) = default;
Mlp& Mlp::operator=(const Mlp& other) = default;

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].value.size() + biases_[l].value.size();
  return n;
}

void Mlp::zero_output_layer() {
  weights_.back().value.fill(0.0);
  biases_.back().value.fill(0.0);
}

void Mlp::zero_all() {
  for (Parameter* p : parameters()) p->value.fill(0.0);
}

bool Mlp::same_architecture(const Mlp& other) const {
  return layer_dims_ == other.layer_dims_ && hidden_ == other.hidden_ && output_ == other.output_;
}

void Mlp::soft_update_from(const Mlp& online, double tau) {
  if (!same_architecture(online)) {
    throw DimensionError("soft update between '" + online.name_ + "' and '" + name_ +
                         "' with different architectures");
  }
  auto dst = parameters();
  auto src = online.parameters();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    auto d = dst[k]->value.data();
    auto s = src[k]->value.data();
    if (tau == 1.0) {
      std::copy(s.begin(), s.end(), d.begin());
      continue;
    }
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = tau * s[i] + (1.0 - tau) * d[i];
  }
}

Var forward_mlp(const Mlp& net, Var input, ParamMode mode) {
  if (input.value().cols() != net.input_dim()) {
    throw DimensionError("mlp '" + net.name() + "' expects input width " + std::to_string(net.input_dim()) +
                         ", got " + shape_string(input.value().shape()));
  }
  Tape& tape = input.tape();
  Var x = input;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Var w = mode == ParamMode::track ? tape.parameter(net.weight(l)) : tape.constant(net.weight(l).value);
    Var b = mode == ParamMode::track ? tape.parameter(net.bias(l)) : tape.constant(net.bias(l).value);
    x = linear(x, w, b);
    const bool last = l + 1 == net.num_layers();
    x = activate(x, last ? net.output_activation() : net.hidden_activation());
  }
  return x;
}

Tensor forward_mlp(const Mlp& net, const Tensor& input) {
  if (input.cols() != net.input_dim()) {
    throw DimensionError("mlp '" + net.name() + "' expects input width " + std::to_string(net.input_dim()) +
                         ", got " + shape_string(input.shape()));
  }
  const auto rows = static_cast<Eigen::Index>(input.rows());
  RowMat x = Eigen::Map<const RowMat>(input.raw(), rows, static_cast<Eigen::Index>(input.cols()));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const Tensor& w = net.weight(l).value;
    const Tensor& b = net.bias(l).value;
    Eigen::Map<const RowMat> wm(w.raw(), static_cast<Eigen::Index>(w.rows()), static_cast<Eigen::Index>(w.cols()));
    Eigen::Map<const Eigen::RowVectorXd> bm(b.raw(), static_cast<Eigen::Index>(b.cols()));
    RowMat y = x * wm;
    y.rowwise() += bm;
    activate_inplace(y, l + 1 == net.num_layers() ? net.output_activation() : net.hidden_activation());
    x = std::move(y);
  }
  Tensor out({input.rows(), net.output_dim()});
  Eigen::Map<RowMat>(out.raw(), rows, static_cast<Eigen::Index>(net.output_dim())) = x;
  if (!out.all_finite()) throw NumericError("mlp '" + net.name() + "' produced non-finite output");
  return out;
}

}  // namespace laser::diff
