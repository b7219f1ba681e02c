#include "hed/mlp.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

#include "hed/binary_io.hpp"

namespace hed {

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw std::invalid_argument("MlpSpec: dims must be >= 1");
  if (hidden_dims.empty()) throw std::invalid_argument("MlpSpec: at least one hidden layer required");
  for (auto d : hidden_dims)
    if (d == 0) throw std::invalid_argument("MlpSpec: hidden dims must be >= 1");
  if (hidden_activation == Activation::identity)
    throw std::invalid_argument("MlpSpec: hidden activation must be relu or tanh");
  if (output_activation == Activation::relu)
    throw std::invalid_argument("MlpSpec: output activation must be identity or tanh");
}

std::size_t MlpSpec::fan_in(std::size_t layer) const { return layer == 0 ? input_dim : hidden_dims[layer - 1]; }

std::size_t MlpSpec::fan_out(std::size_t layer) const {
  return layer == hidden_dims.size() ? output_dim : hidden_dims[layer];
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) n += fan_in(l) * fan_out(l) + fan_out(l);
  return n;
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(off);
    off += spec_.fan_in(l) * spec_.fan_out(l) + spec_.fan_out(l);
  }
  params_.assign(off, 0.0);
}

Mlp Mlp::init(const MlpSpec& spec, std::uint64_t seed) {
  Mlp net(spec);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in(l)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : net.weights(l)) w = dist(rng);
  }
  return net;
}

void Mlp::unflatten(std::span<const double> v) {
  if (v.size() != params_.size()) throw std::invalid_argument("Mlp::unflatten: length mismatch");
  std::copy(v.begin(), v.end(), params_.begin());
}

std::size_t Mlp::bias_offset(std::size_t layer) const {
  return offsets_[layer] + spec_.fan_in(layer) * spec_.fan_out(layer);
}

std::span<const double> Mlp::weights(std::size_t layer) const {
  return {params_.data() + weight_offset(layer), spec_.fan_in(layer) * spec_.fan_out(layer)};
}
std::span<double> Mlp::weights(std::size_t layer) {
  return {params_.data() + weight_offset(layer), spec_.fan_in(layer) * spec_.fan_out(layer)};
}
std::span<const double> Mlp::bias(std::size_t layer) const {
  return {params_.data() + bias_offset(layer), spec_.fan_out(layer)};
}
std::span<double> Mlp::bias(std::size_t layer) { return {params_.data() + bias_offset(layer), spec_.fan_out(layer)}; }

Matrix Mlp::forward(const Matrix& x, ForwardCache* cache) const {
  if (x.rows != spec_.input_dim) throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  const std::size_t layers = spec_.layer_count();
  if (cache) {
    cache->activations.resize(layers + 1);
    cache->activations[0] = x;
  }
  Matrix cur = x;
  Matrix next;
  for (std::size_t l = 0; l < layers; ++l) {
    kernels::affine_forward(weights(l), bias(l), cur, next);
    kernels::activation_forward(l + 1 == layers ? spec_.output_activation : spec_.hidden_activation, next);
    std::swap(cur, next);
    if (cache) cache->activations[l + 1] = cur;
  }
  return cur;
}

void Mlp::backward(const ForwardCache& cache, const Matrix& d_out, std::span<double> param_grad,
                   Matrix* d_input) const {
  const std::size_t layers = spec_.layer_count();
  if (cache.activations.size() != layers + 1) throw std::invalid_argument("Mlp::backward: cache mismatch");
  if (d_out.rows != spec_.output_dim || d_out.cols != cache.activations[0].cols)
    throw std::invalid_argument("Mlp::backward: upstream dimension mismatch");
  const bool want_params = !param_grad.empty();
  if (want_params && param_grad.size() != params_.size())
    throw std::invalid_argument("Mlp::backward: gradient buffer length mismatch");

  Matrix delta = d_out;
  Matrix prev;
  for (std::size_t l = layers; l-- > 0;) {
    kernels::activation_backward(l + 1 == layers ? spec_.output_activation : spec_.hidden_activation,
                                 cache.activations[l + 1], delta);
    if (want_params) {
      kernels::affine_backward_params(delta, cache.activations[l],
                                      param_grad.subspan(weight_offset(l), spec_.fan_in(l) * spec_.fan_out(l)),
                                      param_grad.subspan(bias_offset(l), spec_.fan_out(l)));
    }
    if (l > 0 || d_input) {
      kernels::affine_backward_input(weights(l), delta, prev);
      std::swap(delta, prev);
    }
  }
  if (d_input) *d_input = std::move(delta);
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  return forward(Matrix::from_column(x)).column(0);
}

Mlp::Gradients Mlp::backward(std::span<const double> x, std::span<const double> upstream) const {
  if (x.size() != spec_.input_dim) throw std::invalid_argument("Mlp::backward: input dimension mismatch");
  if (upstream.size() != spec_.output_dim) throw std::invalid_argument("Mlp::backward: upstream dimension mismatch");
  ForwardCache cache;
  forward(Matrix::from_column(x), &cache);
  Gradients g;
  g.params.assign(params_.size(), 0.0);
  Matrix d_input;
  backward(cache, Matrix::from_column(upstream), g.params, &d_input);
  g.input = d_input.column(0);
  return g;
}

void AdamState::step(std::span<double> params, std::span<const double> grad, Direction dir) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("AdamState::step: length mismatch");
  ++t_;
  const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double sign = dir == Direction::ascent ? 1.0 : -1.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grad[k];
    m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g;
    v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g * g;
    const double m_hat = m_[k] / b1t;
    const double v_hat = v_[k] / b2t;
    params[k] += sign * cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
  }
}

void AdamState::write(std::ostream& out) const {
  io::write_magic(out, "HEDA");
  io::write_le<std::uint32_t>(out, 1);
  io::write_f64(out, cfg_.lr);
  io::write_f64(out, cfg_.beta1);
  io::write_f64(out, cfg_.beta2);
  io::write_f64(out, cfg_.eps);
  io::write_le<std::uint64_t>(out, t_);
  io::write_f64s(out, m_);
  io::write_f64s(out, v_);
}

AdamState AdamState::read(std::istream& in) {
  io::expect_magic(in, "HEDA");
  if (io::read_le<std::uint32_t>(in) != 1) throw CheckpointError("unsupported Adam state version");
  AdamState s;
  s.cfg_.lr = io::read_f64(in);
  s.cfg_.beta1 = io::read_f64(in);
  s.cfg_.beta2 = io::read_f64(in);
  s.cfg_.eps = io::read_f64(in);
  s.t_ = io::read_le<std::uint64_t>(in);
  s.m_ = io::read_f64s(in);
  s.v_ = io::read_f64s(in);
  if (s.m_.size() != s.v_.size()) throw CheckpointError("Adam moment lengths differ");
  return s;
}

void polyak_update(std::span<double> target, std::span<const double> online, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("polyak_update: tau must lie in (0, 1)");
  if (target.size() != online.size()) throw std::invalid_argument("polyak_update: length mismatch");
  const double keep = tau;
  const double mix = 1.0 - tau;
  for (std::size_t k = 0; k < target.size(); ++k) target[k] = keep * target[k] + mix * online[k];
}

void write_fragment(std::ostream& out, const Mlp& net) {
  const MlpSpec& s = net.spec();
  io::write_magic(out, "HEDC");
  io::write_le<std::uint32_t>(out, kFragmentVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.input_dim));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.hidden_dims.size()));
  for (auto d : s.hidden_dims) io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.output_dim));
  io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(s.hidden_activation));
  io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(s.output_activation));
  io::write_f64s(out, net.params());
}

Mlp read_fragment(std::istream& in) {
  io::expect_magic(in, "HEDC");
  const auto version = io::read_le<std::uint32_t>(in);
  if (version != kFragmentVersion) throw CheckpointError("unsupported fragment version " + std::to_string(version));
  MlpSpec s;
  s.input_dim = io::read_le<std::uint32_t>(in);
  const auto n_hidden = io::read_le<std::uint32_t>(in);
  if (n_hidden > 1024) throw CheckpointError("implausible hidden layer count");
  s.hidden_dims.clear();
  for (std::uint32_t k = 0; k < n_hidden; ++k) s.hidden_dims.push_back(io::read_le<std::uint32_t>(in));
  s.output_dim = io::read_le<std::uint32_t>(in);
  const auto hidden_act = io::read_le<std::uint8_t>(in);
  const auto out_act = io::read_le<std::uint8_t>(in);
  if (hidden_act > 2 || out_act > 2) throw CheckpointError("unknown activation code");
  s.hidden_activation = static_cast<Activation>(hidden_act);
  s.output_activation = static_cast<Activation>(out_act);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid spec in fragment: ") + e.what());
  }
  auto params = io::read_f64s(in, s.param_count());
  if (params.size() != s.param_count()) throw CheckpointError("fragment parameter count does not match spec");
  Mlp net(s);
  net.unflatten(params);
  return net;
}

}  // namespace hed
