#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hed/kernels.hpp"

namespace hed {

using ParamVector = std::vector<double>;

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims{64, 64};
  std::size_t output_dim = 1;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::identity;

  /// Throws std::invalid_argument on zero dims, no hidden layers or a non-squashing output.
  void validate() const;

  std::size_t layer_count() const { return hidden_dims.size() + 1; }
  std::size_t fan_in(std::size_t layer) const;
  std::size_t fan_out(std::size_t layer) const;
  std::size_t param_count() const;

  bool operator==(const MlpSpec&) const = default;
};

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

/// Per-layer activations of a batched forward pass; activations[0] is the input.
struct ForwardCache {
  std::vector<Matrix> activations;
};

/// Fully connected network over a flat parameter vector. Layout is layer-major,
/// weights before biases, weights row-major [fan_out x fan_in].
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec);

  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  static Mlp init(const MlpSpec& spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  std::size_t param_count() const { return params_.size(); }

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  ParamVector flatten() const { return params_; }
  void unflatten(std::span<const double> v);

  std::span<const double> weights(std::size_t layer) const;
  std::span<double> weights(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);

  std::vector<double> forward(std::span<const double> x) const;

  struct Gradients {
    ParamVector params;
    std::vector<double> input;
  };
  /// Exact gradients of upstream . forward(x) with respect to parameters and input.
  Gradients backward(std::span<const double> x, std::span<const double> upstream) const;

  /// Batched forward on a feature-major input [input_dim x B].
  Matrix forward(const Matrix& x, ForwardCache* cache = nullptr) const;

  /// Back-propagates d_out [output_dim x B] through a cached forward pass.
  /// Parameter gradients (summed over the batch) are accumulated into
  /// param_grad unless it is empty; d_input receives the input gradient when non-null.
  void backward(const ForwardCache& cache, const Matrix& d_out, std::span<double> param_grad,
                Matrix* d_input) const;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const;

  MlpSpec spec_{};
  std::vector<std::size_t> offsets_;
  ParamVector params_;
};

enum class Direction { ascent, descent };

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

/// Adam moments for one parameter vector.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, Direction dir);

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return t_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

  void write(std::ostream& out) const;
  static AdamState read(std::istream& in);

  bool operator==(const AdamState&) const = default;

 private:
  AdamConfig cfg_{};
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

/// target <- tau * target + (1 - tau) * online; tau must lie in (0, 1).
void polyak_update(std::span<double> target, std::span<const double> online, double tau);

/// Checkpoint fragment: "HEDC", u32 version, spec dims, u64 count, little-endian f64 params.
void write_fragment(std::ostream& out, const Mlp& net);
Mlp read_fragment(std::istream& in);

inline constexpr std::uint32_t kFragmentVersion = 1;

}  // namespace hed
