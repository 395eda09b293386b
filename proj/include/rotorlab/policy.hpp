#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rotorlab/types.hpp"

namespace rotorlab {

enum class Activation { tanh, identity };

const char* to_string(Activation a);
Activation parse_activation(const std::string& s);

/// Fully connected layer, weights row-major (rows = outputs, cols = inputs).
struct DenseLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weight;
  std::vector<double> bias;
  Activation activation = Activation::tanh;

  double& w(std::size_t r, std::size_t c) { return weight[r * cols + c]; }
  double w(std::size_t r, std::size_t c) const { return weight[r * cols + c]; }
  bool operator==(const DenseLayer&) const = default;
};

/// Multilayer perceptron with a fixed (non-trainable) per-input scale.
///
/// Evaluation order is part of the contract: x' = x * scale, then for every
/// layer z_i = (sum_j W_ij x'_j, accumulated in j order) + b_i. The frozen
/// graph interpreter repeats this order exactly.
class Mlp {
 public:
  std::vector<double> input_scale;
  std::vector<DenseLayer> layers;

  /// Intermediate values kept by forward_tape for backpropagation.
  struct Tape {
    std::vector<std::vector<double>> values;  // values[0] = scaled input, values[k+1] = output of layer k
  };

  std::size_t input_dim() const { return input_scale.size(); }
  std::size_t output_dim() const { return layers.empty() ? input_dim() : layers.back().rows; }
  std::size_t parameter_count() const;

  void forward(std::span<const double> in, std::span<double> out) const;
  void forward_tape(std::span<const double> in, Tape& tape) const;

  /// Accumulates d(loss)/d(params) into grad (flattened layout) given d(loss)/d(output).
  void backward(const Tape& tape, std::span<const double> grad_out, std::span<double> grad) const;

  void get_params(std::span<double> out) const;
  void set_params(std::span<const double> in);

  /// Throws InvalidInput if the layer shapes do not chain.
  void validate() const;
  bool operator==(const Mlp&) const = default;
};

struct NetworkConfig {
  std::vector<std::size_t> hidden{32, 32};
  double obs_scale_error = 0.01;  // applied to e inputs
  double obs_scale_other = 0.1;   // applied to delta_e (or normalized rotor speed) inputs
  double init_log_std = 0.0;
  double output_gain = 0.01;
  double output_bias = 0.5;
};

/// Gaussian policy with a state-independent log standard deviation.
struct PolicyParams {
  Mlp mean;
  std::vector<double> log_std;

  std::size_t obs_dim() const { return mean.input_dim(); }
  std::size_t act_dim() const { return mean.output_dim(); }
  /// Trainable parameters: mean network plus log_std.
  std::size_t parameter_count() const { return mean.parameter_count() + log_std.size(); }
  void get_params(std::span<double> out) const;
  void set_params(std::span<const double> in);
  void validate() const;
  bool operator==(const PolicyParams&) const = default;
};

struct ValueParams {
  Mlp net;

  std::size_t parameter_count() const { return net.parameter_count(); }
  bool operator==(const ValueParams&) const = default;
};

std::vector<double> make_input_scale(std::size_t obs_dim, const NetworkConfig& config);

PolicyParams init_policy(std::size_t obs_dim, std::size_t act_dim, const NetworkConfig& config,
                         std::mt19937_64& rng);
ValueParams init_value(std::size_t obs_dim, const NetworkConfig& config, std::mt19937_64& rng);

/// Mean of the action distribution. Throws InvalidInput on a shape mismatch.
std::vector<double> forward_mean(const PolicyParams& params, std::span<const double> obs);

double value(const ValueParams& params, std::span<const double> obs);

/// Gaussian log density of a raw (unclipped) action.
double log_prob(std::span<const double> mean, std::span<const double> log_std, std::span<const double> raw);

struct SampledAction {
  std::vector<double> raw;
  Vec4 clipped{};
  double log_prob = 0.0;
};

SampledAction sample_action(const PolicyParams& params, std::span<const double> obs, std::mt19937_64& rng);

/// Flight-mode evaluation: the clipped mean.
Vec4 act_deterministic(const PolicyParams& params, std::span<const double> obs);

}  // namespace rotorlab
