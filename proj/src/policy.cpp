#include "rotorlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rotorlab {

namespace {

// Random matrix with orthonormal rows or columns (whichever is fewer),
// scaled by gain. Modified Gram-Schmidt on Gaussian draws.
std::vector<double> orthogonal(std::size_t rows, std::size_t cols, double gain, std::mt19937_64& rng) {
  const std::size_t n = std::max(rows, cols);
  const std::size_t k = std::min(rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> basis(k, std::vector<double>(n));
  for (std::size_t v = 0; v < k; ++v) {
    for (double& x : basis[v]) x = normal(rng);
    for (std::size_t u = 0; u < v; ++u) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += basis[v][i] * basis[u][i];
      for (std::size_t i = 0; i < n; ++i) basis[v][i] -= dot * basis[u][i];
    }
    double norm = 0.0;
    for (double x : basis[v]) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : basis[v]) x /= norm;
  }
  std::vector<double> w(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      w[r * cols + c] = gain * (rows <= cols ? basis[r][c] : basis[c][r]);
    }
  }
  return w;
}

Mlp build_mlp(std::size_t obs_dim, const std::vector<std::size_t>& hidden, std::size_t out_dim,
              double out_gain, double out_bias, const NetworkConfig& config, std::mt19937_64& rng) {
  Mlp net;
  net.input_scale = make_input_scale(obs_dim, config);
  std::size_t in = obs_dim;
  for (std::size_t h : hidden) {
    DenseLayer layer{h, in, orthogonal(h, in, 1.0, rng), std::vector<double>(h, 0.0), Activation::tanh};
    net.layers.push_back(std::move(layer));
    in = h;
  }
  DenseLayer head{out_dim, in, orthogonal(out_dim, in, out_gain, rng), std::vector<double>(out_dim, out_bias),
                  Activation::identity};
  net.layers.push_back(std::move(head));
  return net;
}

void apply_layer(const DenseLayer& layer, std::span<const double> in, std::span<double> out) {
  for (std::size_t r = 0; r < layer.rows; ++r) {
    const double* row = layer.weight.data() + r * layer.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < layer.cols; ++c) acc += row[c] * in[c];
    acc += layer.bias[r];
    out[r] = layer.activation == Activation::tanh ? std::tanh(acc) : acc;
  }
}

}  // namespace

const char* to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "identity" || s == "linear") return Activation::identity;
  throw InvalidInput("unknown activation '" + s + "'");
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void Mlp::validate() const {
  std::size_t in = input_dim();
  if (in == 0) throw InvalidInput("network has zero inputs");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const DenseLayer& l = layers[k];
    const std::string where = "layer " + std::to_string(k);
    if (l.cols != in) throw InvalidInput(where + " expects " + std::to_string(l.cols) + " inputs, got " + std::to_string(in));
    if (l.weight.size() != l.rows * l.cols) throw InvalidInput(where + " weight size does not match rows*cols");
    if (l.bias.size() != l.rows) throw InvalidInput(where + " bias size does not match rows");
    in = l.rows;
  }
}

void Mlp::forward(std::span<const double> in, std::span<double> out) const {
  if (in.size() != input_dim()) {
    throw InvalidInput("network expects " + std::to_string(input_dim()) + " inputs, got " + std::to_string(in.size()));
  }
  if (out.size() != output_dim()) throw InvalidInput("network output buffer has the wrong length");

  std::vector<double> cur(in.size());
  for (std::size_t j = 0; j < in.size(); ++j) cur[j] = in[j] * input_scale[j];
  std::vector<double> next;
  for (const DenseLayer& layer : layers) {
    next.assign(layer.rows, 0.0);
    apply_layer(layer, cur, next);
    cur.swap(next);
  }
  std::copy(cur.begin(), cur.end(), out.begin());
}

void Mlp::forward_tape(std::span<const double> in, Tape& tape) const {
  if (in.size() != input_dim()) throw InvalidInput("network input has the wrong length");
  tape.values.resize(layers.size() + 1);
  tape.values[0].resize(in.size());
  for (std::size_t j = 0; j < in.size(); ++j) tape.values[0][j] = in[j] * input_scale[j];
  for (std::size_t k = 0; k < layers.size(); ++k) {
    tape.values[k + 1].resize(layers[k].rows);
    apply_layer(layers[k], tape.values[k], tape.values[k + 1]);
  }
}

void Mlp::backward(const Tape& tape, std::span<const double> grad_out, std::span<double> grad) const {
  // Offsets of each layer's block in the flattened parameter vector.
  std::vector<std::size_t> offset(layers.size());
  std::size_t pos = 0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    offset[k] = pos;
    pos += layers[k].weight.size() + layers[k].bias.size();
  }

  std::vector<double> delta(grad_out.begin(), grad_out.end());
  std::vector<double> prev;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const DenseLayer& layer = layers[k];
    const std::vector<double>& out = tape.values[k + 1];
    const std::vector<double>& in = tape.values[k];
    if (layer.activation == Activation::tanh) {
      for (std::size_t r = 0; r < layer.rows; ++r) delta[r] *= 1.0 - out[r] * out[r];
    }
    double* gw = grad.data() + offset[k];
    double* gb = gw + layer.weight.size();
    prev.assign(layer.cols, 0.0);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      const double d = delta[r];
      const double* row = layer.weight.data() + r * layer.cols;
      for (std::size_t c = 0; c < layer.cols; ++c) {
        gw[r * layer.cols + c] += d * in[c];
        prev[c] += d * row[c];
      }
      gb[r] += d;
    }
    delta.swap(prev);
  }
}

void Mlp::get_params(std::span<double> out) const {
  std::size_t pos = 0;
  for (const DenseLayer& l : layers) {
    std::copy(l.weight.begin(), l.weight.end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += l.weight.size();
    std::copy(l.bias.begin(), l.bias.end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += l.bias.size();
  }
}

void Mlp::set_params(std::span<const double> in) {
  std::size_t pos = 0;
  for (DenseLayer& l : layers) {
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(pos), l.weight.size(), l.weight.begin());
    pos += l.weight.size();
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
}

void PolicyParams::get_params(std::span<double> out) const {
  const std::size_t n = mean.parameter_count();
  mean.get_params(out.first(n));
  std::copy(log_std.begin(), log_std.end(), out.begin() + static_cast<std::ptrdiff_t>(n));
}

void PolicyParams::set_params(std::span<const double> in) {
  const std::size_t n = mean.parameter_count();
  mean.set_params(in.first(n));
  std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(n), log_std.size(), log_std.begin());
}

void PolicyParams::validate() const {
  mean.validate();
  if (log_std.size() != act_dim()) throw InvalidInput("log_std length must equal the action dimension");
}

std::vector<double> make_input_scale(std::size_t obs_dim, const NetworkConfig& config) {
  std::vector<double> scale(obs_dim, config.obs_scale_other);
  for (std::size_t i = 0; i < std::min<std::size_t>(obs_dim, kAxes); ++i) scale[i] = config.obs_scale_error;
  return scale;
}

PolicyParams init_policy(std::size_t obs_dim, std::size_t act_dim, const NetworkConfig& config,
                         std::mt19937_64& rng) {
  PolicyParams p;
  p.mean = build_mlp(obs_dim, config.hidden, act_dim, config.output_gain, config.output_bias, config, rng);
  p.log_std.assign(act_dim, config.init_log_std);
  return p;
}

ValueParams init_value(std::size_t obs_dim, const NetworkConfig& config, std::mt19937_64& rng) {
  return ValueParams{build_mlp(obs_dim, config.hidden, 1, 1.0, 0.0, config, rng)};
}

std::vector<double> forward_mean(const PolicyParams& params, std::span<const double> obs) {
  std::vector<double> out(params.act_dim());
  params.mean.forward(obs, out);
  return out;
}

double value(const ValueParams& params, std::span<const double> obs) {
  double v = 0.0;
  params.net.forward(obs, std::span<double>(&v, 1));
  return v;
}

double log_prob(std::span<const double> mean, std::span<const double> log_std, std::span<const double> raw) {
  constexpr double half_log_2pi = 0.91893853320467274178;  // 0.5 * log(2 pi)
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (raw[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - half_log_2pi;
  }
  return lp;
}

SampledAction sample_action(const PolicyParams& params, std::span<const double> obs, std::mt19937_64& rng) {
  if (params.act_dim() != kRotors) throw InvalidInput("sampled actions must have one entry per rotor");
  const std::vector<double> mu = forward_mean(params, obs);
  std::normal_distribution<double> normal(0.0, 1.0);
  SampledAction a;
  a.raw.resize(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    a.raw[i] = mu[i] + std::exp(params.log_std[i]) * normal(rng);
    a.clipped[i] = std::clamp(a.raw[i], 0.0, 1.0);
  }
  a.log_prob = log_prob(mu, params.log_std, a.raw);
  return a;
}

Vec4 act_deterministic(const PolicyParams& params, std::span<const double> obs) {
  if (params.act_dim() != kRotors) throw InvalidInput("policy must have one output per rotor");
  const std::vector<double> mu = forward_mean(params, obs);
  Vec4 y{};
  for (std::size_t i = 0; i < kRotors; ++i) y[i] = std::clamp(mu[i], 0.0, 1.0);
  return y;
}

}  // namespace rotorlab
