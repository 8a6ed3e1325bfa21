#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "drmdit/error.hpp"
#include "drmdit/ndmath.hpp"

namespace drmdit {

enum class Activation { linear, sigmoid, tanh, relu };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "unknown";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::linear;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ParameterError("unknown activation '" + s + "'");
}

// Tied-weight autoencoder parameters.
//
// weights[l] maps layer l (width layer_dims[l]) to layer l+1 in the encoder
// and has shape layer_dims[l+1] x layer_dims[l]. The decoder reuses the same
// storage transposed, so W_dec[l] = W_enc[l]^T holds by construction.
// Every encoder layer and every decoder layer except the reconstruction
// layer applies `activation`; the reconstruction layer is linear.
struct NetworkParams {
  std::vector<std::size_t> layer_dims;
  Activation activation = Activation::tanh;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases_enc;  // biases_enc[l]: layer_dims[l+1]
  std::vector<std::vector<double>> biases_dec;  // biases_dec[l]: layer_dims[l]

  std::size_t layers() const noexcept { return weights.size(); }
  std::size_t input_dim() const noexcept { return layer_dims.front(); }
  std::size_t latent_dim() const noexcept { return layer_dims.back(); }
  TransposeView decoder_weight(std::size_t l) const { return TransposeView(weights.at(l)); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      n += weights[l].size() + biases_enc[l].size() + biases_dec[l].size();
    return n;
  }

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

// Same layout as NetworkParams; used for gradients and optimizer moments.
struct ParamBuffers {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases_enc;
  std::vector<std::vector<double>> biases_dec;

  static ParamBuffers zeros_like(const NetworkParams& p) {
    ParamBuffers b;
    for (std::size_t l = 0; l < p.layers(); ++l) {
      b.weights.emplace_back(p.weights[l].rows(), p.weights[l].cols());
      b.biases_enc.emplace_back(p.biases_enc[l].size(), 0.0);
      b.biases_dec.emplace_back(p.biases_dec[l].size(), 0.0);
    }
    return b;
  }

  // Visits every scalar with a printable path, in a fixed order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (std::size_t i = 0; i < weights[l].size(); ++i)
        fn(weights[l].values()[i], "weights[" + std::to_string(l) + "][" + std::to_string(i) + "]");
      for (std::size_t i = 0; i < biases_enc[l].size(); ++i)
        fn(biases_enc[l][i], "biases_enc[" + std::to_string(l) + "][" + std::to_string(i) + "]");
      for (std::size_t i = 0; i < biases_dec[l].size(); ++i)
        fn(biases_dec[l][i], "biases_dec[" + std::to_string(l) + "][" + std::to_string(i) + "]");
    }
  }
};

// Flat, ordered views over the scalars of parameters and buffers.
inline std::vector<double*> parameter_slots(NetworkParams& p) {
  std::vector<double*> out;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    for (double& v : p.weights[l].values()) out.push_back(&v);
    for (double& v : p.biases_enc[l]) out.push_back(&v);
    for (double& v : p.biases_dec[l]) out.push_back(&v);
  }
  return out;
}

inline std::vector<double*> parameter_slots(ParamBuffers& b) {
  std::vector<double*> out;
  for (std::size_t l = 0; l < b.weights.size(); ++l) {
    for (double& v : b.weights[l].values()) out.push_back(&v);
    for (double& v : b.biases_enc[l]) out.push_back(&v);
    for (double& v : b.biases_dec[l]) out.push_back(&v);
  }
  return out;
}

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline NetworkParams init_params(const std::vector<std::size_t>& layer_dims, Activation activation,
                                 std::uint64_t seed) {
  if (layer_dims.size() < 2) throw ParameterError("init_params: need at least 2 layer widths");
  for (std::size_t w : layer_dims)
    if (w == 0) throw ParameterError("init_params: layer widths must be positive");
  NetworkParams p;
  p.layer_dims = layer_dims;
  p.activation = activation;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l];
    const std::size_t fan_out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(fan_out, fan_in);
    for (double& v : w.values()) v = dist(rng);
    p.weights.push_back(std::move(w));
    p.biases_enc.emplace_back(fan_out, 0.0);
    p.biases_dec.emplace_back(fan_in, 0.0);
  }
  return p;
}

namespace detail {

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::linear: return x;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

// Derivative given the pre-activation and the activation value.
inline double activate_grad(Activation a, double pre, double out) {
  switch (a) {
    case Activation::linear: return 1.0;
    case Activation::sigmoid: return out * (1.0 - out);
    case Activation::tanh: return 1.0 - out * out;
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

inline void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ParameterError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

}  // namespace detail

struct ForwardTrace {
  // enc_act[0] is the input batch; enc_act[l+1] = act(enc_pre[l]).
  std::vector<Matrix> enc_pre;
  std::vector<Matrix> enc_act;
  // dec_act[layers] is the latent; dec_act[l] = act(dec_pre[l]) and
  // dec_act[0] = dec_pre[0] is the reconstruction.
  std::vector<Matrix> dec_pre;
  std::vector<Matrix> dec_act;

  const Matrix& input() const { return enc_act.front(); }
  const Matrix& latent() const { return enc_act.back(); }
  const Matrix& reconstruction() const { return dec_act.front(); }
};

inline ForwardTrace forward(const NetworkParams& params, const Matrix& batch) {
  if (batch.cols() != params.input_dim()) {
    throw ParameterError("forward: batch has " + std::to_string(batch.cols()) +
                         " columns, network expects " + std::to_string(params.input_dim()));
  }
  const std::size_t L = params.layers();
  const std::size_t n = batch.rows();
  ForwardTrace t;
  t.enc_act.push_back(batch);
  for (std::size_t l = 0; l < L; ++l) {
    Matrix pre = matmul_bt(t.enc_act[l], params.weights[l]);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < pre.cols(); ++j) pre(r, j) += params.biases_enc[l][j];
    Matrix act = pre;
    for (double& v : act.values()) v = detail::activate(params.activation, v);
    t.enc_pre.push_back(std::move(pre));
    t.enc_act.push_back(std::move(act));
  }
  t.dec_pre.resize(L);
  t.dec_act.resize(L + 1);
  t.dec_act[L] = t.enc_act[L];
  for (std::size_t l = L; l-- > 0;) {
    Matrix pre = matmul(t.dec_act[l + 1], params.weights[l]);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < pre.cols(); ++j) pre(r, j) += params.biases_dec[l][j];
    Matrix act = pre;
    if (l > 0)
      for (double& v : act.values()) v = detail::activate(params.activation, v);
    t.dec_pre[l] = std::move(pre);
    t.dec_act[l] = std::move(act);
  }
  if (!all_finite(t.latent()) || !all_finite(t.reconstruction())) {
    throw NumericError("forward: non-finite activations");
  }
  return t;
}

/// Latent codes only.
inline Matrix encode(const NetworkParams& params, const Matrix& batch) {
  return forward(params, batch).latent();
}

/// Reverse-mode accumulation of parameter gradients given upstream gradients
/// with respect to the latent codes and the reconstruction. Tied weights
/// receive the sum of their encoder-path and decoder-path contributions.
inline void backward(const NetworkParams& params, const ForwardTrace& trace,
                     const Matrix& grad_latent, const Matrix& grad_recon, ParamBuffers& grads) {
  const std::size_t L = params.layers();
  const std::size_t n = trace.input().rows();
  detail::check_shape(grad_latent, n, params.latent_dim(), "backward: latent gradient");
  detail::check_shape(grad_recon, n, params.input_dim(), "backward: reconstruction gradient");
  if (grads.weights.size() != L) throw ParameterError("backward: gradient buffers do not match");

  // Decoder path, reconstruction layer first.
  Matrix delta = grad_recon;
  Matrix g_latent;
  for (std::size_t l = 0; l < L; ++l) {
    if (l > 0) {
      for (std::size_t i = 0; i < delta.size(); ++i) {
        delta.values()[i] *= detail::activate_grad(params.activation, trace.dec_pre[l].values()[i],
                                                   trace.dec_act[l].values()[i]);
      }
    }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < delta.cols(); ++j) grads.biases_dec[l][j] += delta(r, j);
    // dec_pre[l] = dec_act[l+1] * W[l]  =>  dW[l] += dec_act[l+1]^T delta
    const Matrix dw = matmul_at(trace.dec_act[l + 1], delta);
    for (std::size_t i = 0; i < dw.size(); ++i) grads.weights[l].values()[i] += dw.values()[i];
    Matrix upstream = matmul_bt(delta, params.weights[l]);
    if (l + 1 == L) {
      g_latent = std::move(upstream);
    } else {
      delta = std::move(upstream);
    }
  }
  for (std::size_t i = 0; i < g_latent.size(); ++i) g_latent.values()[i] += grad_latent.values()[i];

  // Encoder path, latent layer first.
  Matrix g = std::move(g_latent);
  for (std::size_t l = L; l-- > 0;) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.values()[i] *= detail::activate_grad(params.activation, trace.enc_pre[l].values()[i],
                                             trace.enc_act[l + 1].values()[i]);
    }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < g.cols(); ++j) grads.biases_enc[l][j] += g(r, j);
    // enc_pre[l] = enc_act[l] * W[l]^T  =>  dW[l] += g^T enc_act[l]
    const Matrix dw = matmul_at(g, trace.enc_act[l]);
    for (std::size_t i = 0; i < dw.size(); ++i) grads.weights[l].values()[i] += dw.values()[i];
    if (l > 0) g = matmul(g, params.weights[l]);
  }
}

}  // namespace drmdit
