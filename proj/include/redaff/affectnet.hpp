// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "redaff/common.hpp"

#include <span>
#include <vector>

namespace redaff {

/// One LSTM direction. Gate rows are stacked in the order input, forget,
/// output, candidate:
///   z_t = W x_t + U h_{t-1} + b
///   c_t = f * c_{t-1} + i * g,   h_t = o * tanh(c_t)
struct LstmParams {
  Matrix W;  // 4h x d
  Matrix U;  // 4h x h
  Vector b;  // 4h
};

struct AffectNetDims {
  Eigen::Index input_dim = 100;
  Eigen::Index hidden = 100;     // per direction
  Eigen::Index attention = 200;  // alignment-model width

  Eigen::Index output_dim() const { return 2 * hidden; }
  bool operator==(const AffectNetDims&) const = default;
};

/// Trainable tensors of the Bi-LSTM and its additive attention:
///   u_i = v^T tanh(W_h h_i + W_Z Z),  alpha = softmax(u),  H1 = sum_i alpha_i h_i
/// where Z is the last hidden state row.
struct AffectNetParams {
  LstmParams fwd;
  LstmParams bwd;
  Matrix W_h;  // a x 2h
  Matrix W_Z;  // a x 2h
  Vector v;    // a

  static AffectNetParams zeros(const AffectNetDims& dims);
  static AffectNetParams random(const AffectNetDims& dims, Rng& rng);

  AffectNetDims dims() const;
  std::vector<TensorRef> tensors();
};

struct LstmStepCache {
  Matrix gates;   // 4h x n, post-activation (i, f, o, g)
  Matrix cells;   // h x n
  Matrix hidden;  // h x n
};

struct BiLstmCache {
  Matrix input;  // n x d
  LstmStepCache fwd;
  LstmStepCache bwd;  // in reversed (processing) order
};

/// n x 2h matrix whose row l is [fwd h_l ; bwd h_l]. Both directions start
/// from zero state. Throws NumericalError naming the step on NaN/Inf.
Matrix bilstm_forward(const Matrix& inputs, const AffectNetParams& params,
                      BiLstmCache* cache = nullptr);

struct AttentionOutput {
  Vector weights;        // alpha, length n
  Matrix hidden_states;  // n x 2h (after dropout when training)
  Vector doc_vector;     // H1, length 2h

  /// Rows alpha_i * h_i, the per-token weighted states.
  Matrix weighted_states() const;
};

struct AttentionCache {
  Matrix activations;  // n x a, tanh(W_h h_i + W_Z Z)
  Eigen::Index summary_row = 0;
  std::vector<bool> mask;
};

/// Additive attention over hidden states. `mask` (optional) marks valid
/// positions; masked positions get weight exactly 0 and Z is the last valid
/// row.
AttentionOutput attention(const Matrix& hidden_states, const AffectNetParams& params,
                          std::span<const bool> mask = {}, AttentionCache* cache = nullptr);

/// Everything the backward pass needs from one document's forward pass.
struct AffectNetForward {
  BiLstmCache lstm;
  Matrix raw_hidden;    // n x 2h before dropout
  Matrix dropout_scale; // n x 2h; empty when dropout is off
  AttentionCache attn;
  AttentionOutput out;
  AffectNetDims dims;
};

/// Bi-LSTM, inverted dropout at rate `dropout` on the states entering
/// attention (skipped when `rng` is null or rate is 0), then attention.
AffectNetForward affectnet_forward(const Matrix& inputs, const AffectNetParams& params,
                                   double dropout = 0.0, Rng* rng = nullptr);

/// Accumulates dL/dparams into `grads` given dL/dH1. When `grad_inputs` is
/// non-null it receives dL/d(input embeddings), n x d.
void affectnet_backward(const Vector& grad_h1, const AffectNetForward& fwd,
                        const AffectNetParams& params, AffectNetParams& grads,
                        Matrix* grad_inputs = nullptr);

/// lambda * sum of squared recurrent-layer weights (biases excluded).
double l2_penalty(const AffectNetParams& params, double lambda);
void add_l2_gradient(const AffectNetParams& params, double lambda, AffectNetParams& grads);

}  // namespace redaff
