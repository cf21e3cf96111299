// SPDX-License-Identifier: Apache-2.0
#include "redaff/affectnet.hpp"

#include <cmath>
#include <string>

namespace redaff {

namespace {

LstmParams lstm_zeros(Eigen::Index d, Eigen::Index h) {
  return {Matrix::Zero(4 * h, d), Matrix::Zero(4 * h, h), Vector::Zero(4 * h)};
}

void lstm_run(const LstmParams& p, const Matrix& inputs, bool reverse, LstmStepCache& cache,
              Matrix& out, Eigen::Index out_col, const char* direction) {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index h = p.U.cols();
  const Matrix projected = (p.W * inputs.transpose()).colwise() + p.b;  // 4h x n, token order
  cache.gates.resize(4 * h, n);
  cache.cells.resize(h, n);
  cache.hidden.resize(h, n);
  Vector h_prev = Vector::Zero(h);
  Vector c_prev = Vector::Zero(h);
  Vector z(4 * h);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::Index t = reverse ? n - 1 - s : s;
    z.noalias() = projected.col(t) + p.U * h_prev;
    for (Eigen::Index k = 0; k < 3 * h; ++k) z(k) = sigmoid(z(k));
    for (Eigen::Index k = 3 * h; k < 4 * h; ++k) z(k) = std::tanh(z(k));
    const auto i = z.segment(0, h);
    const auto f = z.segment(h, h);
    const auto o = z.segment(2 * h, h);
    const auto g = z.segment(3 * h, h);
    Vector c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
    Vector hs = o.cwiseProduct(c.array().tanh().matrix());
    if (!hs.allFinite() || !c.allFinite()) {
      throw NumericalError(std::string("bilstm_forward: non-finite state in ") + direction +
                           " direction at step " + std::to_string(t));
    }
    cache.gates.col(s) = z;
    cache.cells.col(s) = c;
    cache.hidden.col(s) = hs;
    out.block(t, out_col, 1, h) = hs.transpose();
    h_prev = std::move(hs);
    c_prev = std::move(c);
  }
}

// grad_hidden: n x h, token order. Accumulates into g and grad_inputs.
void lstm_backprop(const LstmParams& p, const Matrix& inputs, const LstmStepCache& cache,
                   bool reverse, const Matrix& grad_hidden, LstmParams& g, Matrix* grad_inputs) {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index h = p.U.cols();
  Matrix dz_tok(4 * h, n);
  Vector dh_next = Vector::Zero(h);
  Vector dc_next = Vector::Zero(h);
  Vector dz(4 * h);
  for (Eigen::Index s = n - 1; s >= 0; --s) {
    const Eigen::Index t = reverse ? n - 1 - s : s;
    const auto gates = cache.gates.col(s);
    const auto i = gates.segment(0, h);
    const auto f = gates.segment(h, h);
    const auto o = gates.segment(2 * h, h);
    const auto gg = gates.segment(3 * h, h);
    const Vector tanh_c = cache.cells.col(s).array().tanh();
    const Vector dh = grad_hidden.row(t).transpose() + dh_next;
    const Vector dc =
        dh.cwiseProduct(o).cwiseProduct((1.0 - tanh_c.array().square()).matrix()) + dc_next;
    const Vector c_prev = s > 0 ? Vector(cache.cells.col(s - 1)) : Vector::Zero(h);
    dz.segment(0, h) = (dc.array() * gg.array() * i.array() * (1.0 - i.array())).matrix();
    dz.segment(h, h) = (dc.array() * c_prev.array() * f.array() * (1.0 - f.array())).matrix();
    dz.segment(2 * h, h) = (dh.array() * tanh_c.array() * o.array() * (1.0 - o.array())).matrix();
    dz.segment(3 * h, h) = (dc.array() * i.array() * (1.0 - gg.array().square())).matrix();
    dz_tok.col(t) = dz;
    if (s > 0) {
      g.U.noalias() += dz * cache.hidden.col(s - 1).transpose();
    }
    dh_next.noalias() = p.U.transpose() * dz;
    dc_next = dc.cwiseProduct(f);
  }
  g.W.noalias() += dz_tok * inputs;
  g.b += dz_tok.rowwise().sum();
  if (grad_inputs != nullptr) {
    grad_inputs->noalias() += dz_tok.transpose() * p.W;
  }
}

}  // namespace

AffectNetParams AffectNetParams::zeros(const AffectNetDims& dims) {
  AffectNetParams p;
  p.fwd = lstm_zeros(dims.input_dim, dims.hidden);
  p.bwd = lstm_zeros(dims.input_dim, dims.hidden);
  p.W_h = Matrix::Zero(dims.attention, dims.output_dim());
  p.W_Z = Matrix::Zero(dims.attention, dims.output_dim());
  p.v = Vector::Zero(dims.attention);
  return p;
}

AffectNetParams AffectNetParams::random(const AffectNetDims& dims, Rng& rng) {
  AffectNetParams p = zeros(dims);
  for (LstmParams* l : {&p.fwd, &p.bwd}) {
    init_uniform(l->W, dims.hidden, rng);
    init_uniform(l->U, dims.hidden, rng);
    init_uniform(l->b, dims.hidden, rng);
  }
  init_uniform(p.W_h, dims.output_dim(), rng);
  init_uniform(p.W_Z, dims.output_dim(), rng);
  init_uniform(p.v, dims.attention, rng);
  return p;
}

AffectNetDims AffectNetParams::dims() const {
  return {fwd.W.cols(), fwd.U.cols(), W_h.rows()};
}

std::vector<TensorRef> AffectNetParams::tensors() {
  return {tensor_ref("lstm.fwd.W", fwd.W), tensor_ref("lstm.fwd.U", fwd.U),
          tensor_ref("lstm.fwd.b", fwd.b), tensor_ref("lstm.bwd.W", bwd.W),
          tensor_ref("lstm.bwd.U", bwd.U), tensor_ref("lstm.bwd.b", bwd.b),
          tensor_ref("attn.W_h", W_h),     tensor_ref("attn.W_Z", W_Z),
          tensor_ref("attn.v", v)};
}

Matrix bilstm_forward(const Matrix& inputs, const AffectNetParams& params, BiLstmCache* cache) {
  const AffectNetDims dims = params.dims();
  if (inputs.rows() < 1) {
    throw DataError("bilstm_forward: empty input sequence");
  }
  if (inputs.cols() != dims.input_dim) {
    throw DataError("bilstm_forward: input dim " + std::to_string(inputs.cols()) +
                    " does not match parameters (" + std::to_string(dims.input_dim) + ")");
  }
  BiLstmCache local;
  BiLstmCache& c = cache != nullptr ? *cache : local;
  c.input = inputs;
  Matrix out(inputs.rows(), dims.output_dim());
  lstm_run(params.fwd, inputs, false, c.fwd, out, 0, "forward");
  lstm_run(params.bwd, inputs, true, c.bwd, out, dims.hidden, "backward");
  return out;
}

Matrix AttentionOutput::weighted_states() const {
  return hidden_states.array().colwise() * weights.array();
}

AttentionOutput attention(const Matrix& hidden_states, const AffectNetParams& params,
                          std::span<const bool> mask, AttentionCache* cache) {
  const Eigen::Index n = hidden_states.rows();
  if (n < 1) {
    throw DataError("attention: empty sequence");
  }
  if (hidden_states.cols() != params.W_h.cols()) {
    throw DataError("attention: hidden width does not match parameters");
  }
  std::vector<bool> valid(static_cast<std::size_t>(n), true);
  if (!mask.empty()) {
    if (mask.size() != static_cast<std::size_t>(n)) {
      throw DataError("attention: mask length does not match sequence");
    }
    valid.assign(mask.begin(), mask.end());
  }
  Eigen::Index summary = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (valid[static_cast<std::size_t>(i)]) summary = i;
  }
  if (summary < 0) {
    throw DataError("attention: every position is masked");
  }

  const Vector context = params.W_Z * hidden_states.row(summary).transpose();
  Matrix act = (hidden_states * params.W_h.transpose()).rowwise() + context.transpose();
  act = act.array().tanh();
  const Vector scores = act * params.v;

  double max_score = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (valid[static_cast<std::size_t>(i)]) max_score = std::max(max_score, scores(i));
  }
  Vector alpha = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (valid[static_cast<std::size_t>(i)]) alpha(i) = std::exp(scores(i) - max_score);
  }
  alpha /= alpha.sum();
  if (!alpha.allFinite()) {
    throw NumericalError("attention: non-finite weights");
  }

  AttentionOutput out;
  out.doc_vector = hidden_states.transpose() * alpha;
  out.weights = std::move(alpha);
  out.hidden_states = hidden_states;
  if (cache != nullptr) {
    cache->activations = std::move(act);
    cache->summary_row = summary;
    cache->mask = std::move(valid);
  }
  return out;
}

AffectNetForward affectnet_forward(const Matrix& inputs, const AffectNetParams& params,
                                   double dropout, Rng* rng) {
  AffectNetForward f;
  f.dims = params.dims();
  f.raw_hidden = bilstm_forward(inputs, params, &f.lstm);
  if (rng != nullptr && dropout > 0.0) {
    if (dropout >= 1.0) {
      throw UsageError("dropout rate must be below 1");
    }
    const double keep = 1.0 - dropout;
    f.dropout_scale.resize(f.raw_hidden.rows(), f.raw_hidden.cols());
    for (Eigen::Index j = 0; j < f.dropout_scale.cols(); ++j) {
      for (Eigen::Index i = 0; i < f.dropout_scale.rows(); ++i) {
        f.dropout_scale(i, j) = rng->uniform() < keep ? 1.0 / keep : 0.0;
      }
    }
    f.out = attention(f.raw_hidden.cwiseProduct(f.dropout_scale), params, {}, &f.attn);
  } else {
    f.out = attention(f.raw_hidden, params, {}, &f.attn);
  }
  return f;
}

void affectnet_backward(const Vector& grad_h1, const AffectNetForward& fwd,
                        const AffectNetParams& params, AffectNetParams& grads,
                        Matrix* grad_inputs) {
  const AffectNetDims dims = params.dims();
  if (!(fwd.dims == dims) || !(grads.dims() == dims)) {
    throw DataError("affectnet_backward: parameter shapes do not match the forward cache");
  }
  if (grad_h1.size() != dims.output_dim()) {
    throw DataError("affectnet_backward: upstream gradient has wrong length");
  }
  const Matrix& states = fwd.out.hidden_states;
  const Vector& alpha = fwd.out.weights;
  const Eigen::Index n = states.rows();
  if (fwd.lstm.input.rows() != n || fwd.attn.activations.rows() != n) {
    throw DataError("affectnet_backward: cache is inconsistent");
  }

  // H1 = sum alpha_i h_i
  Matrix d_states = alpha * grad_h1.transpose();  // n x 2h
  const Vector d_alpha = states * grad_h1;
  const double mean = alpha.dot(d_alpha);
  const Vector d_scores = alpha.cwiseProduct((d_alpha.array() - mean).matrix());

  // u_i = v . tanh(s_i)
  const Matrix& act = fwd.attn.activations;
  grads.v.noalias() += act.transpose() * d_scores;
  const Matrix d_pre =
      ((1.0 - act.array().square()).colwise() * d_scores.array()).rowwise() *
      params.v.transpose().array();  // n x a
  grads.W_h.noalias() += d_pre.transpose() * states;
  const Vector d_context = d_pre.colwise().sum().transpose();  // a
  const Eigen::Index z = fwd.attn.summary_row;
  grads.W_Z.noalias() += d_context * states.row(z);
  d_states.noalias() += d_pre * params.W_h;
  d_states.row(z).noalias() += (params.W_Z.transpose() * d_context).transpose();

  if (fwd.dropout_scale.size() != 0) {
    d_states = d_states.cwiseProduct(fwd.dropout_scale);
  }

  if (grad_inputs != nullptr) {
    grad_inputs->setZero(n, dims.input_dim);
  }
  const Eigen::Index h = dims.hidden;
  lstm_backprop(params.fwd, fwd.lstm.input, fwd.lstm.fwd, false, d_states.leftCols(h), grads.fwd,
                grad_inputs);
  lstm_backprop(params.bwd, fwd.lstm.input, fwd.lstm.bwd, true, d_states.rightCols(h), grads.bwd,
                grad_inputs);
}

double l2_penalty(const AffectNetParams& params, double lambda) {
  return lambda * (params.fwd.W.squaredNorm() + params.fwd.U.squaredNorm() +
                   params.bwd.W.squaredNorm() + params.bwd.U.squaredNorm());
}

void add_l2_gradient(const AffectNetParams& params, double lambda, AffectNetParams& grads) {
  grads.fwd.W += 2.0 * lambda * params.fwd.W;
  grads.fwd.U += 2.0 * lambda * params.fwd.U;
  grads.bwd.W += 2.0 * lambda * params.bwd.W;
  grads.bwd.U += 2.0 * lambda * params.bwd.U;
}

}  // namespace redaff
