// SPDX-License-Identifier: Apache-2.0
#include "redaff/affectnet.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace redaff;
using redaff::testing::random_matrix;

namespace {

AffectNetParams random_params(const AffectNetDims& dims, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  auto p = AffectNetParams::zeros(dims);
  for (auto& t : p.tensors()) {
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data[k] = scale * rng.normal();
  }
  return p;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM direction written with scalar loops, gate rows i, f, o, g.
std::vector<std::vector<double>> naive_lstm(const Matrix& x, const LstmParams& p, bool reverse) {
  const auto n = x.rows();
  const auto d = x.cols();
  const auto h = p.U.cols();
  std::vector<double> hs(h, 0.0), cs(h, 0.0);
  std::vector<std::vector<double>> out(n, std::vector<double>(h));
  for (Eigen::Index step = 0; step < n; ++step) {
    const Eigen::Index t = reverse ? n - 1 - step : step;
    std::vector<double> z(4 * h);
    for (Eigen::Index r = 0; r < 4 * h; ++r) {
      double s = p.b(r);
      for (Eigen::Index j = 0; j < d; ++j) s += p.W(r, j) * x(t, j);
      for (Eigen::Index j = 0; j < h; ++j) s += p.U(r, j) * hs[j];
      z[r] = s;
    }
    for (Eigen::Index j = 0; j < h; ++j) {
      const double i = sig(z[j]);
      const double f = sig(z[h + j]);
      const double o = sig(z[2 * h + j]);
      const double g = std::tanh(z[3 * h + j]);
      cs[j] = f * cs[j] + i * g;
      hs[j] = o * std::tanh(cs[j]);
    }
    out[t] = hs;
  }
  return out;
}

// Softmax in long double with max subtraction.
std::vector<long double> oracle_softmax(const std::vector<long double>& u) {
  const long double m = *std::max_element(u.begin(), u.end());
  std::vector<long double> e(u.size());
  long double s = 0;
  for (std::size_t i = 0; i < u.size(); ++i) s += (e[i] = std::exp(u[i] - m));
  for (auto& x : e) x /= s;
  return e;
}

}  // namespace

TEST(BiLstm, ZeroWeightsGiveZeroStates) {
  const AffectNetDims dims{5, 4, 6};
  const auto p = AffectNetParams::zeros(dims);
  Rng rng(1);
  const Matrix h = bilstm_forward(random_matrix(7, 5, rng), p);
  EXPECT_EQ(h.rows(), 7);
  EXPECT_EQ(h.cols(), 8);
  EXPECT_TRUE(h.isZero(0));
}

TEST(BiLstm, SingleTokenShape) {
  const AffectNetDims dims{100, 100, 200};
  const auto p = random_params(dims, 3, 0.1);
  Rng rng(2);
  const Matrix x = random_matrix(1, 100, rng);
  const Matrix h = bilstm_forward(x, p);
  EXPECT_EQ(h.rows(), 1);
  EXPECT_EQ(h.cols(), 200);
  const auto fwd = naive_lstm(x, p.fwd, false);
  const auto bwd = naive_lstm(x, p.bwd, true);
  for (int j = 0; j < 100; ++j) {
    EXPECT_NEAR(h(0, j), fwd[0][j], 1e-12);
    EXPECT_NEAR(h(0, 100 + j), bwd[0][j], 1e-12);
  }
}

TEST(BiLstm, MatchesNaiveOracle) {
  const AffectNetDims dims{4, 3, 5};
  const auto p = random_params(dims, 7);
  Rng rng(8);
  const Matrix x = random_matrix(3, 4, rng);
  const Matrix h = bilstm_forward(x, p);
  const auto fwd = naive_lstm(x, p.fwd, false);
  const auto bwd = naive_lstm(x, p.bwd, true);
  for (int t = 0; t < 3; ++t) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(h(t, j), fwd[t][j], 1e-10);
      EXPECT_NEAR(h(t, 3 + j), bwd[t][j], 1e-10);
    }
  }
}

TEST(BiLstm, RejectsBadInput) {
  const auto p = AffectNetParams::zeros({4, 3, 5});
  EXPECT_THROW(bilstm_forward(Matrix(0, 4), p), DataError);
  EXPECT_THROW(bilstm_forward(Matrix::Zero(2, 5), p), DataError);
}

TEST(Attention, Singleton) {
  const auto p = random_params({3, 2, 4}, 1);
  Rng rng(2);
  const Matrix h = random_matrix(1, 4, rng);
  const auto out = attention(h, p);
  EXPECT_DOUBLE_EQ(out.weights(0), 1.0);
  EXPECT_TRUE(out.doc_vector.isApprox(h.row(0).transpose(), 1e-15));
}

TEST(Attention, ZeroVIsUniform) {
  auto p = random_params({3, 2, 4}, 1);
  p.v.setZero();
  Rng rng(2);
  const auto out = attention(random_matrix(6, 4, rng), p);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(out.weights(i), 1.0 / 6.0, 1e-15);
}

TEST(Attention, MatchesOracleSoftmax) {
  const auto p = random_params({3, 2, 5}, 4, 1.0);
  Rng rng(5);
  const Matrix h = random_matrix(7, 4, rng);
  const auto out = attention(h, p);
  std::vector<long double> u(7);
  const Eigen::RowVectorXd z = h.row(6);
  for (int i = 0; i < 7; ++i) {
    long double s = 0;
    for (int r = 0; r < 5; ++r) {
      long double a = 0;
      for (int c = 0; c < 4; ++c) a += p.W_h(r, c) * h(i, c) + p.W_Z(r, c) * z(c);
      s += p.v(r) * std::tanh(a);
    }
    u[i] = s;
  }
  const auto ref = oracle_softmax(u);
  for (int i = 0; i < 7; ++i) EXPECT_NEAR(out.weights(i), static_cast<double>(ref[i]), 1e-12);
}

TEST(Attention, ProbabilityVectorProperty) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto p = random_params({3, 3, 4}, seed, 2.0);
    Rng rng(seed + 100);
    const auto n = 1 + rng.below(12);
    const auto out = attention(random_matrix(static_cast<Eigen::Index>(n), 6, rng, 3.0), p);
    EXPECT_NEAR(out.weights.sum(), 1.0, 1e-12);
    EXPECT_GE(out.weights.minCoeff(), 0.0);
  }
}

TEST(Attention, MaskZeroesPaddedPositions) {
  const auto p = random_params({3, 2, 4}, 9);
  Rng rng(3);
  Matrix h = random_matrix(5, 4, rng);
  const std::vector<bool> mask_vec{true, true, true, false, false};
  std::unique_ptr<bool[]> mask(new bool[5]);
  for (int i = 0; i < 5; ++i) mask[i] = mask_vec[i];
  const auto masked = attention(h, p, std::span<const bool>(mask.get(), 5));
  EXPECT_EQ(masked.weights(3), 0.0);
  EXPECT_EQ(masked.weights(4), 0.0);
  const auto trimmed = attention(h.topRows(3), p);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(masked.weights(i), trimmed.weights(i), 1e-15);
  std::unique_ptr<bool[]> none(new bool[5]());
  EXPECT_THROW(attention(h, p, std::span<const bool>(none.get(), 5)), DataError);
}

TEST(Attention, BasisRelabelingLeavesWeightsUnchanged) {
  const AffectNetDims dims{3, 3, 5};
  const auto p = random_params(dims, 21, 1.0);
  Rng rng(22);
  const Matrix h = random_matrix(4, 6, rng);
  const auto base = attention(h, p);

  // Relabel the hidden features: permute columns of H, W_h and W_Z together.
  Eigen::PermutationMatrix<Eigen::Dynamic> feat(6);
  feat.indices() << 3, 0, 5, 1, 4, 2;
  auto q = p;
  q.W_h = p.W_h * feat;
  q.W_Z = p.W_Z * feat;
  const auto permuted = attention(h * feat, q);
  EXPECT_TRUE(permuted.weights.isApprox(base.weights, 1e-14));

  // Relabel the alignment units: permute rows of W_h, W_Z and v together.
  Eigen::PermutationMatrix<Eigen::Dynamic> unit(5);
  unit.indices() << 4, 2, 0, 3, 1;
  auto r = p;
  r.W_h = unit * p.W_h;
  r.W_Z = unit * p.W_Z;
  r.v = unit * p.v;
  EXPECT_TRUE(attention(h, r).weights.isApprox(base.weights, 1e-14));
}

TEST(AffectNet, ForwardIsBitwiseDeterministic) {
  const auto p = random_params({4, 3, 5}, 2);
  Rng rng(1);
  const Matrix x = random_matrix(6, 4, rng);
  const auto a = affectnet_forward(x, p);
  const auto b = affectnet_forward(x, p);
  EXPECT_EQ(a.out.weights, b.out.weights);
  EXPECT_EQ(a.out.doc_vector, b.out.doc_vector);
}

TEST(AffectNet, WeightedStatesSumToDocVector) {
  const auto p = random_params({4, 3, 5}, 2);
  Rng rng(1);
  const auto f = affectnet_forward(random_matrix(6, 4, rng), p);
  const Matrix ws = f.out.weighted_states();
  EXPECT_EQ(ws.rows(), 6);
  EXPECT_TRUE(Vector(ws.colwise().sum().transpose()).isApprox(f.out.doc_vector, 1e-14));
}

TEST(AffectNet, DropoutOnlyWithRng) {
  const auto p = random_params({4, 3, 5}, 2);
  Rng data(1);
  const Matrix x = random_matrix(6, 4, data);
  const auto off = affectnet_forward(x, p, 0.5, nullptr);
  EXPECT_EQ(off.dropout_scale.size(), 0);
  Rng rng(5);
  const auto on = affectnet_forward(x, p, 0.5, &rng);
  ASSERT_EQ(on.dropout_scale.rows(), 6);
  for (Eigen::Index i = 0; i < on.dropout_scale.size(); ++i) {
    const double s = on.dropout_scale.data()[i];
    EXPECT_TRUE(s == 0.0 || s == 2.0);
  }
  EXPECT_THROW(affectnet_forward(x, p, 1.0, &rng), UsageError);
}

TEST(AffectNetBackward, ZeroUpstreamGivesZeroGradients) {
  const AffectNetDims dims{3, 2, 4};
  const auto p = random_params(dims, 5);
  Rng rng(6);
  const auto f = affectnet_forward(random_matrix(4, 3, rng), p);
  auto g = AffectNetParams::zeros(dims);
  Matrix gx;
  affectnet_backward(Vector::Zero(4), f, p, g, &gx);
  for (auto& t : g.tensors()) {
    for (Eigen::Index k = 0; k < t.size(); ++k) EXPECT_EQ(t.data[k], 0.0) << t.name;
  }
  EXPECT_TRUE(gx.isZero(0));
}

TEST(AffectNetBackward, FiniteDifferenceTinyNet) {
  const AffectNetDims dims{3, 2, 4};
  auto p = random_params(dims, 11);
  Rng rng(12);
  Matrix x = random_matrix(2, 3, rng);
  const Vector target = random_matrix(4, 1, rng);
  const auto loss = [&] {
    const auto f = affectnet_forward(x, p);
    return 0.5 * (f.out.doc_vector - target).squaredNorm();
  };
  const auto f = affectnet_forward(x, p);
  auto g = AffectNetParams::zeros(dims);
  Matrix gx;
  affectnet_backward(f.out.doc_vector - target, f, p, g, &gx);
  auto params = p.tensors();
  params.push_back(redaff::tensor_ref("input", x));
  auto grads = g.tensors();
  grads.push_back(redaff::tensor_ref("input", gx));
  const auto check = redaff::testing::check_gradients(params, grads, loss);
  EXPECT_LE(check.max_rel, 1e-4) << check.worst;
  EXPECT_GT(check.checked, 60u);
}

TEST(AffectNetBackward, FiniteDifferenceLongerSequence) {
  const AffectNetDims dims{4, 3, 5};
  auto p = random_params(dims, 31);
  Rng rng(32);
  Matrix x = random_matrix(5, 4, rng);
  const Vector r = random_matrix(6, 1, rng);
  const auto loss = [&] { return r.dot(affectnet_forward(x, p).out.doc_vector); };
  const auto f = affectnet_forward(x, p);
  auto g = AffectNetParams::zeros(dims);
  Matrix gx;
  affectnet_backward(r, f, p, g, &gx);
  auto params = p.tensors();
  params.push_back(redaff::tensor_ref("input", x));
  auto grads = g.tensors();
  grads.push_back(redaff::tensor_ref("input", gx));
  const auto check = redaff::testing::check_gradients(params, grads, loss);
  EXPECT_LE(check.max_rel, 1e-4) << check.worst;
}

TEST(AffectNetBackward, EmbeddingGradientNonzeroWhereAttended) {
  const AffectNetDims dims{3, 2, 4};
  const auto p = random_params(dims, 13);
  Rng rng(14);
  const auto f = affectnet_forward(random_matrix(4, 3, rng), p);
  auto g = AffectNetParams::zeros(dims);
  Matrix gx;
  affectnet_backward(Vector::Ones(4), f, p, g, &gx);
  for (int i = 0; i < 4; ++i) {
    ASSERT_GT(f.out.weights(i), 0.0);
    EXPECT_GT(gx.row(i).norm(), 0.0) << "token " << i;
  }
}

TEST(AffectNetBackward, ShapeMismatchIsError) {
  const AffectNetDims dims{3, 2, 4};
  const auto p = random_params(dims, 13);
  Rng rng(14);
  const auto f = affectnet_forward(random_matrix(4, 3, rng), p);
  auto g = AffectNetParams::zeros(dims);
  EXPECT_THROW(affectnet_backward(Vector::Ones(3), f, p, g), DataError);
  const auto other = random_params({3, 3, 4}, 1);
  auto g2 = AffectNetParams::zeros({3, 3, 4});
  EXPECT_THROW(affectnet_backward(Vector::Ones(4), f, other, g2), DataError);
}

TEST(L2, PenaltyAndGradient) {
  const AffectNetDims dims{3, 2, 4};
  auto p = random_params(dims, 17);
  const double lambda = 0.001;
  const double expected =
      lambda * (p.fwd.W.squaredNorm() + p.fwd.U.squaredNorm() + p.bwd.W.squaredNorm() +
                p.bwd.U.squaredNorm());
  EXPECT_NEAR(l2_penalty(p, lambda), expected, 1e-15);
  auto g = AffectNetParams::zeros(dims);
  add_l2_gradient(p, lambda, g);
  const auto check = redaff::testing::check_gradients(p.tensors(), g.tensors(),
                                                      [&] { return l2_penalty(p, lambda); });
  EXPECT_LE(check.max_rel, 1e-6) << check.worst;
  EXPECT_TRUE(g.v.isZero(0));
  EXPECT_TRUE(g.fwd.b.isZero(0));
}
