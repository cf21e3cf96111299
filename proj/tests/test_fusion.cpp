// SPDX-License-Identifier: Apache-2.0
#include "redaff/fusion.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace redaff;
using redaff::testing::random_matrix;

namespace {

EmotionProfile random_target(Rng& rng) {
  std::array<double, 5> p{};
  double s = 0;
  for (auto& x : p) s += (x = rng.uniform() + 0.05);
  for (auto& x : p) x /= s;
  return EmotionProfile(p);
}

ModelConfig tiny_config(FusionMode mode) {
  ModelConfig c;
  c.mode = mode;
  c.affect = {4, 3, 5};
  c.encoder.vocab = 10;
  c.encoder.model_dim = 4;
  c.encoder.heads = 2;
  c.encoder.layers = 1;
  c.encoder.ffn_dim = 6;
  c.encoder.max_positions = 8;
  c.encoder.output_dim = 4;
  c.head_widths = {6, 6};
  c.dropout = 0.0;
  c.l2 = 0.001;
  return c;
}

std::vector<DocInput> tiny_docs(std::size_t count, std::uint64_t seed,
                                const Vector* context = nullptr) {
  Rng rng(seed);
  std::vector<DocInput> docs;
  for (std::size_t i = 0; i < count; ++i) {
    DocInput d;
    d.id = "d" + std::to_string(i);
    const auto n = 2 + static_cast<Eigen::Index>(rng.below(4));
    d.embedded = random_matrix(n, 4, rng);
    d.subword_ids.push_back(SubwordTokenizer::kCls);
    for (Eigen::Index k = 0; k < n; ++k) d.subword_ids.push_back(3 + static_cast<int>(rng.below(7)));
    d.context = context;
    d.target = random_target(rng);
    docs.push_back(std::move(d));
  }
  return docs;
}

// Plants the dominant class in one token so the task is learnable.
std::vector<DocInput> learnable_docs(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DocInput> docs;
  for (std::size_t i = 0; i < count; ++i) {
    const auto k = rng.below(5);
    DocInput d;
    d.id = "l" + std::to_string(i);
    d.embedded = random_matrix(4, 4, rng, 0.3);
    d.embedded(1, k % 4) += 2.0;
    std::array<double, 5> p{0.05, 0.05, 0.05, 0.05, 0.05};
    p[k] = 0.8;
    d.target = EmotionProfile(p);
    docs.push_back(std::move(d));
  }
  return docs;
}

bool same_params(Model& a, Model& b) {
  auto ta = a.tensors();
  auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].size() != tb[i].size()) return false;
    for (Eigen::Index k = 0; k < ta[i].size(); ++k) {
      if (ta[i].data[k] != tb[i].data[k]) return false;
    }
  }
  return true;
}

}  // namespace

TEST(Fuse, Concatenates) {
  Vector a(2), b(1);
  a << 1, 2;
  b << 3;
  Vector want(3);
  want << 1, 2, 3;
  EXPECT_EQ(fuse(a, b), want);
  EXPECT_EQ(fuse(Vector::Zero(200), Vector::Zero(1024)).size(), 1224);
  EXPECT_EQ(fuse(a, Vector()), a);
}

TEST(Predict, ZeroHeadIsUniform) {
  const std::vector<Eigen::Index> widths{4, 4};
  const auto head = FusionHeadParams::zeros(3, widths);
  const auto p = predict(Vector::Ones(3), head);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(p[k], 0.2);
}

TEST(Predict, ClosedFormSoftmax) {
  const std::vector<Eigen::Index> widths;
  auto head = FusionHeadParams::zeros(1, widths);
  ASSERT_EQ(head.b.size(), 1u);
  head.b.back() << 10, 0, 0, 0, 0;
  const auto p = predict(Vector::Zero(1), head);
  EXPECT_EQ(p.argmax(), 0u);
  EXPECT_NEAR(p[0], std::exp(10.0) / (std::exp(10.0) + 4.0), 1e-15);
}

TEST(Predict, AlwaysOnSimplex) {
  Rng rng(1);
  const std::vector<Eigen::Index> widths{7, 7};
  for (int trial = 0; trial < 50; ++trial) {
    const auto head = FusionHeadParams::random(5, widths, rng);
    const auto p = predict(random_matrix(5, 1, rng, 20.0), head);
    double s = 0;
    for (double v : p.values()) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Predict, WrongWidthIsError) {
  const std::vector<Eigen::Index> widths{4};
  EXPECT_THROW(predict(Vector::Ones(2), FusionHeadParams::zeros(3, widths)), DataError);
}

TEST(Ablation, HeadInputWidths) {
  ModelConfig c;
  c.affect = {100, 100, 200};
  c.mode = FusionMode::affect_only;
  EXPECT_EQ(c.head_input_dim(), 200);
  c.mode = FusionMode::context_only;
  c.context_source = ContextSource::precomputed;
  c.precomputed_dim = 1024;
  EXPECT_EQ(c.head_input_dim(), 1024);
  c.mode = FusionMode::full;
  EXPECT_EQ(c.head_input_dim(), 1224);
  EXPECT_EQ(c.resolved_head_widths(), (std::vector<Eigen::Index>{1224, 1224}));
  c.context_source = ContextSource::toy;
  c.encoder.output_dim = 64;
  EXPECT_EQ(c.head_input_dim(), 264);
}

TEST(Ablation, ModesLeaveUnusedPartsEmpty) {
  auto m = Model::create(tiny_config(FusionMode::affect_only), 1);
  EXPECT_TRUE(m.encoder.layers.empty());
  EXPECT_EQ(m.head.input_dim(), 6);
  auto c = Model::create(tiny_config(FusionMode::context_only), 1);
  EXPECT_EQ(c.affect.v.size(), 0);
  EXPECT_EQ(c.head.input_dim(), 4);
}

TEST(EndToEnd, FiniteDifferenceAllParameters) {
  auto model = Model::create(tiny_config(FusionMode::full), 3);
  const auto docs = tiny_docs(2, 4);
  auto grads = model.zeros_like();
  batch_loss_and_gradient(model, docs, &grads);
  const auto check = redaff::testing::check_gradients(
      model.tensors(), grads.tensors(), [&] { return batch_loss_and_gradient(model, docs, nullptr); });
  EXPECT_LE(check.max_rel, 1e-4) << check.worst;
  EXPECT_GT(check.checked, 300u);
}

TEST(EndToEnd, FiniteDifferencePrecomputedContext) {
  auto config = tiny_config(FusionMode::full);
  config.context_source = ContextSource::precomputed;
  config.precomputed_dim = 3;
  auto model = Model::create(config, 5);
  const Vector ctx = Vector::LinSpaced(3, -1.0, 1.0);
  const auto docs = tiny_docs(2, 6, &ctx);
  auto grads = model.zeros_like();
  batch_loss_and_gradient(model, docs, &grads);
  const auto check = redaff::testing::check_gradients(
      model.tensors(), grads.tensors(), [&] { return batch_loss_and_gradient(model, docs, nullptr); });
  EXPECT_LE(check.max_rel, 1e-4) << check.worst;
}

TEST(Training, MemorizesOneDocument) {
  auto config = tiny_config(FusionMode::affect_only);
  config.l2 = 0.0;
  const auto docs = tiny_docs(1, 7);
  TrainConfig tc;
  tc.lr = 0.01;
  tc.batch_size = 1;
  tc.epochs = 400;
  const auto r = train(Model::create(config, 8), docs, docs, tc);
  EXPECT_LT(evaluate_loss(r.final_model, docs), 1e-3);
}

TEST(Training, ZeroEpochsReturnsInitial) {
  auto init = Model::create(tiny_config(FusionMode::full), 9);
  const auto docs = tiny_docs(4, 10);
  TrainConfig tc;
  tc.epochs = 0;
  auto r = train(init, docs, docs, tc);
  EXPECT_TRUE(same_params(r.final_model, init));
  EXPECT_TRUE(same_params(r.best_model, init));
  EXPECT_EQ(r.best_epoch, 0);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].epoch, 0);
}

TEST(Training, SameSeedSameTrace) {
  auto config = tiny_config(FusionMode::full);
  config.dropout = 0.5;
  const auto docs = tiny_docs(10, 11);
  TrainConfig tc;
  tc.lr = 0.005;
  tc.batch_size = 3;
  tc.epochs = 4;
  auto a = train(Model::create(config, 12), docs, docs, tc);
  auto b = train(Model::create(config, 12), docs, docs, tc);
  ASSERT_EQ(a.trace.size(), 5u);
  for (std::size_t e = 0; e < 5; ++e) {
    EXPECT_EQ(a.trace[e].train_loss, b.trace[e].train_loss);
    EXPECT_EQ(a.trace[e].val_loss, b.trace[e].val_loss);
  }
  EXPECT_TRUE(same_params(a.final_model, b.final_model));
}

TEST(Training, ThreadCountDoesNotChangeResults) {
  auto config = tiny_config(FusionMode::full);
  config.dropout = 0.3;
  const auto docs = tiny_docs(17, 13);
  TrainConfig tc;
  tc.lr = 0.005;
  tc.batch_size = 8;
  tc.epochs = 3;
  tc.threads = 1;
  auto one = train(Model::create(config, 14), docs, docs, tc);
  tc.threads = 4;
  auto four = train(Model::create(config, 14), docs, docs, tc);
  EXPECT_TRUE(same_params(one.final_model, four.final_model));
  EXPECT_EQ(evaluate_loss(one.final_model, docs, 1), evaluate_loss(one.final_model, docs, 3));
}

TEST(Training, OneEpochDoesNotIncreaseLossAtDefaultRate) {
  auto config = tiny_config(FusionMode::affect_only);
  config.dropout = 0.0;
  config.l2 = 0.0;
  const auto docs = learnable_docs(64, 15);
  const auto init = Model::create(config, 16);
  TrainConfig tc;  // default learning rate
  tc.epochs = 1;
  tc.batch_size = 8;
  const auto r = train(init, docs, docs, tc);
  EXPECT_LE(evaluate_loss(r.final_model, docs), evaluate_loss(init, docs));
}

TEST(Training, BestCheckpointTracksValidation) {
  auto config = tiny_config(FusionMode::affect_only);
  const auto docs = learnable_docs(40, 17);
  TrainConfig tc;
  tc.lr = 0.01;
  tc.batch_size = 8;
  tc.epochs = 6;
  std::vector<EpochRecord> seen;
  const auto r = train(Model::create(config, 18), docs, docs, tc,
                       [&](const EpochRecord& e) { seen.push_back(e); });
  ASSERT_EQ(seen.size(), 7u);
  EXPECT_EQ(seen[0].epoch, 0);
  EXPECT_DOUBLE_EQ(seen[0].val_loss, evaluate_loss(Model::create(config, 18), docs));
  double best = seen[0].val_loss;
  int best_epoch = 0;
  for (const auto& e : seen) {
    if (e.val_loss < best) {
      best = e.val_loss;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_DOUBLE_EQ(evaluate_loss(r.best_model, docs), best);
}

TEST(Training, EmptySplitIsError) {
  const auto docs = tiny_docs(2, 1);
  EXPECT_THROW(train(Model::create(tiny_config(FusionMode::full), 1), {}, docs, TrainConfig{}), DataError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Matrix w = Matrix::Random(3, 2);
  const Matrix w0 = w;
  Matrix g = Matrix::Zero(3, 2);
  std::vector<TensorRef> p{tensor_ref("w", w)};
  std::vector<TensorRef> gr{tensor_ref("w", g)};
  Adam adam({}, 6);
  for (int i = 0; i < 5; ++i) adam.step(p, gr);
  EXPECT_EQ(w, w0);
  EXPECT_EQ(adam.steps(), 5);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Vector w = Vector::Zero(3);
  Vector g(3);
  g << 2.0, -0.5, 1e-3;
  std::vector<TensorRef> p{tensor_ref("w", w)};
  std::vector<TensorRef> gr{tensor_ref("w", g)};
  AdamConfig c;
  c.lr = 0.1;
  Adam adam(c, 3);
  adam.step(p, gr);
  // Bias-corrected m/sqrt(v) is sign(g) on the first step, up to epsilon.
  EXPECT_NEAR(w(0), -0.1, 1e-7);
  EXPECT_NEAR(w(1), 0.1, 1e-7);
  EXPECT_NEAR(w(2), -0.1, 1e-4);
}

TEST(Checkpoint, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "redaff_ckpt_test";
  std::filesystem::remove_all(dir);
  auto config = tiny_config(FusionMode::full);
  auto m = Model::create(config, 19);
  save_checkpoint(dir.string(), m, R"({"note":"x"})");
  auto back = load_checkpoint(dir.string());
  EXPECT_TRUE(same_params(m, back));
  EXPECT_EQ(model_config_json(back.config), model_config_json(config));
  EXPECT_NE(checkpoint_extra(dir.string()).find("\"note\""), std::string::npos);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_checkpoint(dir.string()), DataError);
}

TEST(Checkpoint, ConfigJsonRoundTrip) {
  auto c = tiny_config(FusionMode::context_only);
  c.context_source = ContextSource::precomputed;
  c.precomputed_dim = 17;
  c.max_tokens = 33;
  const auto back = model_config_from_json(model_config_json(c));
  EXPECT_EQ(back.mode, c.mode);
  EXPECT_EQ(back.context_source, c.context_source);
  EXPECT_EQ(back.precomputed_dim, 17);
  EXPECT_EQ(back.max_tokens, 33u);
  EXPECT_EQ(back.head_widths, c.head_widths);
  EXPECT_EQ(back.affect, c.affect);
  EXPECT_EQ(back.encoder, c.encoder);
}
