// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "redaff/affectnet.hpp"
#include "redaff/common.hpp"
#include "redaff/context.hpp"
#include "redaff/corpus.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace redaff {

/// Concatenation H1 ++ H2. Either side may be empty (ablations).
Vector fuse(const Vector& h1, const Vector& h2);

/// Dense ReLU layers followed by a 5-way softmax output layer.
struct FusionHeadParams {
  std::vector<Matrix> W;
  std::vector<Vector> b;

  static FusionHeadParams zeros(Eigen::Index input_dim, std::span<const Eigen::Index> hidden_widths);
  static FusionHeadParams random(Eigen::Index input_dim,
                                 std::span<const Eigen::Index> hidden_widths, Rng& rng);

  Eigen::Index input_dim() const { return W.empty() ? 0 : W.front().cols(); }
  std::vector<Eigen::Index> hidden_widths() const;
  std::vector<TensorRef> tensors();
};

struct HeadForward {
  Vector input;
  std::vector<Vector> activations;  // post-ReLU per hidden layer
  Vector logits;
  Vector probs;
};

HeadForward head_forward(const Vector& h, const FusionHeadParams& head);
/// softmax(MLP(h)) as a validated profile.
EmotionProfile predict(const Vector& h, const FusionHeadParams& head);
/// Given dL/dprobs, accumulates head gradients and returns dL/dh.
Vector head_backward(const Vector& grad_probs, const HeadForward& fwd,
                     const FusionHeadParams& head, FusionHeadParams& grads);

// ---- model wiring ----

enum class FusionMode { full, affect_only, context_only };
std::string_view mode_name(FusionMode m);
std::optional<FusionMode> mode_from_name(std::string_view name);

enum class ContextSource { toy, precomputed };

struct ModelConfig {
  FusionMode mode = FusionMode::full;
  ContextSource context_source = ContextSource::toy;
  AffectNetDims affect;
  EncoderDims encoder;
  /// Dimension of externally supplied context vectors.
  Eigen::Index precomputed_dim = 1024;
  /// Empty: two hidden layers as wide as the fused input.
  std::vector<Eigen::Index> head_widths;
  double dropout = 0.5;
  double l2 = 0.001;
  std::size_t max_tokens = 64;

  bool uses_affect() const { return mode != FusionMode::context_only; }
  bool uses_context() const { return mode != FusionMode::affect_only; }
  bool uses_encoder() const { return uses_context() && context_source == ContextSource::toy; }
  Eigen::Index context_dim() const;
  Eigen::Index head_input_dim() const;
  std::vector<Eigen::Index> resolved_head_widths() const;
};

/// All trainable parameters of one model variant. Submodules a mode does
/// not use are left empty.
struct Model {
  ModelConfig config;
  AffectNetParams affect;
  ToyTransformerParams encoder;
  FusionHeadParams head;

  static Model create(const ModelConfig& config, std::uint64_t seed);
  /// Same shapes, all zeros; used as a gradient accumulator.
  Model zeros_like() const;
  std::vector<TensorRef> tensors();
};

/// One document, ready for the network.
struct DocInput {
  std::string id;
  Matrix embedded;               // n x d word vectors (affect path)
  std::vector<int> subword_ids;  // toy encoder path
  const Vector* context = nullptr;  // precomputed path
  EmotionProfile target;
};

struct ModelForward {
  std::optional<AffectNetForward> affect;
  std::optional<EncoderForward> encoder;
  HeadForward head;
};

/// `rng` enables dropout; pass nullptr for evaluation.
ModelForward model_forward(const Model& model, const DocInput& doc, Rng* rng = nullptr);

/// Mean squared error over the five components.
double profile_mse(const Vector& probs, const EmotionProfile& target);

/// Accumulates `weight` * d(profile_mse)/dparams into `grads`.
void model_backward(const Model& model, const ModelForward& fwd, const EmotionProfile& target,
                    double weight, Model& grads);

/// Mean MSE over docs plus the L2 penalty, with every gradient, no dropout.
/// This is the objective the gradient checks probe.
double batch_loss_and_gradient(const Model& model, std::span<const DocInput> docs, Model* grads);

/// Mean MSE over docs in evaluation mode (no dropout, no penalty).
double evaluate_loss(const Model& model, std::span<const DocInput> docs,
                     std::size_t threads = 1);
std::vector<EmotionProfile> predict_all(const Model& model, std::span<const DocInput> docs,
                                        std::size_t threads = 1);

// ---- optimization ----

struct AdamConfig {
  double lr = 0.000015;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

class Adam {
public:
  Adam(AdamConfig config, std::size_t num_params);
  /// One update; params and grads must list tensors in the same order.
  void step(std::span<const TensorRef> params, std::span<const TensorRef> grads);
  long steps() const { return t_; }

private:
  AdamConfig config_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

struct TrainConfig {
  double lr = 0.000015;
  std::size_t batch_size = 64;
  int epochs = 200;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // running mean of batch objectives (with dropout)
  double val_loss = 0.0;    // evaluation-mode MSE on the validation split
};

struct TrainResult {
  Model final_model;
  Model best_model;
  int best_epoch = 0;
  std::vector<EpochRecord> trace;
};

/// Minibatch Adam on the batch objective. Batches come from a seeded
/// per-epoch shuffle; each batch is cut into a fixed number of shards whose
/// gradients are reduced in order, so results do not depend on `threads`.
/// Dropout masks are seeded per (epoch, document). The best validation loss
/// checkpoint is kept (epoch 0 is the initial model).
TrainResult train(const Model& initial, std::span<const DocInput> train_docs,
                  std::span<const DocInput> val_docs, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// ---- checkpoints ----

/// Writes `<dir>/params.bin` (little-endian float64, tensors concatenated)
/// and `<dir>/manifest.json` (config, tensor names/shapes/offsets, extra
/// metadata). `extra` must be a JSON object text or empty.
void save_checkpoint(const std::string& dir, Model& model, const std::string& extra_json = {});
Model load_checkpoint(const std::string& dir);
/// The `extra` object stored in a manifest, as JSON text ("{}" when absent).
std::string checkpoint_extra(const std::string& dir);

std::string model_config_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace redaff
