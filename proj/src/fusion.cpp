// SPDX-License-Identifier: Apache-2.0
#include "redaff/fusion.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace redaff {

namespace {

// Fixed shard count for batch gradient reduction; independent of threads.
constexpr std::size_t kShards = 8;

template <typename F>
void parallel_for(std::size_t count, std::size_t threads, F&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

void add_into(std::span<const TensorRef> dst, std::span<const TensorRef> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) {
    Eigen::Map<Vector>(dst[i].data, dst[i].size()) +=
        Eigen::Map<const Vector>(src[i].data, src[i].size());
  }
}

void set_zero(std::span<const TensorRef> ts) {
  for (const auto& t : ts) std::fill(t.data, t.data + t.size(), 0.0);
}

}  // namespace

Vector fuse(const Vector& h1, const Vector& h2) {
  Vector h(h1.size() + h2.size());
  h << h1, h2;
  return h;
}

// ---- head ----

FusionHeadParams FusionHeadParams::zeros(Eigen::Index input_dim,
                                         std::span<const Eigen::Index> hidden_widths) {
  if (input_dim < 1) {
    throw UsageError("fusion head input width must be positive");
  }
  FusionHeadParams p;
  Eigen::Index in = input_dim;
  for (Eigen::Index w : hidden_widths) {
    if (w < 1) throw UsageError("fusion head widths must be positive");
    p.W.push_back(Matrix::Zero(w, in));
    p.b.push_back(Vector::Zero(w));
    in = w;
  }
  p.W.push_back(Matrix::Zero(static_cast<Eigen::Index>(kNumEmotions), in));
  p.b.push_back(Vector::Zero(static_cast<Eigen::Index>(kNumEmotions)));
  return p;
}

FusionHeadParams FusionHeadParams::random(Eigen::Index input_dim,
                                          std::span<const Eigen::Index> hidden_widths, Rng& rng) {
  FusionHeadParams p = zeros(input_dim, hidden_widths);
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    init_uniform(p.W[l], p.W[l].cols(), rng);
    init_uniform(p.b[l], p.W[l].cols(), rng);
  }
  return p;
}

std::vector<Eigen::Index> FusionHeadParams::hidden_widths() const {
  std::vector<Eigen::Index> w;
  for (std::size_t l = 0; l + 1 < W.size(); ++l) w.push_back(W[l].rows());
  return w;
}

std::vector<TensorRef> FusionHeadParams::tensors() {
  std::vector<TensorRef> t;
  for (std::size_t l = 0; l < W.size(); ++l) {
    t.push_back(tensor_ref("head.W" + std::to_string(l), W[l]));
    t.push_back(tensor_ref("head.b" + std::to_string(l), b[l]));
  }
  return t;
}

HeadForward head_forward(const Vector& h, const FusionHeadParams& head) {
  if (h.size() != head.input_dim()) {
    throw DataError("fusion head expects input width " + std::to_string(head.input_dim()) +
                    ", got " + std::to_string(h.size()));
  }
  HeadForward f;
  f.input = h;
  Vector x = h;
  for (std::size_t l = 0; l + 1 < head.W.size(); ++l) {
    x = (head.W[l] * x + head.b[l]).cwiseMax(0.0);
    f.activations.push_back(x);
  }
  f.logits = head.W.back() * x + head.b.back();
  const double mx = f.logits.maxCoeff();
  f.probs = (f.logits.array() - mx).exp();
  f.probs /= f.probs.sum();
  if (!f.probs.allFinite()) {
    throw NumericalError("fusion head produced non-finite output");
  }
  return f;
}

EmotionProfile predict(const Vector& h, const FusionHeadParams& head) {
  return EmotionProfile::from_softmax(head_forward(h, head).probs);
}

Vector head_backward(const Vector& grad_probs, const HeadForward& fwd,
                     const FusionHeadParams& head, FusionHeadParams& grads) {
  Vector d = fwd.probs.cwiseProduct((grad_probs.array() - fwd.probs.dot(grad_probs)).matrix());
  for (std::size_t l = head.W.size(); l-- > 0;) {
    const Vector& in = l == 0 ? fwd.input : fwd.activations[l - 1];
    grads.W[l].noalias() += d * in.transpose();
    grads.b[l] += d;
    Vector d_in = head.W[l].transpose() * d;
    if (l > 0) {
      d_in = d_in.cwiseProduct((fwd.activations[l - 1].array() > 0.0).cast<double>().matrix());
    }
    d = std::move(d_in);
  }
  return d;
}

// ---- config ----

std::string_view mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::full:
      return "full";
    case FusionMode::affect_only:
      return "affect-only";
    case FusionMode::context_only:
      return "context-only";
  }
  return "?";
}

std::optional<FusionMode> mode_from_name(std::string_view name) {
  if (name == "full") return FusionMode::full;
  if (name == "affect-only") return FusionMode::affect_only;
  if (name == "context-only") return FusionMode::context_only;
  return std::nullopt;
}

Eigen::Index ModelConfig::context_dim() const {
  if (!uses_context()) return 0;
  return context_source == ContextSource::toy ? encoder.output_dim : precomputed_dim;
}

Eigen::Index ModelConfig::head_input_dim() const {
  return (uses_affect() ? affect.output_dim() : 0) + context_dim();
}

std::vector<Eigen::Index> ModelConfig::resolved_head_widths() const {
  if (!head_widths.empty()) return head_widths;
  return {head_input_dim(), head_input_dim()};
}

Model Model::create(const ModelConfig& config, std::uint64_t seed) {
  Model m;
  m.config = config;
  Rng rng(seed);
  if (config.uses_affect()) {
    m.affect = AffectNetParams::random(config.affect, rng);
  }
  if (config.uses_encoder()) {
    m.encoder = ToyTransformerParams::random(config.encoder, rng);
  }
  const auto widths = config.resolved_head_widths();
  m.head = FusionHeadParams::random(config.head_input_dim(), widths, rng);
  return m;
}

Model Model::zeros_like() const {
  Model z;
  z.config = config;
  if (config.uses_affect()) z.affect = AffectNetParams::zeros(config.affect);
  if (config.uses_encoder()) z.encoder = ToyTransformerParams::gradient_buffer(config.encoder);
  const auto widths = config.resolved_head_widths();
  z.head = FusionHeadParams::zeros(config.head_input_dim(), widths);
  return z;
}

std::vector<TensorRef> Model::tensors() {
  std::vector<TensorRef> t;
  if (config.uses_affect()) {
    auto a = affect.tensors();
    t.insert(t.end(), a.begin(), a.end());
  }
  if (config.uses_encoder()) {
    auto e = encoder.tensors();
    t.insert(t.end(), e.begin(), e.end());
  }
  auto h = head.tensors();
  t.insert(t.end(), h.begin(), h.end());
  return t;
}

// ---- forward / backward ----

ModelForward model_forward(const Model& model, const DocInput& doc, Rng* rng) {
  const ModelConfig& cfg = model.config;
  ModelForward f;
  Vector h1;
  Vector h2;
  if (cfg.uses_affect()) {
    f.affect = affectnet_forward(doc.embedded, model.affect, cfg.dropout, rng);
    h1 = f.affect->out.doc_vector;
  }
  if (cfg.uses_context()) {
    if (cfg.context_source == ContextSource::toy) {
      f.encoder = encode(doc.subword_ids, model.encoder);
      h2 = f.encoder->output;
    } else {
      if (doc.context == nullptr) {
        throw DataError("document '" + doc.id + "' has no precomputed context vector");
      }
      h2 = *doc.context;
    }
  }
  f.head = head_forward(fuse(h1, h2), model.head);
  return f;
}

double profile_mse(const Vector& probs, const EmotionProfile& target) {
  return (probs - target.as_vector()).squaredNorm() / static_cast<double>(kNumEmotions);
}

void model_backward(const Model& model, const ModelForward& fwd, const EmotionProfile& target,
                    double weight, Model& grads) {
  const Vector d_probs =
      (2.0 * weight / static_cast<double>(kNumEmotions)) * (fwd.head.probs - target.as_vector());
  const Vector d_h = head_backward(d_probs, fwd.head, model.head, grads.head);
  Eigen::Index offset = 0;
  if (fwd.affect) {
    const Eigen::Index n1 = model.config.affect.output_dim();
    affectnet_backward(d_h.segment(0, n1), *fwd.affect, model.affect, grads.affect);
    offset = n1;
  }
  if (fwd.encoder) {
    encoder_backward(d_h.segment(offset, d_h.size() - offset), *fwd.encoder, model.encoder,
                     grads.encoder);
  }
}

double batch_loss_and_gradient(const Model& model, std::span<const DocInput> docs, Model* grads) {
  if (docs.empty()) {
    throw DataError("batch_loss_and_gradient: empty batch");
  }
  const double w = 1.0 / static_cast<double>(docs.size());
  double loss = 0.0;
  for (const auto& doc : docs) {
    const auto f = model_forward(model, doc, nullptr);
    loss += w * profile_mse(f.head.probs, doc.target);
    if (grads != nullptr) model_backward(model, f, doc.target, w, *grads);
  }
  if (model.config.uses_affect() && model.config.l2 > 0.0) {
    loss += l2_penalty(model.affect, model.config.l2);
    if (grads != nullptr) add_l2_gradient(model.affect, model.config.l2, grads->affect);
  }
  return loss;
}

std::vector<EmotionProfile> predict_all(const Model& model, std::span<const DocInput> docs,
                                        std::size_t threads) {
  std::vector<EmotionProfile> out(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    out[i] = EmotionProfile::from_softmax(model_forward(model, docs[i], nullptr).head.probs);
  });
  return out;
}

double evaluate_loss(const Model& model, std::span<const DocInput> docs, std::size_t threads) {
  if (docs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> losses(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    losses[i] = profile_mse(model_forward(model, docs[i], nullptr).head.probs, docs[i].target);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(docs.size());
}

// ---- Adam ----

Adam::Adam(AdamConfig config, std::size_t num_params)
    : config_(config),
      m_(Vector::Zero(static_cast<Eigen::Index>(num_params))),
      v_(Vector::Zero(static_cast<Eigen::Index>(num_params))) {
  if (!(config_.lr > 0.0)) {
    throw UsageError("learning rate must be positive");
  }
}

void Adam::step(std::span<const TensorRef> params, std::span<const TensorRef> grads) {
  if (params.size() != grads.size() || total_size(params) != static_cast<std::size_t>(m_.size())) {
    throw DataError("Adam::step: parameter/gradient layout mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Eigen::Index n = params[k].size();
    if (grads[k].size() != n) {
      throw DataError("Adam::step: tensor '" + params[k].name + "' size mismatch");
    }
    Eigen::Map<Vector> p(params[k].data, n);
    Eigen::Map<const Vector> g(grads[k].data, n);
    auto m = m_.segment(offset, n);
    auto v = v_.segment(offset, n);
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    p.array() -= config_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
    offset += n;
  }
}

// ---- training ----

TrainResult train(const Model& initial, std::span<const DocInput> train_docs,
                  std::span<const DocInput> val_docs, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train_docs.empty()) {
    throw DataError("train: empty training split");
  }
  if (config.batch_size < 1) {
    throw UsageError("train: batch size must be at least 1");
  }
  if (config.epochs < 0) {
    throw UsageError("train: epochs must be nonnegative");
  }
  TrainResult result{initial, initial, 0, {}};
  Model& model = result.final_model;
  auto params = model.tensors();
  Adam adam(AdamConfig{.lr = config.lr}, total_size(params));

  Model grads = model.zeros_like();
  auto grad_refs = grads.tensors();
  std::vector<Model> shard_grads(kShards, grads);
  std::vector<std::vector<TensorRef>> shard_refs;
  for (auto& s : shard_grads) shard_refs.push_back(s.tensors());
  std::vector<double> shard_loss(kShards);

  const EpochRecord first{0, evaluate_loss(model, train_docs, config.threads),
                          evaluate_loss(model, val_docs, config.threads)};
  result.trace.push_back(first);
  if (on_epoch) on_epoch(first);
  double best_val = val_docs.empty() ? std::numeric_limits<double>::infinity() : first.val_loss;

  std::vector<std::size_t> order(train_docs.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), 0x5eed));
    shuffler.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t count = end - start;
      const double w = 1.0 / static_cast<double>(count);
      parallel_for(kShards, config.threads, [&](std::size_t s) {
        set_zero(shard_refs[s]);
        shard_loss[s] = 0.0;
        const std::size_t lo = start + count * s / kShards;
        const std::size_t hi = start + count * (s + 1) / kShards;
        for (std::size_t k = lo; k < hi; ++k) {
          const std::size_t doc = order[k];
          Rng dropout_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), doc + 1));
          const auto f = model_forward(model, train_docs[doc], &dropout_rng);
          shard_loss[s] += w * profile_mse(f.head.probs, train_docs[doc].target);
          model_backward(model, f, train_docs[doc].target, w, shard_grads[s]);
        }
      });
      set_zero(grad_refs);
      double loss = 0.0;
      for (std::size_t s = 0; s < kShards; ++s) {
        add_into(grad_refs, shard_refs[s]);
        loss += shard_loss[s];
      }
      if (model.config.uses_affect() && model.config.l2 > 0.0) {
        loss += l2_penalty(model.affect, model.config.l2);
        add_l2_gradient(model.affect, model.config.l2, grads.affect);
      }
      if (!std::isfinite(loss) || !all_finite(grad_refs)) {
        throw NumericalError("training diverged (non-finite loss) at epoch " +
                             std::to_string(epoch));
      }
      adam.step(params, grad_refs);
      epoch_loss += loss;
      ++batches;
    }
    EpochRecord rec{epoch, epoch_loss / static_cast<double>(batches),
                    evaluate_loss(model, val_docs, config.threads)};
    result.trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (!val_docs.empty() && rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.best_model = model;
      result.best_epoch = epoch;
    }
  }
  if (val_docs.empty()) {
    result.best_model = model;
    result.best_epoch = config.epochs;
  }
  return result;
}

// ---- checkpoints ----

std::string model_config_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(mode_name(c.mode));
  j["context_source"] = c.context_source == ContextSource::toy ? "toy" : "precomputed";
  j["affect"] = {{"input_dim", c.affect.input_dim},
                 {"hidden", c.affect.hidden},
                 {"attention", c.affect.attention}};
  j["encoder"] = {{"vocab", c.encoder.vocab},         {"model_dim", c.encoder.model_dim},
                  {"heads", c.encoder.heads},         {"layers", c.encoder.layers},
                  {"ffn_dim", c.encoder.ffn_dim},     {"max_positions", c.encoder.max_positions},
                  {"output_dim", c.encoder.output_dim}};
  j["precomputed_dim"] = c.precomputed_dim;
  j["head_widths"] = c.head_widths;
  j["dropout"] = c.dropout;
  j["l2"] = c.l2;
  j["max_tokens"] = c.max_tokens;
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  const auto mode = mode_from_name(j.at("mode").get<std::string>());
  if (!mode) throw DataError("unknown mode in model config");
  c.mode = *mode;
  c.context_source = j.at("context_source").get<std::string>() == "toy" ? ContextSource::toy
                                                                        : ContextSource::precomputed;
  const auto& a = j.at("affect");
  c.affect = {a.at("input_dim").get<Eigen::Index>(), a.at("hidden").get<Eigen::Index>(),
              a.at("attention").get<Eigen::Index>()};
  const auto& e = j.at("encoder");
  c.encoder.vocab = e.at("vocab").get<Eigen::Index>();
  c.encoder.model_dim = e.at("model_dim").get<Eigen::Index>();
  c.encoder.heads = e.at("heads").get<Eigen::Index>();
  c.encoder.layers = e.at("layers").get<Eigen::Index>();
  c.encoder.ffn_dim = e.at("ffn_dim").get<Eigen::Index>();
  c.encoder.max_positions = e.at("max_positions").get<Eigen::Index>();
  c.encoder.output_dim = e.at("output_dim").get<Eigen::Index>();
  c.precomputed_dim = j.at("precomputed_dim").get<Eigen::Index>();
  c.head_widths = j.at("head_widths").get<std::vector<Eigen::Index>>();
  c.dropout = j.at("dropout").get<double>();
  c.l2 = j.at("l2").get<double>();
  c.max_tokens = j.at("max_tokens").get<std::size_t>();
  return c;
}

void save_checkpoint(const std::string& dir, Model& model, const std::string& extra_json) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto tensors = model.tensors();
  nlohmann::ordered_json manifest;
  manifest["format"] = "redaff-checkpoint-v1";
  manifest["dtype"] = "float64-le";
  manifest["config"] = nlohmann::ordered_json::parse(model_config_json(model.config));
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    list.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", offset}});
    offset += static_cast<std::size_t>(t.size());
  }
  manifest["tensors"] = list;
  manifest["total"] = offset;
  manifest["extra"] = extra_json.empty() ? nlohmann::ordered_json::object()
                                         : nlohmann::ordered_json::parse(extra_json);
  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw DataError("cannot write checkpoint manifest in '" + dir + "'");
    out << manifest.dump(2) << "\n";
  }
  std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw DataError("cannot write checkpoint parameters in '" + dir + "'");
  for (const auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(t.data[i]);
      if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
      }
      char bytes[8];
      std::memcpy(bytes, &bits, 8);
      bin.write(bytes, 8);
    }
  }
}

namespace {

nlohmann::json read_manifest(const std::string& dir) {
  std::ifstream in(std::filesystem::path(dir) / "manifest.json");
  if (!in) throw DataError("missing checkpoint manifest in '" + dir + "'");
  return nlohmann::json::parse(in);
}

}  // namespace

Model load_checkpoint(const std::string& dir) {
  const auto manifest = read_manifest(dir);
  const ModelConfig config = model_config_from_json(manifest.at("config").dump());
  Model model = Model::create(config, 0);
  auto tensors = model.tensors();
  const auto& listed = manifest.at("tensors");
  if (listed.size() != tensors.size()) {
    throw DataError("checkpoint tensor list does not match its config");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto shape = listed[i].at("shape").get<std::vector<Eigen::Index>>();
    if (listed[i].at("name").get<std::string>() != tensors[i].name || shape.size() != 2 ||
        shape[0] != tensors[i].rows || shape[1] != tensors[i].cols) {
      throw DataError("checkpoint tensor '" + tensors[i].name + "' has unexpected shape");
    }
  }
  std::ifstream bin(std::filesystem::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw DataError("missing checkpoint parameters in '" + dir + "'");
  for (const auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      char bytes[8];
      if (!bin.read(bytes, 8)) throw DataError("checkpoint parameter file is truncated");
      std::uint64_t bits = 0;
      std::memcpy(&bits, bytes, 8);
      if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
      }
      t.data[i] = std::bit_cast<double>(bits);
    }
  }
  if (bin.peek() != std::char_traits<char>::eof()) {
    throw DataError("checkpoint parameter file has trailing data");
  }
  return model;
}

std::string checkpoint_extra(const std::string& dir) {
  const auto manifest = read_manifest(dir);
  return manifest.contains("extra") ? manifest.at("extra").dump() : std::string("{}");
}

}  // namespace redaff
