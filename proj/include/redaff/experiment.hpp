// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "redaff/behavior.hpp"
#include "redaff/context.hpp"
#include "redaff/corpus.hpp"
#include "redaff/embedding.hpp"
#include "redaff/fusion.hpp"
#include "redaff/metrics.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace redaff {

/// One grid row: everything needed to train and evaluate a model.
struct ExperimentConfig {
  std::string name = "run";
  std::string corpus;
  std::string embeddings;
  /// When set, `embeddings` is picked by `variant` from this map.
  std::map<std::string, std::string> embeddings_by_variant;
  EmbeddingVariant variant = EmbeddingVariant::original;
  ModelConfig model;
  /// "toy" or "precomputed:<path>".
  std::string encoder = "toy";
  std::size_t tokenizer_merges = 300;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1};
  std::string out = "runs";
  bool allow_missing = false;
};

/// Parses a JSON object. Any key holding a list (except `seeds` and
/// `head_widths`) is a sweep; the result is the cartesian product, in key
/// order with the last key varying fastest.
std::vector<ExperimentConfig> parse_experiment_configs(const std::string& json_text);
std::vector<ExperimentConfig> load_experiment_configs(const std::string& path);

/// Applies an encoder spec ("toy" or "precomputed:<path>") to `config`.
void apply_encoder_spec(ExperimentConfig& config, const std::string& spec);
std::string precomputed_path(const std::string& encoder_spec);

/// Network-ready documents for one corpus split configuration. Context
/// vectors are shared so DocInput pointers stay valid when this moves.
struct DataBundle {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
  std::vector<DocInput> train;
  std::vector<DocInput> val;
  std::vector<DocInput> test;
  std::shared_ptr<const PrecomputedVectors> context;
  /// Documents left out for lack of a precomputed vector.
  std::vector<std::string> missing;
};

/// Lowercased tokens joined by single spaces; what the tokenizer sees.
std::string token_text(const Document& doc, std::size_t max_tokens);
Document truncated(const Document& doc, std::size_t max_tokens);

SubwordTokenizer train_tokenizer(const LabeledCorpus& corpus, std::size_t merges,
                                 std::size_t max_length);

DocInput make_input(const LabeledEntry& entry, const ModelConfig& config,
                    const EmbeddingTable* embeddings, const SubwordTokenizer* tokenizer,
                    const PrecomputedVectors* context);

/// `embeddings` is required for affect modes, `tokenizer` for the toy
/// encoder, `context` for precomputed vectors. Documents without a vector
/// are all listed in the error, or dropped when `allow_missing` is set.
DataBundle build_data(const LabeledCorpus& corpus, const ModelConfig& config,
                      const EmbeddingTable* embeddings, const SubwordTokenizer* tokenizer,
                      std::shared_ptr<const PrecomputedVectors> context,
                      bool allow_missing = false);

std::vector<EvalPair> eval_pairs(const Model& model, std::span<const DocInput> docs,
                                 std::size_t threads = 1);

/// Acc@1 of predicting the most frequent training argmax class everywhere
/// (ties to the lowest index).
double majority_baseline(std::span<const DocInput> train, std::span<const DocInput> eval);

/// Attention over the (truncated) tokens of each document.
std::vector<ModelAttentionMap> attention_maps(const Model& model, const LabeledCorpus& corpus,
                                              std::span<const std::size_t> indices,
                                              std::span<const DocInput> docs);

/// EAM/HAM pairs for a set of maps.
std::vector<MapPair> map_pairs(std::span<const ModelAttentionMap> maps, const LabeledCorpus& corpus,
                               std::span<const std::size_t> indices, std::size_t max_tokens,
                               const std::set<std::string>& emotion_word_set,
                               const EntityTagger& tagger,
                               HamSupport support = HamSupport::positive);

struct RunOutput {
  std::string dir;
  EvalReport test_report;
  double baseline_acc = 0.0;
  int best_epoch = 0;
};

/// Trains one (config, seed) pair and writes under `dir`: checkpoint/
/// (best validation epoch), tokenizer.txt when the toy encoder is used,
/// trace.tsv and report.tsv (test split).
RunOutput run_training(const ExperimentConfig& config, std::uint64_t seed, const std::string& dir,
                       std::size_t threads, std::ostream* log = nullptr);

/// A checkpoint together with the data it was trained on.
struct LoadedRun {
  Model model;
  LabeledCorpus corpus;
  DataBundle data;
  std::string label;
};

/// Rebuilds the inputs recorded in a checkpoint's metadata. A non-empty
/// `corpus_override` replaces the recorded corpus path.
LoadedRun load_run(const std::string& checkpoint_dir, const std::string& corpus_override = {},
                   bool allow_missing = false);

/// Reads REDAFF_THREADS; defaults to the hardware concurrency.
std::size_t worker_threads();

}  // namespace redaff
