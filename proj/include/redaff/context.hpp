// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "redaff/common.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace redaff {

// ---- subword tokenization ----

/// Greedy byte-pair merge tokenizer. Words are split on whitespace and each
/// word starts with the boundary marker U+2581, so decoding recovers the
/// text up to whitespace normalization. Merges apply lowest-rank first.
class SubwordTokenizer {
public:
  static constexpr std::string_view kBoundary = "\xE2\x96\x81";  // U+2581
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;

  using Merge = std::pair<std::string, std::string>;

  /// Builds the vocabulary from an explicit merge list. Every single
  /// character appearing in `alphabet` or in a merge operand gets an id.
  SubwordTokenizer(std::vector<Merge> merges, std::vector<std::string> alphabet,
                   std::size_t max_length = 64);

  /// Learns up to `num_merges` merges from whitespace-separated texts. Pair
  /// ties break toward the lexicographically smallest pair.
  static SubwordTokenizer train(std::span<const std::string> texts, std::size_t num_merges,
                                std::size_t max_length = 64);

  /// Subword pieces without special tokens.
  std::vector<std::string> pieces(std::string_view text) const;
  /// Ids with a leading <cls>, truncated to max_length. Empty text throws.
  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t max_length() const { return max_length_; }
  const std::string& piece(int id) const { return vocab_.at(static_cast<std::size_t>(id)); }
  int id_of(const std::string& piece) const;
  const std::vector<Merge>& merges() const { return merges_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }

  /// Text format: `max_length=<n>`, `alphabet <c1> <c2> ...`, then one
  /// `left right` merge per line.
  void save(std::ostream& out) const;
  static SubwordTokenizer load(std::istream& in);

private:
  std::vector<std::string> word_pieces(std::string_view word) const;

  std::vector<Merge> merges_;
  std::vector<std::string> alphabet_;
  std::size_t max_length_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> ids_;
  std::unordered_map<std::string, std::size_t> rank_;  // "left\x1fright" -> rank
};

/// Splits a UTF-8 string into code-point substrings.
std::vector<std::string> utf8_chars(std::string_view s);

// ---- toy transformer encoder ----

struct EncoderDims {
  Eigen::Index vocab = 0;
  Eigen::Index model_dim = 64;
  Eigen::Index heads = 4;
  Eigen::Index layers = 2;
  Eigen::Index ffn_dim = 128;
  Eigen::Index max_positions = 64;
  Eigen::Index output_dim = 64;

  bool operator==(const EncoderDims&) const = default;
};

struct EncoderLayer {
  Matrix Wq, Wk, Wv, Wo;  // D x D
  Vector bo;
  Vector ln1_gain, ln1_bias;
  Matrix W1;  // F x D
  Vector b1;
  Matrix W2;  // D x F
  Vector b2;
  Vector ln2_gain, ln2_bias;
};

/// Post-norm transformer encoder with first-position pooling:
///   H2 = tanh(W_p x_0 + b_p)
struct ToyTransformerParams {
  Matrix token_embedding;     // V x D
  Matrix position_embedding;  // P x D
  std::vector<EncoderLayer> layers;
  Matrix Wp;  // h x D
  Vector bp;
  Eigen::Index heads = 1;

  /// Layer-norm gains are one, everything else zero.
  static ToyTransformerParams zeros(const EncoderDims& dims);
  /// Every entry zero, including the gains; for accumulating gradients.
  static ToyTransformerParams gradient_buffer(const EncoderDims& dims);
  static ToyTransformerParams random(const EncoderDims& dims, Rng& rng);

  EncoderDims dims() const;
  std::vector<TensorRef> tensors();
};

struct EncoderLayerCache {
  Matrix input;                    // m x D
  Matrix q, k, v;                  // m x D
  std::vector<Matrix> attention;   // per head, m x m row-stochastic
  Matrix heads_out;                // m x D (concatenated heads)
  Matrix ln1_xhat;                 // m x D
  Vector ln1_inv_std;              // m
  Matrix x1;                       // m x D
  Matrix ffn_pre;                  // m x F
  Matrix ln2_xhat;
  Vector ln2_inv_std;
};

struct EncoderForward {
  std::vector<int> ids;
  std::vector<EncoderLayerCache> layers;
  Matrix final_states;  // m x D
  Vector output;        // H2
};

/// Pure function of (ids, params). Throws DataError on empty input or ids
/// outside the vocabulary, and when the sequence exceeds max_positions.
EncoderForward encode(std::span<const int> ids, const ToyTransformerParams& params);

void encoder_backward(const Vector& grad_output, const EncoderForward& fwd,
                      const ToyTransformerParams& params, ToyTransformerParams& grads);

// ---- precomputed context vectors ----

struct ContextVector {
  std::string doc_id;
  Vector values;
};

class PrecomputedVectors {
public:
  PrecomputedVectors(Eigen::Index dim, std::vector<ContextVector> vectors);

  Eigen::Index dim() const { return dim_; }
  const std::vector<ContextVector>& vectors() const { return vectors_; }
  const Vector* find(const std::string& doc_id) const;
  std::vector<std::string> missing(std::span<const std::string> doc_ids) const;

private:
  Eigen::Index dim_;
  std::vector<ContextVector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Header `dim=<h>` then `doc_id<TAB>v1 v2 ... v_h` per line, with
/// shortest round-trip decimal formatting.
void write_precomputed(std::ostream& out, const PrecomputedVectors& vectors);
void save_precomputed(const std::string& path, const PrecomputedVectors& vectors);
PrecomputedVectors read_precomputed(std::istream& in, Eigen::Index expected_dim);
/// Throws DataError on a header or row dimension different from
/// `expected_dim`.
PrecomputedVectors load_precomputed(const std::string& path, Eigen::Index expected_dim);

}  // namespace redaff
