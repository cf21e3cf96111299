// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "redaff/common.hpp"
#include "redaff/corpus.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace redaff {

enum class EmbeddingVariant { original, counterfitted };

/// Word -> dense vector map. Rows of `vectors()` follow `words()` order,
/// which is the order words were first read.
class EmbeddingTable {
public:
  EmbeddingTable(std::vector<std::string> words, Matrix vectors, EmbeddingVariant variant);

  Eigen::Index dim() const { return vectors_.cols(); }
  std::size_t size() const { return words_.size(); }
  EmbeddingVariant variant() const { return variant_; }
  const std::vector<std::string>& words() const { return words_; }
  const Matrix& vectors() const { return vectors_; }

  std::optional<std::size_t> index_of(const std::string& word) const;
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  /// Row for `word`; throws DataError when out of vocabulary.
  Vector vector(const std::string& word) const;

  /// n x dim matrix of token vectors; out-of-vocabulary tokens map to zeros.
  Matrix embed(std::span<const std::string> tokens) const;

  /// Copy with every row scaled to unit Euclidean norm (zero rows stay zero).
  EmbeddingTable normalized() const;

private:
  std::vector<std::string> words_;
  Matrix vectors_;
  EmbeddingVariant variant_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadEmbeddingsResult {
  EmbeddingTable table;
  std::size_t skipped_lines = 0;
};

/// Reads the text vector format: `word f1 ... f_dim` per line. Lines with
/// the wrong number of floats are skipped and counted; more than half of the
/// lines failing, or no usable lines, is a hard error.
LoadEmbeddingsResult load_embeddings(const std::string& path, Eigen::Index dim,
                                     EmbeddingVariant variant = EmbeddingVariant::original);
LoadEmbeddingsResult read_embeddings(std::istream& in, Eigen::Index dim,
                                     EmbeddingVariant variant = EmbeddingVariant::original);
void write_embeddings(std::ostream& out, const EmbeddingTable& table);
void save_embeddings(const std::string& path, const EmbeddingTable& table);

// ---- lexicon and constraints ----

using EmotionScores = std::array<double, kNumEmotions>;
/// Word -> five emotion scores, ordered by word.
using Lexicon = std::map<std::string, EmotionScores>;

/// Tab-separated `word s_anger s_fear s_joy s_sadness s_surprise`.
Lexicon read_lexicon(std::istream& in);
Lexicon load_lexicon(const std::string& path);
void write_lexicon(std::ostream& out, const Lexicon& lexicon);

/// Word -> class for every lexicon word whose top score exceeds `threshold`.
std::map<std::string, Emotion> assign_classes(const Lexicon& lexicon, double threshold);

/// Contradictory-class relation used for repel pairs. The default relation
/// opposes joy to anger, fear and sadness; surprise repels nothing.
struct ContradictionMap {
  std::array<std::array<bool, kNumEmotions>, kNumEmotions> opposed{};

  static ContradictionMap valence_split();
  bool contradicts(Emotion a, Emotion b) const {
    return opposed[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }
};

using WordPair = std::pair<std::string, std::string>;

struct EmotionConstraintSet {
  std::vector<WordPair> attract;
  std::vector<WordPair> repel;
  std::string source;
  std::size_t dropped_oov = 0;

  bool empty() const { return attract.empty() && repel.empty(); }
};

struct ConstraintOptions {
  double threshold = 0.5;
  /// Cap per pair kind; 0 keeps every pair.
  std::size_t max_pairs = 0;
  std::uint64_t seed = 7;
  ContradictionMap contradictions = ContradictionMap::valence_split();
  std::string source = "lexicon";
};

/// Attract pairs join words of the same class; repel pairs join words of
/// contradictory classes. Pairs are enumerated in lexicon order, then
/// subsampled under `seed` when capped.
EmotionConstraintSet build_constraints(const Lexicon& lexicon, const ConstraintOptions& opts);

/// Drops pairs with an out-of-vocabulary word; the drop count accumulates
/// into `dropped_oov`.
EmotionConstraintSet restrict_to_vocabulary(EmotionConstraintSet constraints,
                                            const EmbeddingTable& table);

/// Tab-separated `word1 word2 attract|repel`.
EmotionConstraintSet read_constraints(std::istream& in);
void write_constraints(std::ostream& out, const EmotionConstraintSet& constraints);

// ---- counter-fitting ----

struct CounterfitOptions {
  int epochs = 20;
  double lr = 0.1;
  double attract_margin = 0.8;
  double repel_margin = 0.3;
  double preserve_weight = 0.1;
  double jitter = 1e-4;
  std::uint64_t seed = 7;
};

struct CounterfitResult {
  EmbeddingTable table;
  /// Objective after each epoch's step, measured on the renormalized vectors.
  std::vector<double> loss_trace;
  /// Objective at the (normalized, jittered) starting point.
  double initial_loss = 0.0;
  std::vector<std::string> warnings;
};

/// Hinge-based counter-fitting objective:
///   sum_attract max(0, margin_a - cos) + sum_repel max(0, cos - margin_r)
///   + preserve_weight * sum_w |w - w_orig|^2
double counterfit_objective(const Matrix& vectors, const Matrix& original,
                            const std::vector<std::pair<std::size_t, std::size_t>>& attract,
                            const std::vector<std::pair<std::size_t, std::size_t>>& repel,
                            const CounterfitOptions& opts);

/// Full-batch gradient descent on the hinge terms with the quadratic
/// preservation term applied as an exact proximal step, followed by unit
/// renormalization of every row at the end of each epoch.
CounterfitResult counterfit(const EmbeddingTable& table, const EmotionConstraintSet& constraints,
                            const CounterfitOptions& opts);

struct CohesionReport {
  double within_class = 0.0;
  double cross_class = 0.0;
  std::size_t within_pairs = 0;
  std::size_t cross_pairs = 0;
};

/// Mean cosine over all same-class pairs and all contradictory-class pairs
/// of in-vocabulary lexicon words.
CohesionReport cohesion_report(const EmbeddingTable& table,
                               const std::map<std::string, Emotion>& classes,
                               const ContradictionMap& contradictions = ContradictionMap::valence_split());

double cosine(const Vector& a, const Vector& b);

}  // namespace redaff
