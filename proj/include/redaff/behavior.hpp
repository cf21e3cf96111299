// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "redaff/corpus.hpp"
#include "redaff/embedding.hpp"

#include <iosfwd>
#include <span>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace redaff {

/// Model-generated attention weights, aligned to a document's tokens.
struct ModelAttentionMap {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<double> weights;
};

/// 1 for emotion words and named entities, 0 elsewhere.
struct ExternalAttentionMap {
  std::string doc_id;
  std::vector<int> flags;

  bool all_zero() const;
};

/// Model weight where the external map is 1 and the model weight is
/// positive (above `kHybridFloor`), 0 elsewhere.
struct HybridAttentionMap {
  std::string doc_id;
  std::vector<double> weights;

  std::vector<int> binary() const;
};

inline constexpr double kHybridFloor = 1e-12;

/// Which model weights count as attended. `positive`: weight above
/// kHybridFloor. `above_uniform`: weight above 1/n, the level of a map that
/// attends to nothing in particular.
enum class HamSupport { positive, above_uniform };
std::string_view ham_support_name(HamSupport s);
std::optional<HamSupport> ham_support_from_name(std::string_view name);

/// Named-entity tagging interface; returns one flag per token.
class EntityTagger {
public:
  virtual ~EntityTagger() = default;
  virtual std::vector<bool> tag(const Document& doc) const = 0;
};

/// Gazetteer lookup plus an optional heuristic that tags capitalized tokens
/// that are not sentence-initial.
class GazetteerTagger : public EntityTagger {
public:
  explicit GazetteerTagger(std::set<std::string> entries, bool capitalization_heuristic = true);
  std::vector<bool> tag(const Document& doc) const override;

private:
  std::set<std::string> entries_;  // lowercased
  bool heuristic_;
};

/// Ingests precomputed entity annotations: doc_id -> token indices.
class AnnotatedTagger : public EntityTagger {
public:
  explicit AnnotatedTagger(std::map<std::string, std::set<std::size_t>> annotations);
  std::vector<bool> tag(const Document& doc) const override;

private:
  std::map<std::string, std::set<std::size_t>> annotations_;
};

/// One entry per line; `#` starts a comment. Entries are lowercased.
std::set<std::string> load_gazetteer(const std::string& path);
std::set<std::string> read_gazetteer(std::istream& in);

/// Lexicon words with any emotion score above `threshold`.
std::set<std::string> emotion_words(const Lexicon& lexicon, double threshold = 0.5);

ExternalAttentionMap build_eam(const Document& doc, const std::set<std::string>& emotion_word_set,
                               const EntityTagger& tagger);
HybridAttentionMap build_ham(const ModelAttentionMap& model_map, const ExternalAttentionMap& eam,
                             HamSupport support = HamSupport::positive);

struct MapPair {
  HybridAttentionMap ham;
  ExternalAttentionMap eam;
};

/// Rank AUC of HAM scores separating EAM-positive from EAM-negative tokens
/// (ties count 1/2); nullopt unless both classes are present.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

struct SimilarityScore {
  /// nullopt when no document qualified.
  std::optional<double> value;
  std::size_t counted = 0;
  std::size_t skipped = 0;  // beh_sim: single-class docs; others: docs in D'
};

SimilarityScore beh_sim(std::span<const MapPair> pairs);
double cosine_binary(std::span<const int> a, std::span<const int> b);
SimilarityScore word_sim(std::span<const MapPair> pairs);
/// Per-document term |EAM and HAM| / (|EAM| + lambda), lambda = 1 when EAM
/// is all zero and 0 otherwise.
double word_prob_term(std::span<const int> ham_binary, std::span<const int> eam);
SimilarityScore word_prob(std::span<const MapPair> pairs);

struct BehaviorScores {
  SimilarityScore beh_sim;
  SimilarityScore word_sim;
  SimilarityScore word_prob;
};

BehaviorScores behavior_scores(std::span<const MapPair> pairs);

struct BehaviorRow {
  std::string model;
  std::string lexicon;
  BehaviorScores scores;
};

/// Similarity table grouped by measure, one row per model and one column
/// per lexicon.
void write_behavior_table(std::ostream& out, std::span<const BehaviorRow> rows);

/// HTML fragment: tokens as spans shaded by weight / max weight.
std::string render_heatmap(const ModelAttentionMap& map);
/// Hybrid maps carry weights only; tokens come from the document.
std::string render_heatmap(const HybridAttentionMap& map, const Document& doc);
/// Standalone page wrapping fragments.
std::string heatmap_page(std::span<const std::string> fragments, const std::string& title);

/// `doc_id<TAB>token<TAB>weight` per token.
void write_attention_dump(std::ostream& out, std::span<const ModelAttentionMap> maps);

}  // namespace redaff
