// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "redaff/corpus.hpp"
#include "redaff/embedding.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace redaff {

/// Knobs for the generated SemEval-format headline corpus.
struct SyntheticSpec {
  std::size_t documents = 1250;
  std::size_t words_per_emotion = 60;
  std::size_t neutral_words = 400;
  std::size_t entities = 60;
  Eigen::Index dim = 50;
  /// Zipf exponent for emotion-word frequencies within a class.
  double zipf = 1.1;
  /// Dominant-emotion prior (anger, fear, joy, sadness, surprise).
  std::array<double, kNumEmotions> prior = {0.1013, 0.1639, 0.2860, 0.2069, 0.2416};
  std::size_t annotators = 25;
  /// Fraction of emotion words kept by the secondary lexicon.
  double partial_coverage = 0.6;
  std::uint64_t seed = 2007;
};

struct SyntheticBundle {
  std::vector<RawRecord> records;
  EmbeddingTable embeddings;
  /// Every emotion word, scored.
  Lexicon lexicon;
  /// Sparser, noisier lexicon standing in for a second resource.
  Lexicon partial_lexicon;
  /// Half of the entity names.
  std::set<std::string> gazetteer;
  std::map<std::string, Emotion> word_class;
};

/// Deterministic under `spec.seed`. Emotion words carry their class only
/// through the documents and the lexicon; their vectors are random.
SyntheticBundle make_synthetic(const SyntheticSpec& spec);

/// Raw JSONL with id, text and per-label vote counts.
void write_raw_records(std::ostream& out, const std::vector<RawRecord>& records);

/// Writes corpus.jsonl, embeddings.txt, lexicon.tsv, lexicon_partial.tsv and
/// gazetteer.txt into `dir` (created if missing).
void write_synthetic(const std::string& dir, const SyntheticBundle& bundle);

}  // namespace redaff
