// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "redaff/common.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace redaff {

inline constexpr std::size_t kNumEmotions = 5;

/// Fixed emotion order used everywhere: anger, fear, joy, sadness, surprise.
enum class Emotion : std::uint8_t { anger = 0, fear = 1, joy = 2, sadness = 3, surprise = 4 };

inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "anger", "fear", "joy", "sadness", "surprise"};
/// Capitalized label names as they appear in vote maps.
inline constexpr std::array<std::string_view, kNumEmotions> kEmotionLabels = {
    "Anger", "Fear", "Joy", "Sadness", "Surprise"};

std::optional<Emotion> emotion_from_name(std::string_view name);

/// A point on the probability simplex over the five emotions.
class EmotionProfile {
public:
  EmotionProfile() = default;
  /// Validates the simplex invariant (components in [0,1], sum 1 within 1e-9).
  explicit EmotionProfile(const std::array<double, kNumEmotions>& values);

  /// Equal weight on every emotion.
  static EmotionProfile uniform();
  /// Renormalizes a nonnegative vector; used for model outputs that are
  /// already a softmax but may drift by a few ulps.
  static EmotionProfile from_softmax(const Vector& probs);

  double operator[](std::size_t i) const { return values_[i]; }
  const std::array<double, kNumEmotions>& values() const { return values_; }
  Vector as_vector() const;
  /// Index of the largest component; ties go to the lowest index.
  std::size_t argmax() const;

  bool operator==(const EmotionProfile&) const = default;

private:
  std::array<double, kNumEmotions> values_{0.2, 0.2, 0.2, 0.2, 0.2};
};

std::size_t argmax_lowest(std::span<const double> values);

struct Document {
  std::string id;
  std::string raw_text;
  /// Cleaned, lowercased tokens.
  std::vector<std::string> tokens;
  /// Same tokens with original casing, index-aligned with `tokens`.
  std::vector<std::string> surface;
  std::optional<std::string> genre;
};

enum class Split : std::uint8_t { train, val, test };
std::string_view split_name(Split s);
std::optional<Split> split_from_name(std::string_view name);

struct LabeledEntry {
  Document doc;
  EmotionProfile profile;
};

/// Documents paired with ground-truth profiles. Immutable after construction.
class LabeledCorpus {
public:
  LabeledCorpus() = default;
  explicit LabeledCorpus(std::vector<LabeledEntry> entries);

  const std::vector<LabeledEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const LabeledEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// Shuffled-index 60:20:20 split: floor for train and val, rest to test.
  void assign_splits(std::uint64_t seed);
  void set_split(const std::string& id, Split s);
  bool has_splits() const { return split_of_.size() == entries_.size() && !entries_.empty(); }
  Split split_of(const std::string& id) const;
  std::vector<std::size_t> indices(Split s) const;

private:
  std::vector<LabeledEntry> entries_;
  std::map<std::string, Split> split_of_;
};

using VoteMap = std::map<std::string, double>;

/// Maps source (mood-meter style) labels onto the five Ekman labels. Labels
/// with no Ekman counterpart are dropped; unknown labels throw DataError.
VoteMap map_labels(const VoteMap& raw_votes);

/// Proportional normalization of Ekman-labelled counts.
EmotionProfile normalize_profile(const VoteMap& counts);

struct CleanedText {
  std::vector<std::string> tokens;
  std::vector<std::string> surface;
};

/// Lowercases, strips punctuation and unknown symbols, removes noise terms
/// and whitespace-tokenizes. Noise terms are matched case-insensitively on
/// the raw text before punctuation is removed. Returns an empty token list
/// for documents that clean to nothing.
CleanedText clean_text(std::string_view raw, std::span<const std::string> noise_terms);

inline const std::vector<std::string>& default_noise_terms() {
  static const std::vector<std::string> terms = {"(UPDATED)", "survey", "report", "new-review",
                                                 "Midday-wRa"};
  return terms;
}

struct CorpusStats {
  std::size_t documents = 0;
  std::size_t total_words = 0;
  std::size_t unique_words = 0;
  double avg_words_per_doc = 0.0;
  std::array<double, kNumEmotions> mean_fraction{};
  std::array<std::size_t, kNumEmotions> docs_associated{};
};

CorpusStats corpus_stats(const LabeledCorpus& corpus);
void write_stats_tsv(std::ostream& out, const CorpusStats& stats);

/// Pearson correlation between emotion columns; undefined cells (a column
/// with zero variance) are std::nullopt.
using CorrelationMatrix = std::array<std::array<std::optional<double>, kNumEmotions>, kNumEmotions>;
CorrelationMatrix emotion_correlations(const LabeledCorpus& corpus);
void write_correlations_tsv(std::ostream& out, const CorrelationMatrix& m);

/// Pearson correlation of two equal-length series, or nullopt when either
/// has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

// ---- interchange format ----

struct RawRecord {
  std::size_t line = 0;
  std::string id;
  std::string text;
  std::optional<VoteMap> votes;
  std::optional<std::array<double, kNumEmotions>> profile;
  std::optional<std::string> genre;
  std::optional<Split> split;
  /// Present in prepared corpora; used instead of re-cleaning `text`.
  std::optional<std::vector<std::string>> tokens;
  std::optional<std::vector<std::string>> surface;
};

struct RecordError {
  std::size_t line;
  std::string id;
  std::string reason;
};

struct ReadResult {
  std::vector<RawRecord> records;
  std::vector<RecordError> errors;
};

/// Parses line-delimited JSON records. Structurally malformed lines are
/// reported in `errors` with their line number.
ReadResult read_records(std::istream& in);

struct PrepareOptions {
  std::vector<std::string> noise_terms = default_noise_terms();
  std::uint64_t split_seed = 13;
};

struct PrepareResult {
  LabeledCorpus corpus;
  std::vector<RecordError> rejected;
};

/// Label mapping, normalization and cleaning over raw records. Records that
/// fail any step are rejected with a reason; the rest get 60:20:20 splits
/// unless every record already carries a split tag.
PrepareResult prepare_corpus(const std::vector<RawRecord>& records, const PrepareOptions& opts);

/// Writes the corpus as line-delimited JSON with id, text, tokens, profile,
/// split and genre. Output is byte-stable for identical input.
void write_corpus(std::ostream& out, const LabeledCorpus& corpus);
/// Loads a corpus written by write_corpus (or any file with profile/votes).
LabeledCorpus load_corpus(const std::string& path, const PrepareOptions& opts = {});

}  // namespace redaff
