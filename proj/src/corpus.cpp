// SPDX-License-Identifier: Apache-2.0
#include "redaff/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace redaff {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool is_alnum(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::isalnum(u);
}

}  // namespace

std::optional<Emotion> emotion_from_name(std::string_view name) {
  const std::string lower = to_lower(name);
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    if (lower == kEmotionNames[i]) {
      return static_cast<Emotion>(i);
    }
  }
  return std::nullopt;
}

// ---- EmotionProfile ----

EmotionProfile::EmotionProfile(const std::array<double, kNumEmotions>& values) : values_(values) {
  double sum = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw DataError("emotion profile component out of [0,1]: " + format_double(v));
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DataError("emotion profile does not sum to 1 (sum=" + format_double(sum) + ")");
  }
}

EmotionProfile EmotionProfile::uniform() { return EmotionProfile{}; }

EmotionProfile EmotionProfile::from_softmax(const Vector& probs) {
  if (probs.size() != static_cast<Eigen::Index>(kNumEmotions) || !probs.allFinite()) {
    throw NumericalError("model output is not a finite 5-vector");
  }
  const double sum = probs.sum();
  std::array<double, kNumEmotions> v{};
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    v[i] = std::clamp(probs(static_cast<Eigen::Index>(i)) / sum, 0.0, 1.0);
  }
  return EmotionProfile(v);
}

Vector EmotionProfile::as_vector() const {
  Vector v(static_cast<Eigen::Index>(kNumEmotions));
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    v(static_cast<Eigen::Index>(i)) = values_[i];
  }
  return v;
}

std::size_t EmotionProfile::argmax() const { return argmax_lowest(values_); }

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) {
      best = i;
    }
  }
  return best;
}

// ---- splits ----

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

std::optional<Split> split_from_name(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  return std::nullopt;
}

LabeledCorpus::LabeledCorpus(std::vector<LabeledEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (e.doc.tokens.empty()) {
      throw DataError("document '" + e.doc.id + "' has no tokens");
    }
    if (!seen.insert(e.doc.id).second) {
      throw DataError("duplicate document id '" + e.doc.id + "'");
    }
  }
}

void LabeledCorpus::assign_splits(std::uint64_t seed) {
  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n = entries_.size();
  const std::size_t n_train = n * 60 / 100;
  const std::size_t n_val = n * 20 / 100;
  split_of_.clear();
  for (std::size_t k = 0; k < n; ++k) {
    const Split s = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
    split_of_[entries_[order[k]].doc.id] = s;
  }
}

void LabeledCorpus::set_split(const std::string& id, Split s) { split_of_[id] = s; }

Split LabeledCorpus::split_of(const std::string& id) const {
  const auto it = split_of_.find(id);
  if (it == split_of_.end()) {
    throw DataError("document '" + id + "' has no split assignment");
  }
  return it->second;
}

std::vector<std::size_t> LabeledCorpus::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (split_of(entries_[i].doc.id) == s) {
      out.push_back(i);
    }
  }
  return out;
}

// ---- label mapping ----

VoteMap map_labels(const VoteMap& raw_votes) {
  static const std::map<std::string, std::optional<std::string>> table = {
      {"angry", "Anger"},    {"sad", "Sadness"},    {"afraid", "Fear"},
      {"happy", "Joy"},      {"inspired", "Surprise"},
      {"anger", "Anger"},    {"fear", "Fear"},      {"joy", "Joy"},
      {"sadness", "Sadness"}, {"surprise", "Surprise"},
      {"don't care", std::nullopt}, {"dont care", std::nullopt},
      {"don’t care", std::nullopt}, {"amused", std::nullopt},
      {"annoyed", std::nullopt},   {"disgust", std::nullopt},
  };
  VoteMap out;
  for (const auto& [label, count] : raw_votes) {
    const auto it = table.find(to_lower(trim(label)));
    if (it == table.end()) {
      throw DataError("unknown emotion label '" + label + "'");
    }
    if (!std::isfinite(count) || count < 0.0) {
      throw DataError("negative or non-finite vote count for '" + label + "'");
    }
    if (it->second) {
      out[*it->second] += count;
    }
  }
  return out;
}

EmotionProfile normalize_profile(const VoteMap& counts) {
  std::array<double, kNumEmotions> raw{};
  double total = 0.0;
  for (const auto& [label, count] : counts) {
    const auto e = emotion_from_name(label);
    if (!e) {
      throw DataError("normalize_profile: '" + label + "' is not an Ekman label");
    }
    if (!std::isfinite(count) || count < 0.0) {
      throw DataError("normalize_profile: invalid count for '" + label + "'");
    }
    raw[static_cast<std::size_t>(*e)] += count;
    total += count;
  }
  if (!(total > 0.0)) {
    throw DataError("document has no usable annotation (all counts zero)");
  }
  std::array<double, kNumEmotions> values{};
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    values[i] = raw[i] / total;
  }
  return EmotionProfile(values);
}

// ---- cleaning ----

CleanedText clean_text(std::string_view raw, std::span<const std::string> noise_terms) {
  std::string text(raw);
  const std::string lowered_text = to_lower(text);
  // Blank out noise terms; alphanumeric edges must sit on a word boundary.
  std::vector<bool> removed(text.size(), false);
  for (const auto& term : noise_terms) {
    if (term.empty()) continue;
    const std::string needle = to_lower(term);
    std::size_t pos = lowered_text.find(needle);
    while (pos != std::string::npos) {
      const std::size_t end = pos + needle.size();
      const bool left_ok = !is_alnum(needle.front()) || pos == 0 || !is_alnum(text[pos - 1]);
      const bool right_ok = !is_alnum(needle.back()) || end == text.size() || !is_alnum(text[end]);
      if (left_ok && right_ok) {
        std::fill(removed.begin() + static_cast<std::ptrdiff_t>(pos),
                  removed.begin() + static_cast<std::ptrdiff_t>(end), true);
      }
      pos = lowered_text.find(needle, pos + 1);
    }
  }

  std::string kept;
  kept.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (removed[i]) {
      kept.push_back(' ');
    } else if (c == '\'') {
      // apostrophes join: "don't" -> "dont"
    } else if (is_alnum(c)) {
      kept.push_back(c);
    } else {
      kept.push_back(' ');
    }
  }

  CleanedText out;
  std::istringstream words(kept);
  std::string w;
  while (words >> w) {
    out.surface.push_back(w);
    out.tokens.push_back(to_lower(w));
  }
  return out;
}

// ---- statistics ----

CorpusStats corpus_stats(const LabeledCorpus& corpus) {
  if (corpus.empty()) {
    throw DataError("corpus_stats: empty corpus");
  }
  CorpusStats s;
  s.documents = corpus.size();
  std::unordered_set<std::string> vocab;
  for (const auto& e : corpus.entries()) {
    s.total_words += e.doc.tokens.size();
    vocab.insert(e.doc.tokens.begin(), e.doc.tokens.end());
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      s.mean_fraction[k] += e.profile[k];
      if (e.profile[k] > 0.0) {
        ++s.docs_associated[k];
      }
    }
  }
  s.unique_words = vocab.size();
  const double n = static_cast<double>(corpus.size());
  s.avg_words_per_doc = static_cast<double>(s.total_words) / n;
  for (auto& m : s.mean_fraction) {
    m /= n;
  }
  return s;
}

void write_stats_tsv(std::ostream& out, const CorpusStats& s) {
  out << "statistic\tvalue\n";
  out << "documents\t" << s.documents << "\n";
  out << "total_words\t" << s.total_words << "\n";
  out << "unique_words\t" << s.unique_words << "\n";
  out << "avg_words_per_doc\t" << format_fixed(s.avg_words_per_doc, 3) << "\n";
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    out << "mean_vote_fraction_" << kEmotionNames[k] << "\t" << format_fixed(s.mean_fraction[k], 4)
        << "\n";
  }
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    out << "docs_associated_" << kEmotionNames[k] << "\t" << s.docs_associated[k] << "\n";
  }
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("pearson: length mismatch");
  }
  if (a.size() < 2) {
    return std::nullopt;
  }
  const double n = static_cast<double>(a.size());
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  // Relative variance floor guards against rounding noise on constant series.
  const double scale_a = std::max(1.0, mean_a * mean_a) * n;
  const double scale_b = std::max(1.0, mean_b * mean_b) * n;
  if (saa <= 1e-24 * scale_a || sbb <= 1e-24 * scale_b) {
    return std::nullopt;
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationMatrix emotion_correlations(const LabeledCorpus& corpus) {
  if (corpus.size() < 2) {
    throw DataError("emotion_correlations: need at least 2 documents");
  }
  std::array<std::vector<double>, kNumEmotions> cols;
  for (const auto& e : corpus.entries()) {
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      cols[k].push_back(e.profile[k]);
    }
  }
  CorrelationMatrix m;
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    for (std::size_t j = i; j < kNumEmotions; ++j) {
      auto r = pearson(cols[i], cols[j]);
      if (r && i == j) {
        r = 1.0;
      }
      m[i][j] = r;
      m[j][i] = r;
    }
  }
  return m;
}

void write_correlations_tsv(std::ostream& out, const CorrelationMatrix& m) {
  out << "emotion";
  for (auto name : kEmotionNames) {
    out << "\t" << name;
  }
  out << "\n";
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    out << kEmotionNames[i];
    for (std::size_t j = 0; j < kNumEmotions; ++j) {
      out << "\t" << (m[i][j] ? format_fixed(*m[i][j], 4) : std::string("NA"));
    }
    out << "\n";
  }
}

// ---- interchange ----

ReadResult read_records(std::istream& in) {
  using nlohmann::json;
  ReadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    RawRecord rec;
    rec.line = lineno;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) {
        throw DataError("record is not a JSON object");
      }
      if (!j.contains("id") || !j.contains("text")) {
        throw DataError("missing 'id' or 'text'");
      }
      rec.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      rec.text = j.at("text").get<std::string>();
      if (j.contains("votes")) {
        VoteMap votes;
        for (const auto& [k, v] : j.at("votes").items()) {
          votes[k] = v.get<double>();
        }
        rec.votes = std::move(votes);
      }
      if (j.contains("profile")) {
        const auto arr = j.at("profile").get<std::vector<double>>();
        if (arr.size() != kNumEmotions) {
          throw DataError("'profile' must have 5 components");
        }
        std::array<double, kNumEmotions> p{};
        std::copy(arr.begin(), arr.end(), p.begin());
        rec.profile = p;
      }
      if (j.contains("genre") && j.at("genre").is_string()) {
        rec.genre = j.at("genre").get<std::string>();
      }
      if (j.contains("split")) {
        rec.split = split_from_name(j.at("split").get<std::string>());
        if (!rec.split) {
          throw DataError("unknown split tag");
        }
      }
      if (j.contains("tokens")) {
        rec.tokens = j.at("tokens").get<std::vector<std::string>>();
      }
      if (j.contains("surface")) {
        rec.surface = j.at("surface").get<std::vector<std::string>>();
      }
    } catch (const json::exception& e) {
      result.errors.push_back({lineno, rec.id, std::string("malformed JSON: ") + e.what()});
      continue;
    } catch (const DataError& e) {
      result.errors.push_back({lineno, rec.id, e.what()});
      continue;
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

PrepareResult prepare_corpus(const std::vector<RawRecord>& records, const PrepareOptions& opts) {
  PrepareResult result;
  std::vector<LabeledEntry> entries;
  std::vector<std::optional<Split>> tags;
  std::set<std::string> seen;
  for (const auto& rec : records) {
    try {
      if (rec.id.empty()) {
        throw DataError("empty id");
      }
      if (seen.count(rec.id) != 0) {
        throw DataError("duplicate id");
      }
      EmotionProfile profile;
      if (rec.profile) {
        profile = EmotionProfile(*rec.profile);
      } else if (rec.votes) {
        if (rec.votes->empty()) {
          throw DataError("empty votes");
        }
        profile = normalize_profile(map_labels(*rec.votes));
      } else {
        throw DataError("record has neither votes nor profile");
      }
      Document doc;
      doc.id = rec.id;
      doc.raw_text = rec.text;
      doc.genre = rec.genre;
      if (rec.tokens) {
        doc.tokens = *rec.tokens;
        doc.surface = rec.surface ? *rec.surface : *rec.tokens;
        if (doc.surface.size() != doc.tokens.size()) {
          throw DataError("tokens and surface have different lengths");
        }
      } else {
        auto cleaned = clean_text(rec.text, opts.noise_terms);
        doc.tokens = std::move(cleaned.tokens);
        doc.surface = std::move(cleaned.surface);
      }
      if (doc.tokens.empty()) {
        throw DataError("empty after cleaning");
      }
      seen.insert(rec.id);
      entries.push_back({std::move(doc), profile});
      tags.push_back(rec.split);
    } catch (const DataError& e) {
      result.rejected.push_back({rec.line, rec.id, e.what()});
    }
  }
  const bool all_tagged =
      !tags.empty() && std::all_of(tags.begin(), tags.end(), [](const auto& t) { return t.has_value(); });
  LabeledCorpus corpus(std::move(entries));
  if (all_tagged) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      corpus.set_split(corpus[i].doc.id, *tags[i]);
    }
  } else if (!corpus.empty()) {
    corpus.assign_splits(opts.split_seed);
  }
  result.corpus = std::move(corpus);
  return result;
}

void write_corpus(std::ostream& out, const LabeledCorpus& corpus) {
  using nlohmann::ordered_json;
  for (const auto& e : corpus.entries()) {
    ordered_json j;
    j["id"] = e.doc.id;
    j["text"] = e.doc.raw_text;
    j["tokens"] = e.doc.tokens;
    if (e.doc.surface != e.doc.tokens) {
      j["surface"] = e.doc.surface;
    }
    j["profile"] = e.profile.values();
    if (corpus.has_splits()) {
      j["split"] = std::string(split_name(corpus.split_of(e.doc.id)));
    }
    if (e.doc.genre) {
      j["genre"] = *e.doc.genre;
    }
    out << j.dump() << "\n";
  }
}

LabeledCorpus load_corpus(const std::string& path, const PrepareOptions& opts) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open corpus file '" + path + "'");
  }
  const auto read = read_records(in);
  if (!read.errors.empty()) {
    const auto& e = read.errors.front();
    throw DataError(path + ":" + std::to_string(e.line) + ": " + e.reason);
  }
  auto prepared = prepare_corpus(read.records, opts);
  if (!prepared.rejected.empty()) {
    const auto& e = prepared.rejected.front();
    throw DataError(path + ":" + std::to_string(e.line) + ": record '" + e.id + "' rejected: " +
                    e.reason);
  }
  if (prepared.corpus.empty()) {
    throw DataError("corpus file '" + path + "' has no records");
  }
  return std::move(prepared.corpus);
}

}  // namespace redaff
