// SPDX-License-Identifier: Apache-2.0
#include "redaff/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace redaff {

namespace {

constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                        "s", "t", "v", "z", "br", "dr", "gl", "kr", "st", "tr"};
constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u"};
constexpr std::string_view kCodas[] = {"", "", "n", "r", "l", "s", "k"};

std::string pseudo_word(Rng& rng, int min_syllables, int max_syllables) {
  const int n = min_syllables + static_cast<int>(rng.below(max_syllables - min_syllables + 1));
  std::string w;
  for (int s = 0; s < n; ++s) {
    w += kOnsets[rng.below(std::size(kOnsets))];
    w += kVowels[rng.below(std::size(kVowels))];
  }
  w += kCodas[rng.below(std::size(kCodas))];
  return w;
}

std::vector<std::string> fresh_words(Rng& rng, std::size_t count, int lo, int hi,
                                     std::set<std::string>& taken) {
  std::vector<std::string> out;
  while (out.size() < count) {
    auto w = pseudo_word(rng, lo, hi);
    if (w.size() < 3 || !taken.insert(w).second) continue;
    out.push_back(std::move(w));
  }
  return out;
}

std::size_t draw(Rng& rng, std::span<const double> cumulative) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                               cumulative.size() - 1);
}

std::vector<double> cumulate(std::span<const double> w) {
  std::vector<double> c(w.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) c[i] = (s += w[i]);
  return c;
}

std::string capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

}  // namespace

SyntheticBundle make_synthetic(const SyntheticSpec& spec) {
  if (spec.documents == 0 || spec.words_per_emotion < 2 || spec.neutral_words == 0 ||
      spec.dim < 1 || spec.annotators == 0) {
    throw UsageError("make_synthetic: degenerate spec");
  }
  Rng rng(spec.seed);
  std::set<std::string> taken;
  std::array<std::vector<std::string>, kNumEmotions> emo;
  for (auto& words : emo) words = fresh_words(rng, spec.words_per_emotion, 2, 3, taken);
  const auto neutral = fresh_words(rng, spec.neutral_words, 1, 3, taken);
  const auto entities = fresh_words(rng, spec.entities, 2, 3, taken);

  std::vector<double> zipf(spec.words_per_emotion);
  for (std::size_t r = 0; r < zipf.size(); ++r) {
    zipf[r] = 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf);
  }
  const auto zipf_cdf = cumulate(zipf);
  const auto prior_cdf = cumulate(spec.prior);

  std::vector<std::string> vocab;
  std::map<std::string, Emotion> word_class;
  for (std::size_t e = 0; e < kNumEmotions; ++e) {
    for (const auto& w : emo[e]) {
      vocab.push_back(w);
      word_class[w] = static_cast<Emotion>(e);
    }
  }
  vocab.insert(vocab.end(), neutral.begin(), neutral.end());
  vocab.insert(vocab.end(), entities.begin(), entities.end());
  Matrix vectors(static_cast<Eigen::Index>(vocab.size()), spec.dim);
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    for (Eigen::Index k = 0; k < spec.dim; ++k) vectors(i, k) = rng.normal();
    vectors.row(i).normalize();
  }

  SyntheticBundle b{{}, EmbeddingTable(vocab, std::move(vectors), EmbeddingVariant::original),
                    {}, {}, {}, word_class};
  for (const auto& [w, cls] : word_class) {
    EmotionScores s{};
    for (auto& x : s) x = 0.3 * rng.uniform();
    s[static_cast<std::size_t>(cls)] = 0.6 + 0.35 * rng.uniform();
    b.lexicon[w] = s;
    if (rng.uniform() < spec.partial_coverage) {
      for (auto& x : s) x = std::clamp(x + rng.uniform(-0.1, 0.1), 0.0, 1.0);
      b.partial_lexicon[w] = s;
    }
  }
  for (std::size_t i = 0; i < entities.size(); i += 2) b.gazetteer.insert(entities[i]);

  for (std::size_t d = 0; d < spec.documents; ++d) {
    const std::size_t e = draw(rng, prior_cdf);
    std::vector<std::pair<std::string, bool>> words;  // word, is entity
    const std::size_t n_emo = 1 + (rng.uniform() < 0.4 ? 1 : 0);
    for (std::size_t k = 0; k < n_emo; ++k) words.emplace_back(emo[e][draw(rng, zipf_cdf)], false);
    std::optional<std::size_t> distractor;
    if (rng.uniform() < 0.3) {
      distractor = (e + 1 + rng.below(kNumEmotions - 1)) % kNumEmotions;
      words.emplace_back(emo[*distractor][draw(rng, zipf_cdf)], false);
    }
    if (!entities.empty() && rng.uniform() < 0.5) {
      words.emplace_back(entities[rng.below(entities.size())], true);
    }
    const std::size_t n_neutral = 2 + rng.below(4);
    for (std::size_t k = 0; k < n_neutral; ++k) {
      words.emplace_back(neutral[rng.below(neutral.size())], false);
    }
    rng.shuffle(words);

    std::string text;
    for (std::size_t k = 0; k < words.size(); ++k) {
      const bool cap = k == 0 || words[k].second;
      if (k > 0) text += ' ';
      text += cap ? capitalize(words[k].first) : words[k].first;
    }

    std::array<double, kNumEmotions> w{};
    for (auto& x : w) x = 0.15 * rng.uniform();
    w[e] += 0.5 + 0.3 * rng.uniform();
    if (distractor) w[*distractor] += 0.25;
    const auto w_cdf = cumulate(w);
    VoteMap votes;
    for (std::size_t k = 0; k < kNumEmotions; ++k) votes[std::string(kEmotionLabels[k])] = 0.0;
    for (std::size_t a = 0; a < spec.annotators; ++a) {
      votes[std::string(kEmotionLabels[draw(rng, w_cdf)])] += 1.0;
    }

    RawRecord rec;
    rec.line = d + 1;
    rec.id = "syn-" + std::to_string(d + 1);
    rec.text = std::move(text);
    rec.votes = std::move(votes);
    b.records.push_back(std::move(rec));
  }
  return b;
}

void write_raw_records(std::ostream& out, const std::vector<RawRecord>& records) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["text"] = r.text;
    if (r.votes) {
      nlohmann::ordered_json v = nlohmann::ordered_json::object();
      for (const auto& [label, count] : *r.votes) {
        if (count == std::floor(count) && std::abs(count) < 1e15) {
          v[label] = static_cast<long long>(count);
        } else {
          v[label] = count;
        }
      }
      j["votes"] = v;
    }
    if (r.genre) j["genre"] = *r.genre;
    out << j.dump() << '\n';
  }
}

void write_synthetic(const std::string& dir, const SyntheticBundle& bundle) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw DataError("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("corpus.jsonl");
    write_raw_records(f, bundle.records);
  }
  {
    auto f = open("embeddings.txt");
    write_embeddings(f, bundle.embeddings);
  }
  {
    auto f = open("lexicon.tsv");
    write_lexicon(f, bundle.lexicon);
  }
  {
    auto f = open("lexicon_partial.tsv");
    write_lexicon(f, bundle.partial_lexicon);
  }
  {
    auto f = open("gazetteer.txt");
    for (const auto& g : bundle.gazetteer) f << g << '\n';
  }
}

}  // namespace redaff
