// SPDX-License-Identifier: Apache-2.0
#include "redaff/corpus.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace redaff;

namespace {

// Two-pass Pearson in long double, written from the definition.
double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

LabeledCorpus corpus_of(const std::vector<std::array<double, 5>>& profiles) {
  std::vector<LabeledEntry> entries;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    d.tokens = {"w" + std::to_string(i), "common"};
    d.surface = d.tokens;
    entries.push_back({d, EmotionProfile(profiles[i])});
  }
  return LabeledCorpus(entries);
}

std::array<double, 5> random_profile(Rng& rng) {
  std::array<double, 5> p{};
  double s = 0;
  for (auto& x : p) s += (x = rng.uniform() + 1e-3);
  for (auto& x : p) x /= s;
  return p;
}

}  // namespace

TEST(EmotionProfile, RejectsOffSimplex) {
  EXPECT_THROW(EmotionProfile({0.5, 0.5, 0.5, 0, 0}), DataError);
  EXPECT_THROW(EmotionProfile({-0.1, 0.6, 0.5, 0, 0}), DataError);
  EXPECT_NO_THROW(EmotionProfile({0.2, 0.2, 0.2, 0.2, 0.2}));
}

TEST(EmotionProfile, ArgmaxTiesToLowestIndex) {
  EXPECT_EQ(EmotionProfile({0, 0.4, 0.4, 0.2, 0}).argmax(), 1u);
  EXPECT_EQ(EmotionProfile::uniform().argmax(), 0u);
}

TEST(MapLabels, RapplerMapping) {
  const auto out = map_labels({{"Angry", 3}, {"Happy", 7}, {"Amused", 2}});
  EXPECT_EQ(out, (VoteMap{{"Anger", 3}, {"Joy", 7}}));
}

TEST(MapLabels, IdentityOnEkman) {
  EXPECT_EQ(map_labels({{"Anger", 1}, {"Fear", 1}}), (VoteMap{{"Anger", 1}, {"Fear", 1}}));
}

TEST(MapLabels, DontCareDropped) {
  EXPECT_TRUE(map_labels({{"Don't care", 5}}).empty());
}

TEST(MapLabels, FullTable) {
  const auto out = map_labels({{"Sad", 1}, {"Afraid", 2}, {"Inspired", 3}, {"Annoyed", 4}, {"Disgust", 5}});
  EXPECT_EQ(out, (VoteMap{{"Sadness", 1}, {"Fear", 2}, {"Surprise", 3}}));
}

TEST(MapLabels, UnknownLabelNamed) {
  try {
    map_labels({{"Bored", 1}});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("Bored"), std::string::npos);
  }
}

TEST(MapLabels, Idempotent) {
  const VoteMap raw{{"Angry", 3}, {"happy", 2}, {"Inspired", 1}, {"Amused", 9}};
  const auto once = map_labels(raw);
  EXPECT_EQ(map_labels(once), once);
}

TEST(NormalizeProfile, Uniform) {
  const auto p = normalize_profile({{"Anger", 1}, {"Fear", 1}, {"Joy", 1}, {"Sadness", 1}, {"Surprise", 1}});
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(p[i], 0.2);
}

TEST(NormalizeProfile, Proportional) {
  const auto p = normalize_profile({{"Joy", 3}, {"Anger", 1}});
  EXPECT_EQ(p.values(), (std::array<double, 5>{0.25, 0, 0.75, 0, 0}));
}

TEST(NormalizeProfile, EmptyIsError) {
  EXPECT_THROW(normalize_profile({}), DataError);
  EXPECT_THROW(normalize_profile({{"Joy", 0}}), DataError);
}

TEST(CleanText, NoiseAndPunctuation) {
  const auto c = clean_text("Pakistan protest (UPDATED)!", default_noise_terms());
  EXPECT_EQ(c.tokens, (std::vector<std::string>{"pakistan", "protest"}));
  EXPECT_EQ(c.surface, (std::vector<std::string>{"Pakistan", "protest"}));
}

TEST(CleanText, EmptyInput) {
  EXPECT_TRUE(clean_text("", default_noise_terms()).tokens.empty());
}

TEST(CleanText, Lowercases) {
  EXPECT_EQ(clean_text("Hello World", {}).tokens, (std::vector<std::string>{"hello", "world"}));
}

TEST(CleanText, NoiseTermNeedsWordBoundary) {
  const std::vector<std::string> noise{"report"};
  EXPECT_EQ(clean_text("reporter report", noise).tokens, (std::vector<std::string>{"reporter"}));
}

TEST(CorpusStats, SingleDoc) {
  const auto s = corpus_stats(corpus_of({{1, 0, 0, 0, 0}}));
  EXPECT_DOUBLE_EQ(s.mean_fraction[0], 1.0);
  EXPECT_EQ(s.docs_associated[0], 1u);
  for (std::size_t k = 1; k < 5; ++k) {
    EXPECT_DOUBLE_EQ(s.mean_fraction[k], 0.0);
    EXPECT_EQ(s.docs_associated[k], 0u);
  }
}

TEST(CorpusStats, TwoDocsAverage) {
  const auto s = corpus_stats(corpus_of({{1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}}));
  EXPECT_DOUBLE_EQ(s.mean_fraction[0], 0.5);
  EXPECT_DOUBLE_EQ(s.mean_fraction[1], 0.5);
  EXPECT_EQ(s.total_words, 4u);
  EXPECT_EQ(s.unique_words, 3u);
  EXPECT_DOUBLE_EQ(s.avg_words_per_doc, 2.0);
}

TEST(Correlations, IdenticalColumns) {
  const auto m = emotion_correlations(
      corpus_of({{0.3, 0.3, 0.4, 0, 0}, {0.1, 0.1, 0.8, 0, 0}, {0.45, 0.45, 0.1, 0, 0}}));
  ASSERT_TRUE(m[0][1].has_value());
  EXPECT_NEAR(*m[0][1], 1.0, 1e-12);
  EXPECT_FALSE(m[0][3].has_value());
}

TEST(Correlations, AntiCorrelated) {
  const auto m = emotion_correlations(corpus_of({{0.2, 0, 0.8, 0, 0}, {0.7, 0, 0.3, 0, 0}, {1, 0, 0, 0, 0}}));
  ASSERT_TRUE(m[0][2].has_value());
  EXPECT_NEAR(*m[0][2], -1.0, 1e-12);
  EXPECT_FALSE(m[1][1].has_value());
}

TEST(Correlations, MatchesOracleAndIsSymmetric) {
  Rng rng(11);
  std::vector<std::array<double, 5>> ps;
  for (int i = 0; i < 10; ++i) ps.push_back(random_profile(rng));
  const auto m = emotion_correlations(corpus_of(ps));
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      std::vector<double> a, b;
      for (const auto& p : ps) {
        a.push_back(p[i]);
        b.push_back(p[j]);
      }
      ASSERT_TRUE(m[i][j].has_value());
      EXPECT_NEAR(*m[i][j], pearson_oracle(a, b), 1e-12);
      EXPECT_DOUBLE_EQ(*m[i][j], *m[j][i]);
      EXPECT_LE(std::abs(*m[i][j]), 1.0);
    }
    EXPECT_DOUBLE_EQ(*m[i][i], 1.0);
  }
}

TEST(Pearson, AffineInvariance) {
  Rng rng(4);
  std::vector<double> a(12), b(12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal() + a[i];
  }
  std::vector<double> a2(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) a2[i] = 3.5 * a[i] - 7.0;
  EXPECT_NEAR(*pearson(a, b), *pearson(a2, b), 1e-12);
  EXPECT_FALSE(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}).has_value());
}

TEST(Splits, SixTwoTwoOnTenDocs) {
  std::vector<std::array<double, 5>> ps(10, {0.2, 0.2, 0.2, 0.2, 0.2});
  auto c = corpus_of(ps);
  c.assign_splits(3);
  EXPECT_EQ(c.indices(Split::train).size(), 6u);
  EXPECT_EQ(c.indices(Split::val).size(), 2u);
  EXPECT_EQ(c.indices(Split::test).size(), 2u);
}

TEST(Splits, FloorRuleAndDeterminism) {
  std::vector<std::array<double, 5>> ps(1251, {0.2, 0.2, 0.2, 0.2, 0.2});
  auto a = corpus_of(ps);
  auto b = corpus_of(ps);
  a.assign_splits(17);
  b.assign_splits(17);
  EXPECT_EQ(a.indices(Split::train).size(), 750u);
  EXPECT_EQ(a.indices(Split::val).size(), 250u);
  EXPECT_EQ(a.indices(Split::test).size(), 251u);
  EXPECT_EQ(a.indices(Split::test), b.indices(Split::test));
  auto c = corpus_of(ps);
  c.assign_splits(18);
  EXPECT_NE(a.indices(Split::test), c.indices(Split::test));
}

TEST(Records, ErrorsCarryLineNumbers) {
  std::istringstream in(
      "{\"id\":\"a\",\"text\":\"Hello world\",\"votes\":{\"Joy\":2}}\n"
      "not json\n"
      "{\"id\":\"b\"}\n");
  const auto r = read_records(in);
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(r.errors[0].line, 2u);
  EXPECT_EQ(r.errors[1].line, 3u);
}

TEST(Prepare, RejectsWithReasons) {
  std::istringstream in(
      "{\"id\":\"a\",\"text\":\"Hello world\",\"votes\":{\"Joy\":2}}\n"
      "{\"id\":\"b\",\"text\":\"Quiet day\",\"votes\":{}}\n"
      "{\"id\":\"c\",\"text\":\"(UPDATED)\",\"votes\":{\"Fear\":1}}\n"
      "{\"id\":\"d\",\"text\":\"Odd one\",\"votes\":{\"Bored\":1}}\n");
  const auto prepared = prepare_corpus(read_records(in).records, {});
  EXPECT_EQ(prepared.corpus.size(), 1u);
  ASSERT_EQ(prepared.rejected.size(), 3u);
  EXPECT_EQ(prepared.rejected[0].id, "b");
  EXPECT_NE(prepared.rejected[0].reason.find("empty votes"), std::string::npos);
  EXPECT_EQ(prepared.rejected[1].line, 3u);
  EXPECT_NE(prepared.rejected[2].reason.find("Bored"), std::string::npos);
}

TEST(Prepare, WriteLoadRoundTripIsByteStable) {
  std::ostringstream raw;
  for (int i = 0; i < 10; ++i) {
    raw << "{\"id\":\"n" << i << "\",\"text\":\"Headline number " << i
        << "\",\"votes\":{\"Happy\":" << i + 1 << ",\"Sad\":2}}\n";
  }
  std::istringstream in(raw.str());
  const auto prepared = prepare_corpus(read_records(in).records, {});
  ASSERT_EQ(prepared.corpus.size(), 10u);
  std::ostringstream first;
  write_corpus(first, prepared.corpus);
  std::istringstream back(first.str());
  const auto again = prepare_corpus(read_records(back).records, {});
  std::ostringstream second;
  write_corpus(second, again.corpus);
  EXPECT_EQ(first.str(), second.str());
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(again.corpus.split_of(again.corpus[i].doc.id),
              prepared.corpus.split_of(prepared.corpus[i].doc.id));
    EXPECT_EQ(again.corpus[i].profile, prepared.corpus[i].profile);
  }
}

TEST(Prepare, ProfilesOnSimplex) {
  std::ostringstream raw;
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    raw << "{\"id\":\"r" << i << "\",\"text\":\"t " << i << "\",\"votes\":{\"Angry\":" << rng.below(9)
        << ",\"Afraid\":" << rng.below(9) << ",\"Happy\":" << 1 + rng.below(9) << "}}\n";
  }
  std::istringstream in(raw.str());
  const auto prepared = prepare_corpus(read_records(in).records, {});
  for (const auto& e : prepared.corpus.entries()) {
    double s = 0;
    for (double v : e.profile.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}
