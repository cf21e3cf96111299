// SPDX-License-Identifier: Apache-2.0
#include "redaff/behavior.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace redaff;

namespace {

Document doc_of(std::string id, std::vector<std::string> surface) {
  Document d;
  d.id = std::move(id);
  d.surface = surface;
  for (auto& s : surface) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  d.tokens = std::move(surface);
  return d;
}

MapPair pair_of(std::vector<double> ham, std::vector<int> eam) {
  return {HybridAttentionMap{"d", std::move(ham)}, ExternalAttentionMap{"d", std::move(eam)}};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// A fixed document with a realistic attention map, shared by the golden test.
ModelAttentionMap fixture_map() {
  return {"fixture-1",
          {"pakistan", "protest", "turns", "violent", "as", "police", "fire", "<tear>", "gas"},
          {0.04, 0.31, 0.02, 0.27, 0.01, 0.08, 0.12, 0.1, 0.05}};
}

}  // namespace

TEST(Eam, EmotionWordFlagged) {
  const auto d = doc_of("a", {"the", "attackers", "fled"});
  const GazetteerTagger none({}, false);
  EXPECT_EQ(build_eam(d, {"attackers"}, none).flags, (std::vector<int>{0, 1, 0}));
}

TEST(Eam, NoHitsIsAllZero) {
  const auto d = doc_of("a", {"quiet", "day"});
  const auto eam = build_eam(d, {"attackers"}, GazetteerTagger({}, false));
  EXPECT_TRUE(eam.all_zero());
}

TEST(Eam, EntityAndEmotionWord) {
  const auto d = doc_of("a", {"Pakistan", "protest"});
  const auto eam = build_eam(d, {"protest"}, GazetteerTagger({"pakistan"}, false));
  EXPECT_EQ(eam.flags, (std::vector<int>{1, 1}));
}

TEST(Tagger, CapitalizationHeuristicSkipsSentenceStart) {
  const auto d = doc_of("a", {"Police", "meet", "Obama", "today"});
  EXPECT_EQ(GazetteerTagger({}, true).tag(d), (std::vector<bool>{false, false, true, false}));
  EXPECT_EQ(GazetteerTagger({}, false).tag(d), (std::vector<bool>{false, false, false, false}));
}

TEST(Tagger, GazetteerIsCaseInsensitive) {
  std::istringstream in("# places\nPakistan\tGPE\nnasa\n\n");
  const auto g = read_gazetteer(in);
  EXPECT_EQ(g, (std::set<std::string>{"pakistan", "nasa"}));
  const auto d = doc_of("a", {"NASA", "and", "pakistan"});
  EXPECT_EQ(GazetteerTagger(g, false).tag(d), (std::vector<bool>{true, false, true}));
}

TEST(Tagger, Annotated) {
  const AnnotatedTagger t({{"a", {0, 2}}});
  EXPECT_EQ(t.tag(doc_of("a", {"x", "y", "z"})), (std::vector<bool>{true, false, true}));
  EXPECT_EQ(t.tag(doc_of("b", {"x"})), (std::vector<bool>{false}));
}

TEST(Ham, AllOnesCopiesModel) {
  const ModelAttentionMap m{"d", {"a", "b", "c"}, {0.5, 0.3, 0.2}};
  EXPECT_EQ(build_ham(m, {"d", {1, 1, 1}}).weights, m.weights);
}

TEST(Ham, AllZerosIsZero) {
  const ModelAttentionMap m{"d", {"a", "b", "c"}, {0.5, 0.3, 0.2}};
  EXPECT_EQ(build_ham(m, {"d", {0, 0, 0}}).weights, (std::vector<double>{0, 0, 0}));
}

TEST(Ham, ElementwiseRule) {
  const ModelAttentionMap m{"d", {"a", "b", "c"}, {0.5, 0.3, 0.2}};
  const auto h = build_ham(m, {"d", {1, 0, 1}});
  EXPECT_EQ(h.weights, (std::vector<double>{0.5, 0, 0.2}));
  EXPECT_EQ(h.binary(), (std::vector<int>{1, 0, 1}));
}

TEST(Ham, LengthMismatchIsError) {
  const ModelAttentionMap m{"d", {"a", "b"}, {0.5, 0.5}};
  EXPECT_THROW(build_ham(m, {"d", {1, 0, 1}}), DataError);
}

TEST(Ham, AboveUniformSupport) {
  const ModelAttentionMap m{"d", {"a", "b", "c", "e"}, {0.4, 0.25, 0.2, 0.15}};
  const auto h = build_ham(m, {"d", {1, 1, 1, 0}}, HamSupport::above_uniform);
  EXPECT_EQ(h.weights, (std::vector<double>{0.4, 0, 0, 0}));
  EXPECT_EQ(ham_support_from_name("above-uniform"), HamSupport::above_uniform);
  EXPECT_EQ(ham_support_name(HamSupport::positive), "positive");
}

TEST(Ham, SupportWithinEamProperty) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(15);
    ModelAttentionMap m{"d", std::vector<std::string>(n, "w"), std::vector<double>(n)};
    ExternalAttentionMap e{"d", std::vector<int>(n)};
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      // Some exact zeros so the floor is exercised.
      m.weights[i] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
      s += m.weights[i];
      e.flags[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    if (s == 0.0) continue;
    for (auto& w : m.weights) w /= s;
    for (auto support : {HamSupport::positive, HamSupport::above_uniform}) {
      const auto h = build_ham(m, e, support);
      for (std::size_t i = 0; i < n; ++i) {
        if (h.weights[i] != 0.0) {
          EXPECT_EQ(e.flags[i], 1);
          EXPECT_GT(m.weights[i], kHybridFloor);
        }
        EXPECT_GE(h.weights[i], 0.0);
      }
    }
  }
}

TEST(Auc, PerfectConstantInverted) {
  const std::vector<double> perfect{0.9, 0.8, 0.1, 0.0};
  const std::vector<int> labels{1, 1, 0, 0};
  EXPECT_EQ(auc(perfect, labels), 1.0);
  const std::vector<double> flat{0.3, 0.3, 0.3, 0.3};
  EXPECT_EQ(auc(flat, labels), 0.5);
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}), 0.0);
  EXPECT_FALSE(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 1}).has_value());
}

TEST(BehSim, ExamplesAndSkips) {
  const std::vector<MapPair> pairs{pair_of({0.1, 0.9}, {1, 0}), pair_of({0.4, 0.6}, {1, 1})};
  const auto r = beh_sim(pairs);
  EXPECT_EQ(*r.value, 0.0);
  EXPECT_EQ(r.counted, 1u);
  EXPECT_EQ(r.skipped, 1u);
  const std::vector<MapPair> none{pair_of({0.4, 0.6}, {1, 1})};
  EXPECT_THROW(beh_sim(none), DataError);
  // The combined entry point reports instead of throwing.
  EXPECT_FALSE(behavior_scores(none).beh_sim.value.has_value());
}

TEST(BehSim, IndependentScoresGiveOneHalf) {
  // The ranking statistic under the null: scores drawn independently of the labels.
  Rng rng(42);
  std::vector<MapPair> pairs;
  std::size_t tokens = 0;
  for (int d = 0; d < 400; ++d) {
    const std::size_t n = 4 + rng.below(8);
    std::vector<double> w(n);
    std::vector<int> f(n);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s += (w[i] = rng.uniform());
      f[i] = rng.uniform() < 0.35 ? 1 : 0;
    }
    for (auto& x : w) x /= s;
    pairs.push_back(pair_of(w, f));
    tokens += n;
  }
  ASSERT_GE(tokens, 200u);
  EXPECT_NEAR(*beh_sim(pairs).value, 0.5, 0.05);
}

TEST(WordSim, Examples) {
  EXPECT_EQ(cosine_binary(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_binary(std::vector<int>{1, 0}, std::vector<int>{0, 1}), 0.0);
  EXPECT_NEAR(cosine_binary(std::vector<int>{1, 1, 0}, std::vector<int>{1, 0, 1}), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(cosine_binary(std::vector<int>{0, 0}, std::vector<int>{0, 1}), 0.0);
}

TEST(WordSim, SkipsDocsWithoutEamHits) {
  const std::vector<MapPair> pairs{pair_of({0.6, 0, 0.4}, {1, 0, 1}), pair_of({0, 0}, {0, 0}),
                                   pair_of({0.5, 0}, {0, 1})};
  const auto r = word_sim(pairs);
  EXPECT_DOUBLE_EQ(*r.value, 0.5);
  EXPECT_EQ(r.counted, 2u);
  EXPECT_EQ(r.skipped, 1u);
}

TEST(WordProb, Examples) {
  EXPECT_EQ(word_prob_term(std::vector<int>{0, 0}, std::vector<int>{0, 0}), 0.0);
  EXPECT_EQ(word_prob_term(std::vector<int>{1, 1, 1}, std::vector<int>{1, 1, 1}), 1.0);
  EXPECT_EQ(word_prob_term(std::vector<int>{1, 1, 1, 0, 0}, std::vector<int>{1, 1, 1, 1, 0}), 0.75);
}

TEST(WordProb, AveragesOverCountedDocs) {
  const std::vector<MapPair> pairs{pair_of({0.2, 0.3, 0.1, 0, 0.4}, {1, 1, 1, 1, 0}),
                                   pair_of({0.5, 0.5}, {0, 0}), pair_of({0.9, 0.1}, {1, 1})};
  const auto r = word_prob(pairs);
  EXPECT_DOUBLE_EQ(*r.value, (0.75 + 0.0 + 1.0) / 2.0);
  EXPECT_EQ(r.skipped, 1u);
}

TEST(Scores, StayInUnitInterval) {
  Rng rng(5);
  std::vector<MapPair> pairs;
  for (int d = 0; d < 100; ++d) {
    const std::size_t n = 2 + rng.below(6);
    ModelAttentionMap m{"d", std::vector<std::string>(n, "w"), std::vector<double>(n, 1.0 / n)};
    ExternalAttentionMap e{"d", std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      m.weights[i] = rng.uniform();
      e.flags[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    pairs.push_back({build_ham(m, e, HamSupport::above_uniform), e});
  }
  const auto s = behavior_scores(pairs);
  for (const auto* score : {&s.beh_sim, &s.word_sim, &s.word_prob}) {
    ASSERT_TRUE(score->value.has_value());
    EXPECT_GE(*score->value, 0.0);
    EXPECT_LE(*score->value, 1.0);
  }
}

TEST(Scores, PositiveSupportSaturates) {
  // Softmax attention is never exactly zero, so under the positive rule the
  // hybrid map keeps every EAM token and all three scores reach 1.
  Rng rng(6);
  std::vector<MapPair> pairs;
  for (int d = 0; d < 50; ++d) {
    const std::size_t n = 3 + rng.below(5);
    ModelAttentionMap m{"d", std::vector<std::string>(n, "w"), std::vector<double>(n)};
    ExternalAttentionMap e{"d", std::vector<int>(n)};
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s += (m.weights[i] = std::exp(rng.normal()));
      e.flags[i] = i == 0 ? 1 : (i == 1 ? 0 : static_cast<int>(rng.below(2)));
    }
    for (auto& w : m.weights) w /= s;
    pairs.push_back({build_ham(m, e), e});
  }
  const auto sc = behavior_scores(pairs);
  EXPECT_DOUBLE_EQ(*sc.beh_sim.value, 1.0);
  EXPECT_DOUBLE_EQ(*sc.word_sim.value, 1.0);
  EXPECT_DOUBLE_EQ(*sc.word_prob.value, 1.0);
}

TEST(Heatmap, UniformWeightsShadeUniformly) {
  const ModelAttentionMap m{"u", {"a", "b", "c", "d"}, {0.25, 0.25, 0.25, 0.25}};
  const auto html = render_heatmap(m);
  std::size_t count = 0;
  for (std::size_t p = html.find("rgba(178,34,34,1.000)"); p != std::string::npos;
       p = html.find("rgba(178,34,34,1.000)", p + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 4u);
}

TEST(Heatmap, OneHotHasSingleDarkToken) {
  const ModelAttentionMap m{"o", {"a", "b", "c"}, {0.0, 1.0, 0.0}};
  const auto html = render_heatmap(m);
  EXPECT_NE(html.find("rgba(178,34,34,1.000)\">b<"), std::string::npos);
  EXPECT_NE(html.find("rgba(178,34,34,0.000)\">a<"), std::string::npos);
  EXPECT_NE(html.find("rgba(178,34,34,0.000)\">c<"), std::string::npos);
}

TEST(Heatmap, EscapesMarkup) {
  const auto html = render_heatmap(fixture_map());
  EXPECT_NE(html.find("&lt;tear&gt;"), std::string::npos);
  EXPECT_EQ(html.find("<tear>"), std::string::npos);
}

TEST(Heatmap, GoldenFile) {
  const auto m = fixture_map();
  const auto doc = doc_of("fixture-1", m.tokens);
  const auto ham = build_ham(m, {"fixture-1", {1, 1, 0, 1, 0, 0, 0, 0, 0}});
  const std::vector<std::string> fragments{render_heatmap(m), render_heatmap(ham, doc)};
  const auto page = heatmap_page(fragments, "fixture");
  EXPECT_EQ(page, read_file(std::string(REDAFF_TEST_DATA) + "/golden_heatmap.html"));
  EXPECT_EQ(page, heatmap_page(fragments, "fixture"));
}

TEST(Table, GroupedByMeasure) {
  BehaviorScores a;
  a.beh_sim.value = 0.75;
  a.word_sim.value = 0.5;
  a.word_prob.value = 0.25;
  BehaviorScores b = a;
  b.beh_sim.value.reset();
  const std::vector<BehaviorRow> rows{{"orig", "lexA", a}, {"orig", "lexB", b}, {"cf", "lexA", a}};
  std::ostringstream out;
  write_behavior_table(out, rows);
  EXPECT_EQ(out.str(),
            "measure\tmodel\tlexA\tlexB\n"
            "BehSim\torig\t0.7500\tNA\n"
            "BehSim\tcf\t0.7500\tNA\n"
            "WordSim\torig\t0.5000\t0.5000\n"
            "WordSim\tcf\t0.5000\tNA\n"
            "WordProb\torig\t0.2500\t0.2500\n"
            "WordProb\tcf\t0.2500\tNA\n");
}

TEST(Dump, TabSeparatedRoundTripValues) {
  const std::vector<ModelAttentionMap> maps{fixture_map()};
  std::ostringstream out;
  write_attention_dump(out, maps);
  std::istringstream in(out.str());
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    const auto f = split(line, '\t');
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f[0], "fixture-1");
    EXPECT_EQ(f[1], maps[0].tokens[i]);
    EXPECT_EQ(std::stod(f[2]), maps[0].weights[i]);
    ++i;
  }
  EXPECT_EQ(i, 9u);
}

TEST(Lexicon, EmotionWordsThreshold) {
  const Lexicon lex{{"calm", {0.1, 0.1, 0.4, 0.1, 0.1}}, {"rage", {0.9, 0, 0, 0, 0}}};
  EXPECT_EQ(emotion_words(lex), (std::set<std::string>{"rage"}));
  EXPECT_EQ(emotion_words(lex, 0.3), (std::set<std::string>{"calm", "rage"}));
}
