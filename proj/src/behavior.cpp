// SPDX-License-Identifier: Apache-2.0
#include "redaff/behavior.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace redaff {

bool ExternalAttentionMap::all_zero() const {
  return std::none_of(flags.begin(), flags.end(), [](int f) { return f != 0; });
}

std::vector<int> HybridAttentionMap::binary() const {
  std::vector<int> out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] > 0.0 ? 1 : 0;
  return out;
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

GazetteerTagger::GazetteerTagger(std::set<std::string> entries, bool capitalization_heuristic)
    : heuristic_(capitalization_heuristic) {
  for (const auto& e : entries) entries_.insert(lower(e));
}

std::vector<bool> GazetteerTagger::tag(const Document& doc) const {
  std::vector<bool> out(doc.tokens.size(), false);
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    if (entries_.count(lower(doc.tokens[i]))) {
      out[i] = true;
      continue;
    }
    if (heuristic_ && i > 0 && i < doc.surface.size() && !doc.surface[i].empty() &&
        std::isupper(static_cast<unsigned char>(doc.surface[i][0]))) {
      out[i] = true;
    }
  }
  return out;
}

AnnotatedTagger::AnnotatedTagger(std::map<std::string, std::set<std::size_t>> annotations)
    : annotations_(std::move(annotations)) {}

std::vector<bool> AnnotatedTagger::tag(const Document& doc) const {
  std::vector<bool> out(doc.tokens.size(), false);
  const auto it = annotations_.find(doc.id);
  if (it == annotations_.end()) return out;
  for (std::size_t i : it->second) {
    if (i < out.size()) out[i] = true;
  }
  return out;
}

std::set<std::string> read_gazetteer(std::istream& in) {
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto tab = line.find('\t');
    if (tab != std::string::npos) line.erase(tab);
    line = trim(line);
    if (!line.empty()) out.insert(lower(line));
  }
  return out;
}

std::set<std::string> load_gazetteer(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open gazetteer: " + path);
  return read_gazetteer(in);
}

std::set<std::string> emotion_words(const Lexicon& lexicon, double threshold) {
  std::set<std::string> out;
  for (const auto& [word, scores] : lexicon) {
    if (std::any_of(scores.begin(), scores.end(), [&](double s) { return s > threshold; })) {
      out.insert(word);
    }
  }
  return out;
}

ExternalAttentionMap build_eam(const Document& doc, const std::set<std::string>& emotion_word_set,
                               const EntityTagger& tagger) {
  ExternalAttentionMap eam;
  eam.doc_id = doc.id;
  const auto entities = tagger.tag(doc);
  eam.flags.assign(doc.tokens.size(), 0);
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    if (emotion_word_set.count(doc.tokens[i]) || (i < entities.size() && entities[i])) {
      eam.flags[i] = 1;
    }
  }
  return eam;
}

std::string_view ham_support_name(HamSupport s) {
  return s == HamSupport::positive ? "positive" : "above-uniform";
}

std::optional<HamSupport> ham_support_from_name(std::string_view name) {
  if (name == "positive") return HamSupport::positive;
  if (name == "above-uniform") return HamSupport::above_uniform;
  return std::nullopt;
}

HybridAttentionMap build_ham(const ModelAttentionMap& model_map, const ExternalAttentionMap& eam,
                             HamSupport support) {
  if (model_map.weights.size() != eam.flags.size()) {
    throw DataError("build_ham: map lengths differ for " + model_map.doc_id + " (" +
                    std::to_string(model_map.weights.size()) + " vs " +
                    std::to_string(eam.flags.size()) + ")");
  }
  HybridAttentionMap ham;
  ham.doc_id = model_map.doc_id;
  ham.weights.assign(eam.flags.size(), 0.0);
  double floor = kHybridFloor;
  if (support == HamSupport::above_uniform && !eam.flags.empty()) {
    floor = std::max(floor, 1.0 / static_cast<double>(eam.flags.size()));
  }
  for (std::size_t i = 0; i < eam.flags.size(); ++i) {
    const double w = model_map.weights[i];
    if (eam.flags[i] != 0 && w > floor) ham.weights[i] = w;
  }
  return ham;
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("auc: length mismatch");
  double total = 0.0;
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0) continue;
    ++pos;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) {
        total += 1.0;
      } else if (scores[i] == scores[j]) {
        total += 0.5;
      }
    }
  }
  neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  return total / (static_cast<double>(pos) * static_cast<double>(neg));
}

SimilarityScore beh_sim(std::span<const MapPair> pairs) {
  SimilarityScore r;
  double sum = 0.0;
  for (const auto& p : pairs) {
    const auto a = auc(p.ham.weights, p.eam.flags);
    if (a) {
      sum += *a;
      ++r.counted;
    } else {
      ++r.skipped;
    }
  }
  if (r.counted == 0) {
    throw DataError("beh_sim: every document lacks either EAM-positive or EAM-negative tokens");
  }
  r.value = sum / static_cast<double>(r.counted);
  return r;
}

double cosine_binary(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DataError("cosine_binary: length mismatch");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] != 0 ? 1.0 : 0.0;
    const double y = b[i] != 0 ? 1.0 : 0.0;
    dot += x * y;
    na += x;
    nb += y;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

SimilarityScore word_sim(std::span<const MapPair> pairs) {
  SimilarityScore r;
  double sum = 0.0;
  for (const auto& p : pairs) {
    if (p.eam.all_zero()) {
      ++r.skipped;
      continue;
    }
    sum += cosine_binary(p.ham.binary(), p.eam.flags);
    ++r.counted;
  }
  if (r.counted > 0) r.value = sum / static_cast<double>(r.counted);
  return r;
}

double word_prob_term(std::span<const int> ham_binary, std::span<const int> eam) {
  if (ham_binary.size() != eam.size()) throw DataError("word_prob: length mismatch");
  double inter = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < eam.size(); ++i) {
    if (eam[i] == 0) continue;
    positives += 1.0;
    if (ham_binary[i] != 0) inter += 1.0;
  }
  const double lambda = positives == 0.0 ? 1.0 : 0.0;
  return inter / (positives + lambda);
}

SimilarityScore word_prob(std::span<const MapPair> pairs) {
  SimilarityScore r;
  double sum = 0.0;
  for (const auto& p : pairs) {
    // D' docs contribute a zero term and drop out of the denominator.
    sum += word_prob_term(p.ham.binary(), p.eam.flags);
    if (p.eam.all_zero()) {
      ++r.skipped;
    } else {
      ++r.counted;
    }
  }
  if (r.counted > 0) r.value = sum / static_cast<double>(r.counted);
  return r;
}

BehaviorScores behavior_scores(std::span<const MapPair> pairs) {
  BehaviorScores s;
  try {
    s.beh_sim = beh_sim(pairs);
  } catch (const DataError&) {
    s.beh_sim.skipped = pairs.size();
  }
  s.word_sim = word_sim(pairs);
  s.word_prob = word_prob(pairs);
  return s;
}

void write_behavior_table(std::ostream& out, std::span<const BehaviorRow> rows) {
  std::vector<std::string> models;
  std::vector<std::string> lexicons;
  for (const auto& r : rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(lexicons.begin(), lexicons.end(), r.lexicon) == lexicons.end()) {
      lexicons.push_back(r.lexicon);
    }
  }
  auto find = [&](const std::string& m, const std::string& l) -> const BehaviorRow* {
    for (const auto& r : rows) {
      if (r.model == m && r.lexicon == l) return &r;
    }
    return nullptr;
  };
  auto cell = [](const SimilarityScore& s) {
    return s.value ? format_fixed(*s.value, 4) : std::string("NA");
  };
  const std::pair<const char*, SimilarityScore BehaviorScores::*> measures[] = {
      {"BehSim", &BehaviorScores::beh_sim},
      {"WordSim", &BehaviorScores::word_sim},
      {"WordProb", &BehaviorScores::word_prob},
  };
  out << "measure\tmodel";
  for (const auto& l : lexicons) out << '\t' << l;
  out << '\n';
  for (const auto& [name, member] : measures) {
    for (const auto& m : models) {
      out << name << '\t' << m;
      for (const auto& l : lexicons) {
        const auto* r = find(m, l);
        out << '\t' << (r ? cell(r->scores.*member) : std::string("NA"));
      }
      out << '\n';
    }
  }
}

namespace {

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string heatmap_fragment(const std::string& doc_id, std::span<const std::string> tokens,
                             std::span<const double> weights) {
  if (tokens.size() != weights.size()) {
    throw DataError("render_heatmap: " + doc_id + " has " + std::to_string(tokens.size()) +
                    " tokens but " + std::to_string(weights.size()) + " weights");
  }
  double peak = 0.0;
  for (double w : weights) peak = std::max(peak, w);
  std::ostringstream out;
  out << "<div class=\"doc\" data-id=\"" << html_escape(doc_id) << "\">";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const double level = peak > 0.0 ? std::clamp(weights[i] / peak, 0.0, 1.0) : 0.0;
    if (i > 0) out << ' ';
    out << "<span title=\"" << format_fixed(weights[i], 6)
        << "\" style=\"background-color:rgba(178,34,34," << format_fixed(level, 3) << ")\">"
        << html_escape(tokens[i]) << "</span>";
  }
  out << "</div>\n";
  return out.str();
}

}  // namespace

std::string render_heatmap(const ModelAttentionMap& map) {
  return heatmap_fragment(map.doc_id, map.tokens, map.weights);
}

std::string render_heatmap(const HybridAttentionMap& map, const Document& doc) {
  return heatmap_fragment(map.doc_id, doc.tokens, map.weights);
}

std::string heatmap_page(std::span<const std::string> fragments, const std::string& title) {
  std::string out =
      "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>" + html_escape(title) +
      "</title>\n<style>.doc{font-family:monospace;margin:4px 0;line-height:1.8}"
      ".doc span{padding:1px 2px}</style>\n</head>\n<body>\n";
  for (const auto& f : fragments) out += f;
  out += "</body>\n</html>\n";
  return out;
}

void write_attention_dump(std::ostream& out, std::span<const ModelAttentionMap> maps) {
  for (const auto& m : maps) {
    for (std::size_t i = 0; i < m.tokens.size() && i < m.weights.size(); ++i) {
      out << m.doc_id << '\t' << m.tokens[i] << '\t' << format_double(m.weights[i]) << '\n';
    }
  }
}

}  // namespace redaff
