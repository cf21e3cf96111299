// SPDX-License-Identifier: Apache-2.0
#include "redaff/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace redaff {

// ---- EmbeddingTable ----

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, Matrix vectors,
                               EmbeddingVariant variant)
    : words_(std::move(words)), vectors_(std::move(vectors)), variant_(variant) {
  if (words_.empty()) {
    throw DataError("embedding table is empty");
  }
  if (static_cast<Eigen::Index>(words_.size()) != vectors_.rows() || vectors_.cols() < 1) {
    throw DataError("embedding table shape does not match vocabulary");
  }
  if (!vectors_.allFinite()) {
    throw DataError("embedding table contains NaN or Inf");
  }
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second) {
      throw DataError("duplicate word '" + words_[i] + "' in embedding table");
    }
  }
}

std::optional<std::size_t> EmbeddingTable::index_of(const std::string& word) const {
  const auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vector EmbeddingTable::vector(const std::string& word) const {
  const auto idx = index_of(word);
  if (!idx) {
    throw DataError("'" + word + "' is not in the embedding vocabulary");
  }
  return vectors_.row(static_cast<Eigen::Index>(*idx)).transpose();
}

Matrix EmbeddingTable::embed(std::span<const std::string> tokens) const {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(tokens.size()), dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (const auto idx = index_of(tokens[i])) {
      out.row(static_cast<Eigen::Index>(i)) = vectors_.row(static_cast<Eigen::Index>(*idx));
    }
  }
  return out;
}

EmbeddingTable EmbeddingTable::normalized() const {
  Matrix v = vectors_;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double n = v.row(i).norm();
    if (n > 0.0) {
      v.row(i) /= n;
    }
  }
  return EmbeddingTable(words_, std::move(v), variant_);
}

// ---- vector files ----

LoadEmbeddingsResult read_embeddings(std::istream& in, Eigen::Index dim, EmbeddingVariant variant) {
  if (dim < 1) {
    throw UsageError("embedding dimension must be positive");
  }
  std::vector<std::string> words;
  std::vector<double> values;
  std::set<std::string> seen;
  std::size_t lines = 0;
  std::size_t skipped = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++lines;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(dim));
    std::string tok;
    bool ok = true;
    while (fields >> tok) {
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(x)) {
        ok = false;
        break;
      }
      row.push_back(x);
    }
    if (!ok || static_cast<Eigen::Index>(row.size()) != dim || !seen.insert(word).second) {
      ++skipped;
      continue;
    }
    words.push_back(word);
    values.insert(values.end(), row.begin(), row.end());
  }
  if (lines == 0) {
    throw DataError("embedding file is empty");
  }
  if (2 * skipped > lines) {
    throw DataError("embedding file: " + std::to_string(skipped) + " of " + std::to_string(lines) +
                    " lines do not match dimension " + std::to_string(dim));
  }
  Matrix m(static_cast<Eigen::Index>(words.size()), dim);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      m(i, j) = values[static_cast<std::size_t>(i * dim + j)];
    }
  }
  return {EmbeddingTable(std::move(words), std::move(m), variant), skipped};
}

LoadEmbeddingsResult load_embeddings(const std::string& path, Eigen::Index dim,
                                     EmbeddingVariant variant) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open embedding file '" + path + "'");
  }
  return read_embeddings(in, dim, variant);
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  const Matrix& v = table.vectors();
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.words()[i];
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      out << ' ' << format_double(v(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
}

void save_embeddings(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write embedding file '" + path + "'");
  }
  write_embeddings(out, table);
}

// ---- lexicon ----

Lexicon read_lexicon(std::istream& in) {
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || line.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 1 + kNumEmotions) {
      throw DataError("lexicon line " + std::to_string(lineno) + ": expected word and 5 scores");
    }
    EmotionScores scores{};
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      const std::string f = trim(fields[k + 1]);
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), scores[k]);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw DataError("lexicon line " + std::to_string(lineno) + ": bad score '" + f + "'");
      }
    }
    lex[trim(fields[0])] = scores;
  }
  return lex;
}

Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open lexicon '" + path + "'");
  }
  return read_lexicon(in);
}

void write_lexicon(std::ostream& out, const Lexicon& lexicon) {
  for (const auto& [word, scores] : lexicon) {
    out << word;
    for (double s : scores) {
      out << '\t' << format_double(s);
    }
    out << '\n';
  }
}

std::map<std::string, Emotion> assign_classes(const Lexicon& lexicon, double threshold) {
  std::map<std::string, Emotion> classes;
  for (const auto& [word, scores] : lexicon) {
    const std::size_t best = argmax_lowest(scores);
    if (scores[best] > threshold) {
      classes[word] = static_cast<Emotion>(best);
    }
  }
  return classes;
}

ContradictionMap ContradictionMap::valence_split() {
  ContradictionMap m;
  const auto joy = static_cast<std::size_t>(Emotion::joy);
  for (auto e : {Emotion::anger, Emotion::fear, Emotion::sadness}) {
    const auto k = static_cast<std::size_t>(e);
    m.opposed[joy][k] = true;
    m.opposed[k][joy] = true;
  }
  return m;
}

namespace {

std::vector<WordPair> subsample(std::vector<WordPair> pairs, std::size_t max_pairs, Rng& rng) {
  if (max_pairs == 0 || pairs.size() <= max_pairs) {
    return pairs;
  }
  rng.shuffle(pairs);
  pairs.resize(max_pairs);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

}  // namespace

EmotionConstraintSet build_constraints(const Lexicon& lexicon, const ConstraintOptions& opts) {
  const auto classes = assign_classes(lexicon, opts.threshold);
  if (classes.empty()) {
    throw DataError("build_constraints: no lexicon word passes threshold " +
                    format_double(opts.threshold));
  }
  std::vector<std::pair<std::string, Emotion>> words(classes.begin(), classes.end());
  std::vector<WordPair> attract;
  std::vector<WordPair> repel;
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      if (words[i].second == words[j].second) {
        attract.emplace_back(words[i].first, words[j].first);
      } else if (opts.contradictions.contradicts(words[i].second, words[j].second)) {
        repel.emplace_back(words[i].first, words[j].first);
      }
    }
  }
  Rng rng(opts.seed);
  EmotionConstraintSet out;
  out.attract = subsample(std::move(attract), opts.max_pairs, rng);
  out.repel = subsample(std::move(repel), opts.max_pairs, rng);
  out.source = opts.source;
  return out;
}

EmotionConstraintSet restrict_to_vocabulary(EmotionConstraintSet constraints,
                                            const EmbeddingTable& table) {
  auto keep = [&](std::vector<WordPair>& pairs) {
    const auto before = pairs.size();
    std::erase_if(pairs, [&](const WordPair& p) {
      return !table.contains(p.first) || !table.contains(p.second);
    });
    constraints.dropped_oov += before - pairs.size();
  };
  keep(constraints.attract);
  keep(constraints.repel);
  return constraints;
}

EmotionConstraintSet read_constraints(std::istream& in) {
  EmotionConstraintSet out;
  std::set<WordPair> attract_seen;
  std::set<WordPair> repel_seen;
  std::string line;
  std::size_t lineno = 0;
  auto canonical = [](WordPair p) {
    if (p.second < p.first) std::swap(p.first, p.second);
    return p;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 3) {
      throw DataError("constraint line " + std::to_string(lineno) + ": expected 3 fields");
    }
    WordPair p{trim(f[0]), trim(f[1])};
    const std::string kind = trim(f[2]);
    if (kind == "attract") {
      if (attract_seen.insert(canonical(p)).second) out.attract.push_back(p);
    } else if (kind == "repel") {
      if (repel_seen.insert(canonical(p)).second) out.repel.push_back(p);
    } else {
      throw DataError("constraint line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
    }
  }
  for (const auto& p : attract_seen) {
    if (repel_seen.count(p) != 0) {
      throw DataError("pair (" + p.first + ", " + p.second + ") is both attract and repel");
    }
  }
  return out;
}

void write_constraints(std::ostream& out, const EmotionConstraintSet& c) {
  for (const auto& [a, b] : c.attract) out << a << '\t' << b << "\tattract\n";
  for (const auto& [a, b] : c.repel) out << a << '\t' << b << "\trepel\n";
}

// ---- counter-fitting ----

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

using IndexPairs = std::vector<std::pair<std::size_t, std::size_t>>;

IndexPairs to_indices(const std::vector<WordPair>& pairs, const EmbeddingTable& table) {
  IndexPairs out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    out.emplace_back(*table.index_of(a), *table.index_of(b));
  }
  return out;
}

double row_cosine(const Matrix& w, std::size_t i, std::size_t j) {
  const auto a = w.row(static_cast<Eigen::Index>(i));
  const auto b = w.row(static_cast<Eigen::Index>(j));
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

// Accumulates sign * d cos(w_i, w_j) into grad rows i and j.
void add_cosine_gradient(const Matrix& w, std::size_t i, std::size_t j, double sign, Matrix& grad) {
  const auto ii = static_cast<Eigen::Index>(i);
  const auto jj = static_cast<Eigen::Index>(j);
  const double ni = w.row(ii).norm();
  const double nj = w.row(jj).norm();
  if (ni == 0.0 || nj == 0.0) return;
  const double c = w.row(ii).dot(w.row(jj)) / (ni * nj);
  grad.row(ii) += sign * (w.row(jj) / (ni * nj) - c * w.row(ii) / (ni * ni));
  grad.row(jj) += sign * (w.row(ii) / (ni * nj) - c * w.row(jj) / (nj * nj));
}

void normalize_rows(Matrix& w) {
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const double n = w.row(i).norm();
    if (n > 0.0) w.row(i) /= n;
  }
}

}  // namespace

double counterfit_objective(const Matrix& vectors, const Matrix& original, const IndexPairs& attract,
                            const IndexPairs& repel, const CounterfitOptions& opts) {
  double loss = 0.0;
  for (const auto& [i, j] : attract) {
    loss += std::max(0.0, opts.attract_margin - row_cosine(vectors, i, j));
  }
  for (const auto& [i, j] : repel) {
    loss += std::max(0.0, row_cosine(vectors, i, j) - opts.repel_margin);
  }
  loss += opts.preserve_weight * (vectors - original).squaredNorm();
  return loss;
}

CounterfitResult counterfit(const EmbeddingTable& table, const EmotionConstraintSet& constraints,
                            const CounterfitOptions& opts) {
  if (table.variant() != EmbeddingVariant::original) {
    throw UsageError("counterfit expects an original-variant table");
  }
  if (opts.epochs < 1) {
    throw UsageError("counterfit needs at least one epoch");
  }
  if (!(opts.lr > 0.0) || opts.preserve_weight < 0.0) {
    throw UsageError("counterfit: lr must be positive and preserve_weight nonnegative");
  }
  const auto restricted = restrict_to_vocabulary(constraints, table);
  const Matrix original = table.normalized().vectors();
  Matrix w = original;
  std::vector<std::string> warnings;
  if (restricted.dropped_oov > 0) {
    warnings.push_back(std::to_string(restricted.dropped_oov) +
                       " constraint pairs dropped (out of vocabulary)");
  }
  if (restricted.empty()) {
    warnings.push_back("empty constraint set; returning normalized input unchanged");
    return {EmbeddingTable(table.words(), w, EmbeddingVariant::counterfitted), {}, 0.0, warnings};
  }

  const IndexPairs attract = to_indices(restricted.attract, table);
  const IndexPairs repel = to_indices(restricted.repel, table);

  // Repel pairs of identical vectors have no descent direction.
  Rng rng(opts.seed);
  std::set<std::size_t> jittered;
  for (const auto& [i, j] : repel) {
    if (row_cosine(w, i, j) > 1.0 - 1e-12) {
      jittered.insert(i);
      jittered.insert(j);
    }
  }
  for (std::size_t i : jittered) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      w(ii, k) += opts.jitter * rng.uniform(-1.0, 1.0);
    }
    w.row(ii).normalize();
  }

  CounterfitResult result{EmbeddingTable(table.words(), w, EmbeddingVariant::counterfitted), {},
                          counterfit_objective(w, original, attract, repel, opts), warnings};
  const double shrink = 1.0 / (1.0 + 2.0 * opts.lr * opts.preserve_weight);
  Matrix grad(w.rows(), w.cols());
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    grad.setZero();
    for (const auto& [i, j] : attract) {
      if (row_cosine(w, i, j) < opts.attract_margin) add_cosine_gradient(w, i, j, -1.0, grad);
    }
    for (const auto& [i, j] : repel) {
      if (row_cosine(w, i, j) > opts.repel_margin) add_cosine_gradient(w, i, j, 1.0, grad);
    }
    // Gradient step on the hinge terms, then the exact proximal map of
    // preserve_weight * |w - original|^2.
    w = ((w - opts.lr * grad) + (2.0 * opts.lr * opts.preserve_weight) * original) * shrink;
    normalize_rows(w);
    const double loss = counterfit_objective(w, original, attract, repel, opts);
    if (!std::isfinite(loss) || !w.allFinite()) {
      throw NumericalError("counterfit: non-finite loss at epoch " + std::to_string(epoch + 1));
    }
    result.loss_trace.push_back(loss);
  }
  result.table = EmbeddingTable(table.words(), std::move(w), EmbeddingVariant::counterfitted);
  return result;
}

CohesionReport cohesion_report(const EmbeddingTable& table,
                               const std::map<std::string, Emotion>& classes,
                               const ContradictionMap& contradictions) {
  std::vector<std::pair<std::size_t, Emotion>> members;
  std::array<std::size_t, kNumEmotions> per_class{};
  for (const auto& [word, cls] : classes) {
    if (const auto idx = table.index_of(word)) {
      members.emplace_back(*idx, cls);
      ++per_class[static_cast<std::size_t>(cls)];
    }
  }
  const auto populated =
      std::count_if(per_class.begin(), per_class.end(), [](std::size_t n) { return n >= 2; });
  if (populated < 2) {
    throw DataError("cohesion_report: need at least 2 classes with 2 in-vocabulary words each");
  }
  const Matrix& v = table.vectors();
  CohesionReport r;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      const double c = row_cosine(v, members[a].first, members[b].first);
      if (members[a].second == members[b].second) {
        r.within_class += c;
        ++r.within_pairs;
      } else if (contradictions.contradicts(members[a].second, members[b].second)) {
        r.cross_class += c;
        ++r.cross_pairs;
      }
    }
  }
  if (r.cross_pairs == 0) {
    throw DataError("cohesion_report: no contradictory-class pairs in vocabulary");
  }
  r.within_class /= static_cast<double>(r.within_pairs);
  r.cross_class /= static_cast<double>(r.cross_pairs);
  return r;
}

}  // namespace redaff
