// SPDX-License-Identifier: Apache-2.0
#include "redaff/context.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace redaff {

namespace {

constexpr double kLayerNormEps = 1e-5;

std::string pair_key(const std::string& a, const std::string& b) { return a + '\x1f' + b; }

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

// Applies merges in rank order to one symbol sequence.
void apply_merges(std::vector<std::string>& symbols,
                  const std::unordered_map<std::string, std::size_t>& rank) {
  while (symbols.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const auto it = rank.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != rank.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) return;
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size()) {
        const auto it = rank.find(pair_key(symbols[i], symbols[i + 1]));
        if (it != rank.end() && it->second == best_rank) {
          merged.push_back(symbols[i] + symbols[i + 1]);
          ++i;
          continue;
        }
      }
      merged.push_back(symbols[i]);
    }
    symbols = std::move(merged);
  }
}

}  // namespace

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    len = std::min(len, s.size() - i);
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

// ---- SubwordTokenizer ----

SubwordTokenizer::SubwordTokenizer(std::vector<Merge> merges, std::vector<std::string> alphabet,
                                   std::size_t max_length)
    : merges_(std::move(merges)), max_length_(max_length) {
  if (max_length_ < 2) {
    throw UsageError("tokenizer max_length must be at least 2");
  }
  std::set<std::string> chars(alphabet.begin(), alphabet.end());
  chars.insert(std::string(kBoundary));
  for (const auto& [a, b] : merges_) {
    for (const auto& part : {a, b}) {
      for (auto& c : utf8_chars(part)) chars.insert(std::move(c));
    }
  }
  alphabet_.assign(chars.begin(), chars.end());
  vocab_ = {"<pad>", "<unk>", "<cls>"};
  for (const auto& c : alphabet_) vocab_.push_back(c);
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto& [a, b] = merges_[r];
    rank_.emplace(pair_key(a, b), r);
    vocab_.push_back(a + b);
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    ids_.emplace(vocab_[i], static_cast<int>(i));  // first occurrence wins
  }
}

SubwordTokenizer SubwordTokenizer::train(std::span<const std::string> texts,
                                         std::size_t num_merges, std::size_t max_length) {
  std::map<std::string, std::size_t> word_freq;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) ++word_freq[std::move(w)];
  }
  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  std::set<std::string> alphabet;
  for (const auto& [w, f] : word_freq) {
    std::vector<std::string> symbols{std::string(kBoundary)};
    for (auto& c : utf8_chars(w)) {
      alphabet.insert(c);
      symbols.push_back(std::move(c));
    }
    words.emplace_back(std::move(symbols), f);
  }
  std::vector<Merge> merges;
  std::unordered_map<std::string, std::size_t> rank;
  for (std::size_t m = 0; m < num_merges; ++m) {
    std::map<Merge, std::size_t> counts;
    for (const auto& [symbols, f] : words) {
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) counts[{symbols[i], symbols[i + 1]}] += f;
    }
    const Merge* best = nullptr;
    std::size_t best_count = 1;  // a merge must occur at least twice
    for (const auto& [pair, c] : counts) {
      if (c > best_count) {
        best = &pair;
        best_count = c;
      }
    }
    if (best == nullptr) break;
    merges.push_back(*best);
    std::unordered_map<std::string, std::size_t> single{{pair_key(best->first, best->second), 0}};
    for (auto& [symbols, f] : words) apply_merges(symbols, single);
  }
  return SubwordTokenizer(std::move(merges),
                          std::vector<std::string>(alphabet.begin(), alphabet.end()), max_length);
}

std::vector<std::string> SubwordTokenizer::word_pieces(std::string_view word) const {
  std::vector<std::string> symbols{std::string(kBoundary)};
  for (auto& c : utf8_chars(word)) symbols.push_back(std::move(c));
  apply_merges(symbols, rank_);
  return symbols;
}

std::vector<std::string> SubwordTokenizer::pieces(std::string_view text) const {
  std::vector<std::string> out;
  for (const auto& w : split_words(text)) {
    for (auto& p : word_pieces(w)) out.push_back(std::move(p));
  }
  return out;
}

std::vector<int> SubwordTokenizer::encode(std::string_view text) const {
  const auto ps = pieces(text);
  if (ps.empty()) {
    throw DataError("tokenize_subwords: empty text");
  }
  std::vector<int> ids{kCls};
  for (const auto& p : ps) {
    if (ids.size() >= max_length_) break;
    const auto it = ids_.find(p);
    ids.push_back(it != ids_.end() ? it->second : kUnk);
  }
  return ids;
}

std::string SubwordTokenizer::decode(std::span<const int> ids) const {
  std::string joined;
  for (int id : ids) {
    if (id == kPad || id == kCls) continue;
    joined += id == kUnk ? std::string("?") : piece(id);
  }
  std::string out;
  std::size_t pos = 0;
  while (pos < joined.size()) {
    if (joined.compare(pos, kBoundary.size(), kBoundary) == 0) {
      out.push_back(' ');
      pos += kBoundary.size();
    } else {
      out.push_back(joined[pos++]);
    }
  }
  return trim(out);
}

int SubwordTokenizer::id_of(const std::string& p) const {
  const auto it = ids_.find(p);
  return it == ids_.end() ? kUnk : it->second;
}

void SubwordTokenizer::save(std::ostream& out) const {
  out << "max_length=" << max_length_ << "\n";
  out << "alphabet";
  for (const auto& c : alphabet_) out << ' ' << c;
  out << "\n";
  for (const auto& [a, b] : merges_) out << a << ' ' << b << "\n";
}

SubwordTokenizer SubwordTokenizer::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("max_length=", 0) != 0) {
    throw DataError("tokenizer file: missing max_length header");
  }
  const std::size_t max_length = std::stoul(line.substr(11));
  if (!std::getline(in, line) || line.rfind("alphabet", 0) != 0) {
    throw DataError("tokenizer file: missing alphabet line");
  }
  std::vector<std::string> alphabet = split_words(line.substr(8));
  std::vector<Merge> merges;
  while (std::getline(in, line)) {
    const auto parts = split_words(line);
    if (parts.empty()) continue;
    if (parts.size() != 2) throw DataError("tokenizer file: bad merge line '" + line + "'");
    merges.emplace_back(parts[0], parts[1]);
  }
  return SubwordTokenizer(std::move(merges), std::move(alphabet), max_length);
}

// ---- ToyTransformerParams ----

ToyTransformerParams ToyTransformerParams::zeros(const EncoderDims& d) {
  if (d.vocab < 1 || d.model_dim < 1 || d.heads < 1 || d.model_dim % d.heads != 0) {
    throw UsageError("encoder: model_dim must be a positive multiple of heads");
  }
  ToyTransformerParams p;
  p.heads = d.heads;
  p.token_embedding = Matrix::Zero(d.vocab, d.model_dim);
  p.position_embedding = Matrix::Zero(d.max_positions, d.model_dim);
  for (Eigen::Index l = 0; l < d.layers; ++l) {
    EncoderLayer L;
    L.Wq = L.Wk = L.Wv = L.Wo = Matrix::Zero(d.model_dim, d.model_dim);
    L.bo = Vector::Zero(d.model_dim);
    L.ln1_gain = Vector::Ones(d.model_dim);
    L.ln1_bias = Vector::Zero(d.model_dim);
    L.W1 = Matrix::Zero(d.ffn_dim, d.model_dim);
    L.b1 = Vector::Zero(d.ffn_dim);
    L.W2 = Matrix::Zero(d.model_dim, d.ffn_dim);
    L.b2 = Vector::Zero(d.model_dim);
    L.ln2_gain = Vector::Ones(d.model_dim);
    L.ln2_bias = Vector::Zero(d.model_dim);
    p.layers.push_back(std::move(L));
  }
  p.Wp = Matrix::Zero(d.output_dim, d.model_dim);
  p.bp = Vector::Zero(d.output_dim);
  return p;
}

ToyTransformerParams ToyTransformerParams::gradient_buffer(const EncoderDims& d) {
  ToyTransformerParams p = zeros(d);
  for (auto& t : p.tensors()) std::fill(t.data, t.data + t.size(), 0.0);
  return p;
}

ToyTransformerParams ToyTransformerParams::random(const EncoderDims& d, Rng& rng) {
  ToyTransformerParams p = zeros(d);
  init_uniform(p.token_embedding, d.model_dim, rng);
  init_uniform(p.position_embedding, d.model_dim, rng);
  for (auto& L : p.layers) {
    for (Matrix* m : {&L.Wq, &L.Wk, &L.Wv, &L.Wo}) init_uniform(*m, d.model_dim, rng);
    init_uniform(L.bo, d.model_dim, rng);
    init_uniform(L.W1, d.model_dim, rng);
    init_uniform(L.b1, d.model_dim, rng);
    init_uniform(L.W2, d.ffn_dim, rng);
    init_uniform(L.b2, d.ffn_dim, rng);
  }
  init_uniform(p.Wp, d.model_dim, rng);
  init_uniform(p.bp, d.model_dim, rng);
  return p;
}

EncoderDims ToyTransformerParams::dims() const {
  EncoderDims d;
  d.vocab = token_embedding.rows();
  d.model_dim = token_embedding.cols();
  d.heads = heads;
  d.layers = static_cast<Eigen::Index>(layers.size());
  d.ffn_dim = layers.empty() ? 0 : layers.front().W1.rows();
  d.max_positions = position_embedding.rows();
  d.output_dim = Wp.rows();
  return d;
}

std::vector<TensorRef> ToyTransformerParams::tensors() {
  std::vector<TensorRef> t{tensor_ref("enc.token_embedding", token_embedding),
                           tensor_ref("enc.position_embedding", position_embedding)};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string pre = "enc.layer" + std::to_string(l) + ".";
    auto& L = layers[l];
    t.push_back(tensor_ref(pre + "Wq", L.Wq));
    t.push_back(tensor_ref(pre + "Wk", L.Wk));
    t.push_back(tensor_ref(pre + "Wv", L.Wv));
    t.push_back(tensor_ref(pre + "Wo", L.Wo));
    t.push_back(tensor_ref(pre + "bo", L.bo));
    t.push_back(tensor_ref(pre + "ln1_gain", L.ln1_gain));
    t.push_back(tensor_ref(pre + "ln1_bias", L.ln1_bias));
    t.push_back(tensor_ref(pre + "W1", L.W1));
    t.push_back(tensor_ref(pre + "b1", L.b1));
    t.push_back(tensor_ref(pre + "W2", L.W2));
    t.push_back(tensor_ref(pre + "b2", L.b2));
    t.push_back(tensor_ref(pre + "ln2_gain", L.ln2_gain));
    t.push_back(tensor_ref(pre + "ln2_bias", L.ln2_bias));
  }
  t.push_back(tensor_ref("enc.Wp", Wp));
  t.push_back(tensor_ref("enc.bp", bp));
  return t;
}

// ---- encoder forward/backward ----

namespace {

Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias, Matrix& xhat,
                  Vector& inv_std) {
  const Eigen::Index m = x.rows();
  xhat.resize(x.rows(), x.cols());
  inv_std.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mu) * inv_std(i);
  }
  return (xhat.array().rowwise() * gain.transpose().array()).rowwise() + bias.transpose().array();
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Vector& inv_std,
                           const Vector& gain, Vector& dgain, Vector& dbias) {
  dgain += (dy.array() * xhat.array()).colwise().sum().transpose().matrix();
  dbias += dy.colwise().sum().transpose();
  const Matrix dxhat = dy.array().rowwise() * gain.transpose().array();
  Matrix dx(dy.rows(), dy.cols());
  const double D = static_cast<double>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / D;
    const double mean_dx = dxhat.row(i).dot(xhat.row(i)) / D;
    dx.row(i) = inv_std(i) * (dxhat.row(i).array() - mean_d - xhat.row(i).array() * mean_dx);
  }
  return dx;
}

void softmax_rows(Matrix& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp();
    s.row(i) /= s.row(i).sum();
  }
}

}  // namespace

EncoderForward encode(std::span<const int> ids, const ToyTransformerParams& params) {
  const EncoderDims d = params.dims();
  const auto m = static_cast<Eigen::Index>(ids.size());
  if (m == 0) {
    throw DataError("encode: empty token sequence");
  }
  if (m > d.max_positions) {
    throw DataError("encode: sequence length " + std::to_string(m) + " exceeds " +
                    std::to_string(d.max_positions) + " positions");
  }
  EncoderForward f;
  f.ids.assign(ids.begin(), ids.end());
  Matrix x(m, d.model_dim);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= d.vocab) {
      throw DataError("encode: token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(d.vocab));
    }
    x.row(i) = params.token_embedding.row(id) + params.position_embedding.row(i);
  }
  const Eigen::Index dh = d.model_dim / d.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& L : params.layers) {
    EncoderLayerCache c;
    c.input = x;
    c.q = x * L.Wq.transpose();
    c.k = x * L.Wk.transpose();
    c.v = x * L.Wv.transpose();
    c.heads_out.resize(m, d.model_dim);
    for (Eigen::Index h = 0; h < d.heads; ++h) {
      Matrix a = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
      softmax_rows(a);
      c.heads_out.middleCols(h * dh, dh) = a * c.v.middleCols(h * dh, dh);
      c.attention.push_back(std::move(a));
    }
    const Matrix attn = (c.heads_out * L.Wo.transpose()).rowwise() + L.bo.transpose();
    c.x1 = layer_norm(x + attn, L.ln1_gain, L.ln1_bias, c.ln1_xhat, c.ln1_inv_std);
    c.ffn_pre = (c.x1 * L.W1.transpose()).rowwise() + L.b1.transpose();
    const Matrix ffn = (c.ffn_pre.cwiseMax(0.0) * L.W2.transpose()).rowwise() + L.b2.transpose();
    x = layer_norm(c.x1 + ffn, L.ln2_gain, L.ln2_bias, c.ln2_xhat, c.ln2_inv_std);
    f.layers.push_back(std::move(c));
  }
  f.final_states = x;
  f.output = (params.Wp * x.row(0).transpose() + params.bp).array().tanh();
  if (!f.output.allFinite()) {
    throw NumericalError("encode: non-finite output");
  }
  return f;
}

void encoder_backward(const Vector& grad_output, const EncoderForward& fwd,
                      const ToyTransformerParams& params, ToyTransformerParams& grads) {
  const EncoderDims d = params.dims();
  if (!(grads.dims() == d) || grad_output.size() != d.output_dim ||
      fwd.layers.size() != params.layers.size()) {
    throw DataError("encoder_backward: cache or gradient shape mismatch");
  }
  const Eigen::Index m = fwd.final_states.rows();
  const Vector d_pre = grad_output.cwiseProduct((1.0 - fwd.output.array().square()).matrix());
  grads.Wp.noalias() += d_pre * fwd.final_states.row(0);
  grads.bp += d_pre;
  Matrix dx = Matrix::Zero(m, d.model_dim);
  dx.row(0) = (params.Wp.transpose() * d_pre).transpose();

  const Eigen::Index dh = d.model_dim / d.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& L = params.layers[l];
    auto& G = grads.layers[l];
    const auto& c = fwd.layers[l];
    // x2 = LN2(x1 + ffn)
    const Matrix d_r2 =
        layer_norm_backward(dx, c.ln2_xhat, c.ln2_inv_std, L.ln2_gain, G.ln2_gain, G.ln2_bias);
    const Matrix relu = c.ffn_pre.cwiseMax(0.0);
    G.W2.noalias() += d_r2.transpose() * relu;
    G.b2 += d_r2.colwise().sum().transpose();
    const Matrix d_relu = (d_r2 * L.W2).cwiseProduct(
        (c.ffn_pre.array() > 0.0).cast<double>().matrix());
    G.W1.noalias() += d_relu.transpose() * c.x1;
    G.b1 += d_relu.colwise().sum().transpose();
    const Matrix d_x1 = d_r2 + d_relu * L.W1;
    // x1 = LN1(x + attn)
    const Matrix d_r1 =
        layer_norm_backward(d_x1, c.ln1_xhat, c.ln1_inv_std, L.ln1_gain, G.ln1_gain, G.ln1_bias);
    G.Wo.noalias() += d_r1.transpose() * c.heads_out;
    G.bo += d_r1.colwise().sum().transpose();
    const Matrix d_heads = d_r1 * L.Wo;
    Matrix dq(m, d.model_dim), dk(m, d.model_dim), dv(m, d.model_dim);
    for (Eigen::Index h = 0; h < d.heads; ++h) {
      const Matrix& a = c.attention[static_cast<std::size_t>(h)];
      const auto d_out = d_heads.middleCols(h * dh, dh);
      const Matrix d_a = d_out * c.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = a.transpose() * d_out;
      const Vector row_dot = (d_a.array() * a.array()).rowwise().sum();
      const Matrix d_s = (a.array() * (d_a.array().colwise() - row_dot.array())).matrix() * scale;
      dq.middleCols(h * dh, dh) = d_s * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = d_s.transpose() * c.q.middleCols(h * dh, dh);
    }
    G.Wq.noalias() += dq.transpose() * c.input;
    G.Wk.noalias() += dk.transpose() * c.input;
    G.Wv.noalias() += dv.transpose() * c.input;
    dx = d_r1 + dq * L.Wq + dk * L.Wk + dv * L.Wv;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    grads.token_embedding.row(fwd.ids[static_cast<std::size_t>(i)]) += dx.row(i);
    grads.position_embedding.row(i) += dx.row(i);
  }
}

// ---- precomputed vectors ----

PrecomputedVectors::PrecomputedVectors(Eigen::Index dim, std::vector<ContextVector> vectors)
    : dim_(dim), vectors_(std::move(vectors)) {
  if (dim_ < 1) {
    throw DataError("precomputed vectors: dimension must be positive");
  }
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (vectors_[i].values.size() != dim_) {
      throw DataError("precomputed vector '" + vectors_[i].doc_id + "' has dimension " +
                      std::to_string(vectors_[i].values.size()) + ", expected " +
                      std::to_string(dim_));
    }
    if (!vectors_[i].values.allFinite()) {
      throw DataError("precomputed vector '" + vectors_[i].doc_id + "' is not finite");
    }
    if (!index_.emplace(vectors_[i].doc_id, i).second) {
      throw DataError("duplicate precomputed vector id '" + vectors_[i].doc_id + "'");
    }
  }
}

const Vector* PrecomputedVectors::find(const std::string& doc_id) const {
  const auto it = index_.find(doc_id);
  return it == index_.end() ? nullptr : &vectors_[it->second].values;
}

std::vector<std::string> PrecomputedVectors::missing(std::span<const std::string> doc_ids) const {
  std::vector<std::string> out;
  for (const auto& id : doc_ids) {
    if (index_.count(id) == 0) out.push_back(id);
  }
  return out;
}

void write_precomputed(std::ostream& out, const PrecomputedVectors& vectors) {
  out << "dim=" << vectors.dim() << "\n";
  for (const auto& cv : vectors.vectors()) {
    out << cv.doc_id << '\t';
    for (Eigen::Index j = 0; j < cv.values.size(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(cv.values(j));
    }
    out << '\n';
  }
}

void save_precomputed(const std::string& path, const PrecomputedVectors& vectors) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_precomputed(out, vectors);
}

PrecomputedVectors read_precomputed(std::istream& in, Eigen::Index expected_dim) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("dim=", 0) != 0) {
    throw DataError("precomputed vectors: missing 'dim=<h>' header");
  }
  const long header_dim = std::stol(line.substr(4));
  if (header_dim != expected_dim) {
    throw DataError("precomputed vectors: header dim " + std::to_string(header_dim) +
                    " does not match expected " + std::to_string(expected_dim));
  }
  std::vector<ContextVector> vectors;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("precomputed vectors line " + std::to_string(lineno) + ": missing tab");
    }
    ContextVector cv;
    cv.doc_id = line.substr(0, tab);
    std::vector<double> vals;
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p >= end) break;
      double x = 0.0;
      const auto [next, ec] = std::from_chars(p, end, x);
      if (ec != std::errc()) {
        throw DataError("precomputed vectors line " + std::to_string(lineno) + ": bad number");
      }
      vals.push_back(x);
      p = next;
    }
    if (static_cast<Eigen::Index>(vals.size()) != expected_dim) {
      throw DataError("precomputed vectors line " + std::to_string(lineno) + ": " +
                      std::to_string(vals.size()) + " values, expected " +
                      std::to_string(expected_dim));
    }
    cv.values = Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    vectors.push_back(std::move(cv));
  }
  return PrecomputedVectors(expected_dim, std::move(vectors));
}

PrecomputedVectors load_precomputed(const std::string& path, Eigen::Index expected_dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open precomputed vectors '" + path + "'");
  return read_precomputed(in, expected_dim);
}

}  // namespace redaff
