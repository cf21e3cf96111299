// SPDX-License-Identifier: Apache-2.0
#include "redaff/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace redaff {

namespace {

using nlohmann::json;

bool is_sweep(const std::string& key, const json& value) {
  if (!value.is_array()) return false;
  if (key == "seeds") return false;
  if (key == "head_widths") return !value.empty() && value.front().is_array();
  return true;
}

EmbeddingVariant variant_from_name(const std::string& s) {
  if (s == "original") return EmbeddingVariant::original;
  if (s == "counterfitted") return EmbeddingVariant::counterfitted;
  throw UsageError("unknown embedding variant '" + s + "' (original | counterfitted)");
}

void apply_key(ExperimentConfig& c, const std::string& key, const json& v) {
  auto& m = c.model;
  if (key == "name") c.name = v.get<std::string>();
  else if (key == "corpus") c.corpus = v.get<std::string>();
  else if (key == "embeddings") {
    if (v.is_object()) {
      c.embeddings_by_variant = v.get<std::map<std::string, std::string>>();
    } else {
      c.embeddings = v.get<std::string>();
    }
  }
  else if (key == "variant") c.variant = variant_from_name(v.get<std::string>());
  else if (key == "mode") {
    const auto mode = mode_from_name(v.get<std::string>());
    if (!mode) throw UsageError("unknown mode '" + v.get<std::string>() + "'");
    m.mode = *mode;
  }
  else if (key == "encoder") apply_encoder_spec(c, v.get<std::string>());
  else if (key == "tokenizer_merges") c.tokenizer_merges = v.get<std::size_t>();
  else if (key == "embedding_dim") m.affect.input_dim = v.get<Eigen::Index>();
  else if (key == "hidden") m.affect.hidden = v.get<Eigen::Index>();
  else if (key == "attention") m.affect.attention = v.get<Eigen::Index>();
  else if (key == "model_dim") m.encoder.model_dim = v.get<Eigen::Index>();
  else if (key == "heads") m.encoder.heads = v.get<Eigen::Index>();
  else if (key == "layers") m.encoder.layers = v.get<Eigen::Index>();
  else if (key == "ffn_dim") m.encoder.ffn_dim = v.get<Eigen::Index>();
  else if (key == "max_positions") m.encoder.max_positions = v.get<Eigen::Index>();
  else if (key == "output_dim") m.encoder.output_dim = v.get<Eigen::Index>();
  else if (key == "precomputed_dim") m.precomputed_dim = v.get<Eigen::Index>();
  else if (key == "head_widths") m.head_widths = v.get<std::vector<Eigen::Index>>();
  else if (key == "dropout") m.dropout = v.get<double>();
  else if (key == "l2") m.l2 = v.get<double>();
  else if (key == "max_tokens") m.max_tokens = v.get<std::size_t>();
  else if (key == "lr") c.train.lr = v.get<double>();
  else if (key == "batch_size") c.train.batch_size = v.get<std::size_t>();
  else if (key == "epochs") c.train.epochs = v.get<int>();
  else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
  else if (key == "out") c.out = v.get<std::string>();
  else throw UsageError("unknown config key '" + key + "'");
}

std::string value_label(const json& v) {
  if (v.is_string()) {
    auto s = v.get<std::string>();
    const auto slash = s.find_last_of('/');
    if (slash != std::string::npos) s = s.substr(slash + 1);
    return s;
  }
  std::string s = v.dump();
  std::erase_if(s, [](char ch) { return ch == '[' || ch == ']' || ch == '"'; });
  std::replace(s.begin(), s.end(), ',', 'x');
  return s;
}

}  // namespace

void apply_encoder_spec(ExperimentConfig& config, const std::string& spec) {
  if (spec == "toy") {
    config.model.context_source = ContextSource::toy;
  } else if (spec.rfind("precomputed:", 0) == 0 && spec.size() > 12) {
    config.model.context_source = ContextSource::precomputed;
  } else {
    throw UsageError("encoder must be 'toy' or 'precomputed:<path>', got '" + spec + "'");
  }
  config.encoder = spec;
}

std::string precomputed_path(const std::string& encoder_spec) {
  if (encoder_spec.rfind("precomputed:", 0) != 0) return {};
  return encoder_spec.substr(12);
}

std::vector<ExperimentConfig> parse_experiment_configs(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw UsageError("config must be a JSON object");

  std::vector<std::string> sweep_keys;
  for (const auto& [k, v] : root.items()) {
    if (is_sweep(k, v)) {
      if (v.empty()) throw UsageError("sweep '" + k + "' has no values");
      sweep_keys.push_back(k);
    }
  }
  std::vector<std::size_t> choice(sweep_keys.size(), 0);
  std::vector<ExperimentConfig> out;
  while (true) {
    ExperimentConfig c;
    std::string suffix;
    try {
      for (const auto& [k, v] : root.items()) {
        const auto sw = std::find(sweep_keys.begin(), sweep_keys.end(), k);
        if (sw == sweep_keys.end()) {
          apply_key(c, k, v);
        } else {
          const auto& pick = v[choice[static_cast<std::size_t>(sw - sweep_keys.begin())]];
          apply_key(c, k, pick);
          suffix += "-" + k + "=" + value_label(pick);
        }
      }
    } catch (const json::exception& e) {
      throw UsageError(std::string("bad config value: ") + e.what());
    }
    c.name += suffix;
    if (!c.embeddings_by_variant.empty()) {
      const std::string key = c.variant == EmbeddingVariant::original ? "original" : "counterfitted";
      const auto it = c.embeddings_by_variant.find(key);
      if (it == c.embeddings_by_variant.end()) {
        throw UsageError("config 'embeddings' has no entry for variant '" + key + "'");
      }
      c.embeddings = it->second;
    }
    if (c.seeds.empty()) throw UsageError("config needs at least one seed");
    if (c.train.epochs < 0) throw UsageError("epochs must be nonnegative");
    if (c.model.max_tokens < 1) throw UsageError("max_tokens must be positive");
    out.push_back(std::move(c));

    std::size_t k = sweep_keys.size();
    while (k > 0) {
      --k;
      if (++choice[k] < root[sweep_keys[k]].size()) break;
      choice[k] = 0;
      if (k == 0) return out;
    }
    if (sweep_keys.empty()) return out;
  }
}

std::vector<ExperimentConfig> load_experiment_configs(const std::string& path) {
  namespace fs = std::filesystem;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto configs = parse_experiment_configs(ss.str());
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  for (auto& c : configs) {
    resolve(c.corpus);
    resolve(c.embeddings);
    resolve(c.out);
    if (c.model.context_source == ContextSource::precomputed) {
      auto p = precomputed_path(c.encoder);
      resolve(p);
      c.encoder = "precomputed:" + p;
    }
  }
  return configs;
}

std::string token_text(const Document& doc, std::size_t max_tokens) {
  std::string s;
  const std::size_t n = std::min(max_tokens, doc.tokens.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) s += ' ';
    s += doc.tokens[i];
  }
  return s;
}

Document truncated(const Document& doc, std::size_t max_tokens) {
  Document d = doc;
  if (d.tokens.size() > max_tokens) d.tokens.resize(max_tokens);
  if (d.surface.size() > max_tokens) d.surface.resize(max_tokens);
  return d;
}

SubwordTokenizer train_tokenizer(const LabeledCorpus& corpus, std::size_t merges,
                                 std::size_t max_length) {
  std::vector<std::string> texts;
  const auto idx = corpus.has_splits() ? corpus.indices(Split::train) : std::vector<std::size_t>{};
  if (corpus.has_splits()) {
    for (std::size_t i : idx) texts.push_back(token_text(corpus[i].doc, max_length));
  } else {
    for (const auto& e : corpus.entries()) texts.push_back(token_text(e.doc, max_length));
  }
  return SubwordTokenizer::train(texts, merges, max_length);
}

DocInput make_input(const LabeledEntry& entry, const ModelConfig& config,
                    const EmbeddingTable* embeddings, const SubwordTokenizer* tokenizer,
                    const PrecomputedVectors* context) {
  DocInput d;
  d.id = entry.doc.id;
  d.target = entry.profile;
  const std::size_t n = std::min(config.max_tokens, entry.doc.tokens.size());
  if (n == 0) throw DataError("document '" + d.id + "' has no tokens");
  if (config.uses_affect()) {
    if (embeddings == nullptr) throw UsageError("affect path needs an embedding table");
    if (embeddings->dim() != config.affect.input_dim) {
      throw DataError("embedding dimension " + std::to_string(embeddings->dim()) +
                      " does not match model input " + std::to_string(config.affect.input_dim));
    }
    d.embedded = embeddings->embed(std::span(entry.doc.tokens).first(n));
  }
  if (config.uses_encoder()) {
    if (tokenizer == nullptr) throw UsageError("toy encoder needs a tokenizer");
    d.subword_ids = tokenizer->encode(token_text(entry.doc, n));
  }
  if (config.uses_context() && config.context_source == ContextSource::precomputed) {
    if (context == nullptr) throw UsageError("precomputed encoder needs a vector file");
    d.context = context->find(d.id);
    if (d.context == nullptr) {
      throw DataError("no precomputed context vector for document '" + d.id + "'");
    }
  }
  return d;
}

DataBundle build_data(const LabeledCorpus& corpus, const ModelConfig& config,
                      const EmbeddingTable* embeddings, const SubwordTokenizer* tokenizer,
                      std::shared_ptr<const PrecomputedVectors> context, bool allow_missing) {
  if (!corpus.has_splits()) throw DataError("corpus has no split assignment");
  DataBundle b;
  b.context = std::move(context);
  std::set<std::string> skip;
  if (b.context && config.uses_context() && config.context_source == ContextSource::precomputed) {
    std::vector<std::string> ids;
    for (const auto& e : corpus.entries()) ids.push_back(e.doc.id);
    b.missing = b.context->missing(ids);
    if (!b.missing.empty() && !allow_missing) {
      std::string list;
      for (const auto& id : b.missing) list += (list.empty() ? "" : ", ") + id;
      throw DataError(std::to_string(b.missing.size()) +
                      " documents have no precomputed context vector: " + list);
    }
    skip.insert(b.missing.begin(), b.missing.end());
  }
  auto fill = [&](Split s, std::vector<std::size_t>& kept, std::vector<DocInput>& out) {
    for (std::size_t i : corpus.indices(s)) {
      if (skip.count(corpus[i].doc.id)) continue;
      kept.push_back(i);
      out.push_back(make_input(corpus[i], config, embeddings, tokenizer, b.context.get()));
    }
  };
  fill(Split::train, b.train_idx, b.train);
  fill(Split::val, b.val_idx, b.val);
  fill(Split::test, b.test_idx, b.test);
  return b;
}

std::vector<EvalPair> eval_pairs(const Model& model, std::span<const DocInput> docs,
                                 std::size_t threads) {
  const auto preds = predict_all(model, docs, threads);
  std::vector<EvalPair> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) out.push_back({preds[i], docs[i].target, docs[i].id});
  return out;
}

double majority_baseline(std::span<const DocInput> train, std::span<const DocInput> eval) {
  if (train.empty() || eval.empty()) throw DataError("majority_baseline: empty split");
  std::array<double, kNumEmotions> counts{};
  for (const auto& d : train) counts[d.target.argmax()] += 1.0;
  const std::size_t majority = argmax_lowest(counts);
  double hits = 0.0;
  for (const auto& d : eval) hits += d.target.argmax() == majority ? 1.0 : 0.0;
  return hits / static_cast<double>(eval.size());
}

std::vector<ModelAttentionMap> attention_maps(const Model& model, const LabeledCorpus& corpus,
                                              std::span<const std::size_t> indices,
                                              std::span<const DocInput> docs) {
  if (!model.config.uses_affect()) {
    throw UsageError("no attention to audit: context-only model has no affect path");
  }
  if (indices.size() != docs.size()) throw DataError("attention_maps: index/doc count mismatch");
  std::vector<ModelAttentionMap> out;
  out.reserve(docs.size());
  for (std::size_t k = 0; k < docs.size(); ++k) {
    const auto f = affectnet_forward(docs[k].embedded, model.affect);
    ModelAttentionMap m;
    m.doc_id = docs[k].id;
    const auto& toks = corpus[indices[k]].doc.tokens;
    m.tokens.assign(toks.begin(), toks.begin() + docs[k].embedded.rows());
    m.weights.assign(f.out.weights.data(), f.out.weights.data() + f.out.weights.size());
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<MapPair> map_pairs(std::span<const ModelAttentionMap> maps, const LabeledCorpus& corpus,
                               std::span<const std::size_t> indices, std::size_t max_tokens,
                               const std::set<std::string>& emotion_word_set,
                               const EntityTagger& tagger, HamSupport support) {
  if (indices.size() != maps.size()) throw DataError("map_pairs: index/map count mismatch");
  std::vector<MapPair> out;
  out.reserve(maps.size());
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const auto doc = truncated(corpus[indices[k]].doc, max_tokens);
    auto eam = build_eam(doc, emotion_word_set, tagger);
    auto ham = build_ham(maps[k], eam, support);
    out.push_back({std::move(ham), std::move(eam)});
  }
  return out;
}

RunOutput run_training(const ExperimentConfig& config, std::uint64_t seed, const std::string& dir,
                       std::size_t threads, std::ostream* log) {
  namespace fs = std::filesystem;
  const LabeledCorpus corpus = load_corpus(config.corpus);
  ModelConfig mc = config.model;
  std::optional<EmbeddingTable> embeddings;
  if (mc.uses_affect()) {
    if (config.embeddings.empty()) throw UsageError("config '" + config.name + "' has no embeddings");
    embeddings = load_embeddings(config.embeddings, mc.affect.input_dim, config.variant).table;
  }
  std::optional<SubwordTokenizer> tokenizer;
  if (mc.uses_encoder()) {
    tokenizer = train_tokenizer(corpus, config.tokenizer_merges,
                                static_cast<std::size_t>(mc.encoder.max_positions));
    mc.encoder.vocab = static_cast<Eigen::Index>(tokenizer->vocab_size());
  }
  std::shared_ptr<const PrecomputedVectors> context;
  if (mc.uses_context() && mc.context_source == ContextSource::precomputed) {
    context = std::make_shared<const PrecomputedVectors>(
        load_precomputed(precomputed_path(config.encoder), mc.precomputed_dim));
  }
  const DataBundle data = build_data(corpus, mc, embeddings ? &*embeddings : nullptr,
                                     tokenizer ? &*tokenizer : nullptr, context,
                                     config.allow_missing);
  if (log && !data.missing.empty()) {
    *log << "warning: " << data.missing.size() << " documents dropped (no context vector)\n";
  }

  TrainConfig tc = config.train;
  tc.seed = seed;
  tc.threads = threads;
  const Model initial = Model::create(mc, derive_seed(seed, 0x1417));
  fs::create_directories(dir);
  std::ofstream trace(fs::path(dir) / "trace.tsv", std::ios::binary);
  trace << "epoch\ttrain_loss\tval_loss\n";
  auto result = train(initial, data.train, data.val, tc, [&](const EpochRecord& r) {
    trace << r.epoch << '\t' << format_double(r.train_loss) << '\t' << format_double(r.val_loss)
          << '\n';
    if (log) {
      *log << config.name << " seed " << seed << " epoch " << r.epoch << " train "
           << format_fixed(r.train_loss, 6) << " val " << format_fixed(r.val_loss, 6) << '\n';
    }
  });

  const std::string ckpt = (fs::path(dir) / "checkpoint").string();
  nlohmann::ordered_json extra;
  extra["name"] = config.name;
  extra["seed"] = seed;
  extra["corpus"] = config.corpus;
  extra["embeddings"] = config.embeddings;
  extra["variant"] = config.variant == EmbeddingVariant::original ? "original" : "counterfitted";
  extra["encoder"] = config.encoder;
  extra["best_epoch"] = result.best_epoch;
  save_checkpoint(ckpt, result.best_model, extra.dump());
  if (tokenizer) {
    std::ofstream tok(fs::path(ckpt) / "tokenizer.txt", std::ios::binary);
    tokenizer->save(tok);
  }

  RunOutput out;
  out.dir = dir;
  out.best_epoch = result.best_epoch;
  const auto pairs = eval_pairs(result.best_model, data.test, threads);
  out.test_report = evaluate(pairs);
  out.baseline_acc = majority_baseline(data.train, data.test);
  std::ofstream report(fs::path(dir) / "report.tsv", std::ios::binary);
  write_report_header(report);
  write_report_row(report, config.name + "/seed-" + std::to_string(seed), out.test_report);
  report << "# majority-baseline Acc@1(%)\t" << format_fixed(100.0 * out.baseline_acc, 2) << '\n';
  return out;
}

LoadedRun load_run(const std::string& checkpoint_dir, const std::string& corpus_override,
                   bool allow_missing) {
  namespace fs = std::filesystem;
  if (!fs::exists(fs::path(checkpoint_dir) / "manifest.json")) {
    throw DataError("missing checkpoint: " + checkpoint_dir);
  }
  Model model = load_checkpoint(checkpoint_dir);
  const auto extra = json::parse(checkpoint_extra(checkpoint_dir));
  auto get = [&](const char* key) {
    return extra.contains(key) ? extra.at(key).get<std::string>() : std::string();
  };
  const std::string corpus_path = corpus_override.empty() ? get("corpus") : corpus_override;
  if (corpus_path.empty()) throw DataError("checkpoint records no corpus; pass one explicitly");
  LabeledCorpus corpus = load_corpus(corpus_path);
  const ModelConfig& mc = model.config;
  std::optional<EmbeddingTable> embeddings;
  if (mc.uses_affect()) {
    const auto variant = get("variant") == "counterfitted" ? EmbeddingVariant::counterfitted
                                                           : EmbeddingVariant::original;
    embeddings = load_embeddings(get("embeddings"), mc.affect.input_dim, variant).table;
  }
  std::optional<SubwordTokenizer> tokenizer;
  if (mc.uses_encoder()) {
    std::ifstream in(fs::path(checkpoint_dir) / "tokenizer.txt");
    if (!in) throw DataError("checkpoint has no tokenizer.txt: " + checkpoint_dir);
    tokenizer = SubwordTokenizer::load(in);
  }
  std::shared_ptr<const PrecomputedVectors> context;
  if (mc.uses_context() && mc.context_source == ContextSource::precomputed) {
    context = std::make_shared<const PrecomputedVectors>(
        load_precomputed(precomputed_path(get("encoder")), mc.precomputed_dim));
  }
  DataBundle data = build_data(corpus, mc, embeddings ? &*embeddings : nullptr,
                               tokenizer ? &*tokenizer : nullptr, context, allow_missing);
  std::string label = get("name");
  if (extra.contains("seed")) label += "/seed-" + std::to_string(extra.at("seed").get<std::uint64_t>());
  if (label.empty()) label = checkpoint_dir;
  return {std::move(model), std::move(corpus), std::move(data), std::move(label)};
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("REDAFF_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<std::size_t>(n);
    throw UsageError(std::string("REDAFF_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace redaff
