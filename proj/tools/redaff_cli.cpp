// SPDX-License-Identifier: Apache-2.0
// redaff: command-line driver for the readers'-emotion pipeline.
#include "redaff/behavior.hpp"
#include "redaff/experiment.hpp"
#include "redaff/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace redaff;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write " + p.string());
  return f;
}

struct SynthArgs {
  std::string out;
  SyntheticSpec spec;
};

void cmd_synth(const SynthArgs& a) {
  const auto bundle = make_synthetic(a.spec);
  write_synthetic(a.out, bundle);
  std::cout << "wrote " << bundle.records.size() << " records, " << bundle.embeddings.size()
            << " vectors, " << bundle.lexicon.size() << " lexicon words to " << a.out << '\n';
}

struct PrepareArgs {
  std::string input;
  std::string out;
  std::uint64_t seed = 13;
  std::vector<std::string> noise;
};

void cmd_prepare(const PrepareArgs& a) {
  std::ifstream in(a.input);
  if (!in) throw DataError("cannot open " + a.input);
  const auto read = read_records(in);
  PrepareOptions opts;
  opts.split_seed = a.seed;
  if (!a.noise.empty()) opts.noise_terms = a.noise;
  auto prepared = prepare_corpus(read.records, opts);
  std::vector<RecordError> rejected = read.errors;
  rejected.insert(rejected.end(), prepared.rejected.begin(), prepared.rejected.end());
  std::sort(rejected.begin(), rejected.end(),
            [](const auto& x, const auto& y) { return x.line < y.line; });
  const fs::path out(a.out);
  {
    auto f = open_out(out / "rejected.tsv");
    f << "line\tid\treason\n";
    for (const auto& r : rejected) {
      f << r.line << '\t' << r.id << '\t' << r.reason << '\n';
      std::cerr << a.input << ':' << r.line << ": rejected '" << r.id << "': " << r.reason << '\n';
    }
  }
  if (prepared.corpus.empty()) throw DataError("no usable records in " + a.input);
  {
    auto f = open_out(out / "corpus.jsonl");
    write_corpus(f, prepared.corpus);
  }
  const auto stats = corpus_stats(prepared.corpus);
  {
    auto f = open_out(out / "stats.tsv");
    write_stats_tsv(f, stats);
  }
  {
    auto f = open_out(out / "correlations.tsv");
    write_correlations_tsv(f, emotion_correlations(prepared.corpus));
  }
  std::cout << "kept " << prepared.corpus.size() << " of " << read.records.size() + read.errors.size()
            << " records (train " << prepared.corpus.indices(Split::train).size() << ", val "
            << prepared.corpus.indices(Split::val).size() << ", test "
            << prepared.corpus.indices(Split::test).size() << ")\n";
  write_stats_tsv(std::cout, stats);
}

struct CounterfitArgs {
  std::string embeddings;
  std::string lexicon;
  std::string out;
  long dim = 0;
  double threshold = 0.5;
  std::size_t max_pairs = 0;
  CounterfitOptions opts;
};

void cmd_counterfit(const CounterfitArgs& a) {
  const auto loaded = load_embeddings(a.embeddings, a.dim);
  if (loaded.skipped_lines > 0) {
    std::cerr << "warning: skipped " << loaded.skipped_lines << " malformed embedding lines\n";
  }
  const auto lexicon = load_lexicon(a.lexicon);
  ConstraintOptions copts;
  copts.threshold = a.threshold;
  copts.max_pairs = a.max_pairs;
  copts.seed = a.opts.seed;
  copts.source = a.lexicon;
  const auto constraints = build_constraints(lexicon, copts);
  const auto result = counterfit(loaded.table, constraints, a.opts);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  {
    auto f = open_out(a.out);
    write_embeddings(f, result.table);
  }
  const auto classes = assign_classes(lexicon, a.threshold);
  const auto before = cohesion_report(loaded.table.normalized(), classes);
  const auto after = cohesion_report(result.table, classes);
  std::cout << "constraints\tattract " << constraints.attract.size() << "\trepel "
            << constraints.repel.size() << '\n';
  std::cout << "objective\t" << format_fixed(result.initial_loss, 6) << " -> "
            << format_fixed(result.loss_trace.empty() ? result.initial_loss : result.loss_trace.back(), 6)
            << '\n';
  std::cout << "within-class cosine\t" << format_fixed(before.within_class, 6) << " -> "
            << format_fixed(after.within_class, 6) << '\n';
  std::cout << "cross-class cosine\t" << format_fixed(before.cross_class, 6) << " -> "
            << format_fixed(after.cross_class, 6) << '\n';
}

struct TrainArgs {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string mode;
  std::string encoder;
  std::string out;
  bool quiet = false;
  bool allow_missing = false;
};

void cmd_train(const TrainArgs& a) {
  auto configs = load_experiment_configs(a.config);
  const std::size_t threads = worker_threads();
  for (auto& c : configs) {
    if (!a.seeds.empty()) c.seeds = a.seeds;
    if (!a.mode.empty()) {
      const auto m = mode_from_name(a.mode);
      if (!m) throw UsageError("unknown --mode '" + a.mode + "'");
      c.model.mode = *m;
    }
    if (!a.encoder.empty()) apply_encoder_spec(c, a.encoder);
    if (!a.out.empty()) c.out = a.out;
    if (a.allow_missing) c.allow_missing = true;
    for (auto seed : c.seeds) {
      const std::string dir = (fs::path(c.out) / c.name / ("seed-" + std::to_string(seed))).string();
      const auto r = run_training(c, seed, dir, threads, a.quiet ? nullptr : &std::clog);
      write_report_header(std::cout);
      write_report_row(std::cout, c.name + "/seed-" + std::to_string(seed), r.test_report);
      std::cout << "# best epoch " << r.best_epoch << "; majority-baseline Acc@1(%) "
                << format_fixed(100.0 * r.baseline_acc, 2) << "; checkpoint "
                << (fs::path(dir) / "checkpoint").string() << '\n';
    }
  }
}

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string corpus;
  std::string split = "test";
  std::string out;
  bool allow_missing = false;
};

void cmd_eval(const EvalArgs& a) {
  if (a.checkpoints.empty() || a.checkpoints.size() > 2) {
    throw UsageError("eval takes one or two --checkpoint values");
  }
  const auto split = split_from_name(a.split);
  if (!split) throw UsageError("unknown --split '" + a.split + "'");
  const std::size_t threads = worker_threads();
  std::ostringstream text;
  write_report_header(text);
  std::vector<std::vector<EvalPair>> all;
  for (const auto& ck : a.checkpoints) {
    const auto run = load_run(ck, a.corpus, a.allow_missing);
    const auto& docs = *split == Split::train ? run.data.train
                       : *split == Split::val ? run.data.val
                                              : run.data.test;
    all.push_back(eval_pairs(run.model, docs, threads));
    write_report_row(text, run.label, evaluate(all.back()));
  }
  if (all.size() == 2) {
    if (all[0].size() != all[1].size()) {
      throw DataError("checkpoints were evaluated on different document sets");
    }
    const auto mc = mcnemar(acc_flags(all[0]), acc_flags(all[1]));
    const auto r0 = rmse_per_doc(all[0]);
    const auto r1 = rmse_per_doc(all[1]);
    const auto ks = ks_test(r0, r1);
    text << "\ntest\tstatistic\tp_value\tdetail\n";
    text << "mcnemar\t" << (mc.statistic ? format_fixed(*mc.statistic, 4) : "NA") << '\t'
         << (mc.p_value ? format_fixed(*mc.p_value, 6) : "NA") << "\tb=" << mc.b << ",c=" << mc.c
         << '\n';
    text << "ks_rmse\t" << format_fixed(ks.statistic, 4) << '\t' << format_fixed(ks.p_value, 6)
         << "\tn=" << r0.size() << ",m=" << r1.size() << '\n';
  }
  std::cout << text.str();
  if (!a.out.empty()) {
    auto f = open_out(a.out);
    f << text.str();
  }
}

struct BehaviorArgs {
  std::vector<std::string> checkpoints;
  std::vector<std::string> lexicons;  // name=path or path
  std::string gazetteer;
  std::string entities;
  bool no_caps = false;
  double threshold = 0.5;
  std::string corpus;
  std::string split = "test";
  std::string out;
  std::size_t heatmap_docs = 50;
  std::string ham_support = "positive";
};

std::map<std::string, std::set<std::size_t>> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open entity annotations " + path);
  std::map<std::string, std::set<std::size_t>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 2) throw DataError(path + ":" + std::to_string(lineno) + ": expected id<TAB>index");
    out[cols[0]].insert(std::stoul(cols[1]));
  }
  return out;
}

void cmd_behavior(const BehaviorArgs& a) {
  if (a.checkpoints.empty()) throw UsageError("behavior needs at least one --checkpoint");
  if (a.lexicons.empty()) throw UsageError("behavior needs at least one --lexicon");
  const auto split_tag = split_from_name(a.split);
  if (!split_tag) throw UsageError("unknown --split '" + a.split + "'");
  const auto support = ham_support_from_name(a.ham_support);
  if (!support) throw UsageError("unknown --ham-support '" + a.ham_support + "'");
  std::unique_ptr<EntityTagger> tagger;
  if (!a.entities.empty()) {
    tagger = std::make_unique<AnnotatedTagger>(load_annotations(a.entities));
  } else {
    tagger = std::make_unique<GazetteerTagger>(
        a.gazetteer.empty() ? std::set<std::string>{} : load_gazetteer(a.gazetteer), !a.no_caps);
  }
  std::vector<std::pair<std::string, std::set<std::string>>> lexicons;
  for (const auto& spec : a.lexicons) {
    const auto eq = spec.find('=');
    const std::string name = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    lexicons.emplace_back(name, emotion_words(load_lexicon(path), a.threshold));
  }

  const fs::path out(a.out);
  std::vector<BehaviorRow> rows;
  std::ofstream dump;
  std::vector<std::string> fragments;
  for (const auto& ck : a.checkpoints) {
    const auto run = load_run(ck, a.corpus);
    if (!run.model.config.uses_affect()) {
      throw UsageError("no attention to audit: '" + ck + "' is a context-only model");
    }
    const auto& idx = *split_tag == Split::train ? run.data.train_idx
                      : *split_tag == Split::val ? run.data.val_idx
                                                 : run.data.test_idx;
    const auto& docs = *split_tag == Split::train ? run.data.train
                       : *split_tag == Split::val ? run.data.val
                                                  : run.data.test;
    const auto maps = attention_maps(run.model, run.corpus, idx, docs);
    if (!a.out.empty()) {
      const std::string safe = [&] {
        std::string s = run.label;
        std::replace(s.begin(), s.end(), '/', '_');
        return s;
      }();
      auto f = open_out(out / ("attention-" + safe + ".tsv"));
      write_attention_dump(f, maps);
      std::vector<std::string> frags;
      for (std::size_t k = 0; k < maps.size() && k < a.heatmap_docs; ++k) {
        frags.push_back(render_heatmap(maps[k]));
      }
      auto h = open_out(out / ("heatmap-" + safe + ".html"));
      h << heatmap_page(frags, run.label);
    }
    for (const auto& [name, words] : lexicons) {
      const auto pairs =
          map_pairs(maps, run.corpus, idx, run.model.config.max_tokens, words, *tagger, *support);
      const auto scores = behavior_scores(pairs);
      if (scores.word_sim.counted == 0) {
        std::cerr << "warning: every document is in D' for lexicon '" << name << "' on "
                  << run.label << " (no emotion words or named entities)\n";
      }
      if (scores.word_prob.value && *scores.word_prob.value == 1.0) {
        std::cerr << "note: HAM support equals EAM support on every document for '" << name
                  << "' on " << run.label << "; the scores are saturated (try --ham-support "
                  << "above-uniform)\n";
      }
      if (scores.beh_sim.skipped > 0) {
        std::cerr << "note: beh_sim skipped " << scores.beh_sim.skipped
                  << " single-class documents for '" << name << "' on " << run.label << '\n';
      }
      rows.push_back({run.label, name, scores});
    }
  }
  std::ostringstream table;
  write_behavior_table(table, rows);
  std::cout << table.str();
  if (!a.out.empty()) {
    auto f = open_out(out / "behavior.tsv");
    f << table.str();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"redaff: readers'-emotion modelling with affect-enriched embeddings"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a SemEval-format synthetic fixture");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.spec.seed, "Generator seed");
  s->add_option("--documents", synth.spec.documents, "Number of documents");
  s->add_option("--dim", synth.spec.dim, "Embedding dimension");

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Map labels, normalize, clean and split a raw corpus");
  p->add_option("--input", prep.input, "Raw JSONL records")->required();
  p->add_option("--out", prep.out, "Output directory")->required();
  p->add_option("--seed", prep.seed, "Split seed");
  p->add_option("--noise", prep.noise, "Noise terms (replaces the defaults)");

  CounterfitArgs cf;
  auto* c = app.add_subcommand("counterfit", "Counter-fit embeddings with lexicon constraints");
  c->add_option("--embeddings", cf.embeddings, "Original vectors")->required();
  c->add_option("--dim", cf.dim, "Vector dimension")->required();
  c->add_option("--lexicon", cf.lexicon, "Emotion lexicon TSV")->required();
  c->add_option("--out", cf.out, "Output vector file")->required();
  c->add_option("--threshold", cf.threshold, "Class threshold");
  c->add_option("--max-pairs", cf.max_pairs, "Cap per constraint kind (0 = all)");
  c->add_option("--epochs", cf.opts.epochs, "Epochs");
  c->add_option("--lr", cf.opts.lr, "Step size");
  c->add_option("--attract-margin", cf.opts.attract_margin, "Attract margin");
  c->add_option("--repel-margin", cf.opts.repel_margin, "Repel margin");
  c->add_option("--preserve", cf.opts.preserve_weight, "Preservation weight");
  c->add_option("--seed", cf.opts.seed, "Seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train every grid row and seed of a config");
  t->add_option("--config", tr.config, "Experiment config (JSON)")->required();
  t->add_option("--seed", tr.seeds, "Seed(s), overriding the config");
  t->add_option("--mode", tr.mode, "full | affect-only | context-only");
  t->add_option("--encoder", tr.encoder, "toy | precomputed:<path>");
  t->add_option("--out", tr.out, "Output root");
  t->add_flag("--quiet", tr.quiet, "No per-epoch log");
  t->add_flag("--allow-missing", tr.allow_missing, "Drop documents without a context vector");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate one or two checkpoints");
  e->add_option("--checkpoint", ev.checkpoints, "Checkpoint directory (repeat for two)")->required();
  e->add_option("--corpus", ev.corpus, "Corpus override");
  e->add_option("--split", ev.split, "train | val | test");
  e->add_option("--out", ev.out, "Report file");
  e->add_flag("--allow-missing", ev.allow_missing, "Drop documents without a context vector");

  BehaviorArgs bh;
  auto* b = app.add_subcommand("behavior", "Attention-map similarity against external maps");
  b->add_option("--checkpoint", bh.checkpoints, "Checkpoint directory (repeatable)")->required();
  b->add_option("--lexicon", bh.lexicons, "[name=]lexicon.tsv (repeatable)")->required();
  b->add_option("--gazetteer", bh.gazetteer, "Entity gazetteer");
  b->add_option("--entities", bh.entities, "Precomputed entity annotations (id<TAB>index)");
  b->add_flag("--no-caps-heuristic", bh.no_caps, "Disable the capitalization heuristic");
  b->add_option("--threshold", bh.threshold, "Emotion-word threshold");
  b->add_option("--corpus", bh.corpus, "Corpus override");
  b->add_option("--split", bh.split, "train | val | test");
  b->add_option("--ham-support", bh.ham_support, "positive | above-uniform");
  b->add_option("--heatmap-docs", bh.heatmap_docs, "Documents per heatmap page");
  b->add_option("--out", bh.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*s) cmd_synth(synth);
    if (*p) cmd_prepare(prep);
    if (*c) cmd_counterfit(cf);
    if (*t) cmd_train(tr);
    if (*e) cmd_eval(ev);
    if (*b) cmd_behavior(bh);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kExitData;
  }
  return 0;
}
