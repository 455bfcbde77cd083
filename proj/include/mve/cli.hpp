#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mve/attention.hpp"
#include "mve/config.hpp"
#include "mve/embedding.hpp"
#include "mve/error.hpp"
#include "mve/eval.hpp"
#include "mve/graph.hpp"
#include "mve/synth.hpp"
#include "mve/trainer.hpp"

namespace mve::cli {

// A trained model as read back from an output directory.
struct SavedModel {
  Vocabulary vocab;
  std::vector<std::string> view_names;
  EmbeddingStore store;
  AttentionParams attention;
};

inline SavedModel load_model(const std::filesystem::path& dir) {
  auto open = [&](const std::string& name) {
    std::ifstream in(dir / name);
    if (!in) throw InputError("cannot read " + (dir / name).string());
    return in;
  };
  SavedModel model;
  {
    auto in = open("vocab.txt");
    model.vocab = Vocabulary::read(in);
  }
  {
    auto in = open("views.txt");
    std::string name;
    while (std::getline(in, name))
      if (!name.empty()) model.view_names.push_back(name);
  }
  if (model.view_names.empty()) throw InputError("no views listed in " + (dir / "views.txt").string());
  auto check_rows = [&](const EmbeddingTable& t, const std::string& file) {
    if (t.rows() != model.vocab.size()) throw InputError(file + " does not match vocab.txt");
    for (std::size_t r = 0; r < t.rows(); ++r)
      if (t.tokens[r] != model.vocab.token(static_cast<NodeId>(r))) throw InputError(file + " does not match vocab.txt");
  };
  const std::size_t K = model.view_names.size();
  std::optional<EmbeddingStore> store;
  for (std::size_t k = 0; k < K; ++k) {
    const std::string file = "view_" + model.view_names[k] + ".emb";
    auto in = open(file);
    const auto table = read_embedding_table(in, file);
    check_rows(table, file);
    if (!store) store.emplace(model.vocab.size(), K, table.dim);
    if (table.dim != store->dim()) throw InputError(file + " has a different dimension");
    for (std::size_t i = 0; i < table.rows(); ++i) {
      auto dst = store->view(static_cast<ViewId>(k), static_cast<NodeId>(i));
      std::copy(table.row(i).begin(), table.row(i).end(), dst.begin());
    }
  }
  {
    auto in = open("robust.emb");
    const auto table = read_embedding_table(in, "robust.emb");
    check_rows(table, "robust.emb");
    for (std::size_t i = 0; i < table.rows(); ++i) {
      auto dst = store->robust(static_cast<NodeId>(i));
      std::copy(table.row(i).begin(), table.row(i).end(), dst.begin());
    }
  }
  {
    auto in = open("attention.txt");
    model.attention = read_attention(in);
  }
  if (model.attention.views != K || model.attention.dim != store->dim())
    throw InputError("attention.txt does not match the saved views");
  model.store = std::move(*store);
  return model;
}

inline Representation parse_representation(const std::string& text, const std::vector<std::string>& view_names) {
  if (text == "robust") return Representation::robust();
  if (text == "concat") return Representation::concat();
  if (text.rfind("view:", 0) == 0) {
    const auto name = text.substr(5);
    for (std::size_t k = 0; k < view_names.size(); ++k)
      if (view_names[k] == name) return Representation::of_view(static_cast<ViewId>(k));
    throw InputError("unknown view '" + name + "'");
  }
  throw InputError("representation must be robust, concat or view:NAME");
}

inline LabeledSet read_label_file(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  return read_labels(in, vocab, path.string());
}

inline LabeledSet read_pair_file(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  return read_pairs(in, vocab, path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

// Parses NAME=A[:B] into (name, numbers).
inline std::pair<std::string, std::vector<double>> parse_named_numbers(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw InputError("expected NAME=VALUE[:VALUE], got '" + text + "'");
  std::vector<double> values;
  std::stringstream rest(text.substr(eq + 1));
  std::string item;
  while (std::getline(rest, item, ':')) {
    const auto v = detail::parse_real(item);
    if (!v) throw InputError("bad number '" + item + "' in '" + text + "'");
    values.push_back(*v);
  }
  return {text.substr(0, eq), values};
}

struct TrainFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t workers = 1, dim = 0, negatives = 0, iterations = 0, attention_epochs = 0;
  std::uint64_t samples = 0;
  double eta = 0, lr = 0;
  bool no_attention = false, no_collab = false;
  std::vector<std::string> views;
  std::string labels, pairs, out;

  CLI::Option *o_seed{}, *o_workers{}, *o_dim{}, *o_negatives{}, *o_iterations{}, *o_samples{}, *o_eta{}, *o_lr{},
      *o_attention_epochs{}, *o_no_attention{}, *o_no_collab{}, *o_labels{}, *o_pairs{}, *o_out{};

  // Graph-source flags shared by train and the evaluation commands.
  void add_graph_flags(CLI::App* app) {
    app->add_option("--config", config, "key=value config file")->check(CLI::ExistingFile);
    app->add_option("--view", views, "NAME=PATH[:directed] (repeatable)");
  }

  void add_train_flags(CLI::App* app) {
    add_graph_flags(app);
    o_seed = app->add_option("--seed", seed, "random seed");
    o_workers = app->add_option("--workers", workers, "SGD worker threads (1 = deterministic)");
    o_dim = app->add_option("--dim", dim, "embedding dimension");
    o_negatives = app->add_option("--negatives", negatives, "negative samples per edge");
    o_eta = app->add_option("--eta", eta, "regularizer weight");
    o_lr = app->add_option("--lr", lr, "initial learning rate");
    o_samples = app->add_option("--samples", samples, "edge samples per iteration");
    o_iterations = app->add_option("--iterations", iterations, "number of iterations");
    o_attention_epochs = app->add_option("--attention-epochs", attention_epochs, "attention epochs per iteration");
    o_no_attention = app->add_flag("--no-attention", no_attention, "fix view weights at 1/K");
    o_no_collab = app->add_flag("--no-collab", no_collab, "per-view context vectors");
    o_labels = app->add_option("--labels", labels, "classification supervision: TOKEN LABEL[,LABEL...]")
                   ->check(CLI::ExistingFile);
    o_pairs = app->add_option("--pairs", pairs, "link supervision: TOKEN TOKEN")->check(CLI::ExistingFile);
    o_labels->excludes(o_pairs);
    o_out = app->add_option("--out", out, "output directory")->required();
  }

  TrainConfig resolve() const {
    TrainConfig cfg;
    cfg.dim = 100;
    if (!config.empty()) cfg = load_config(config, cfg);
    if (o_seed && o_seed->count()) cfg.seed = seed;
    if (o_workers && o_workers->count()) cfg.workers = workers;
    if (o_dim && o_dim->count()) cfg.dim = dim;
    if (o_negatives && o_negatives->count()) cfg.negatives = negatives;
    if (o_eta && o_eta->count()) cfg.eta = eta;
    if (o_lr && o_lr->count()) cfg.lr = lr;
    if (o_samples && o_samples->count()) cfg.samples_per_iter = samples;
    if (o_iterations && o_iterations->count()) cfg.iterations = iterations;
    if (o_attention_epochs && o_attention_epochs->count()) cfg.attention_epochs = attention_epochs;
    if (no_attention) cfg.no_attention = true;
    if (no_collab) cfg.no_collaboration = true;
    if (!views.empty()) {
      cfg.views.clear();
      for (const auto& v : views) cfg.views.push_back(parse_view_source(v));
    }
    if (o_labels && o_labels->count()) {
      cfg.labels = labels;
      cfg.pairs.clear();
    }
    if (o_pairs && o_pairs->count()) {
      cfg.pairs = pairs;
      cfg.labels.clear();
    }
    if (!out.empty()) cfg.out = out;
    if (cfg.views.empty()) throw CLI::ValidationError("--view", "at least one view is required (--view or config)");
    for (const auto& v : cfg.views)
      if (!std::filesystem::exists(v.path))
        throw CLI::ValidationError("--view", "view file not found: " + v.path.string());
    if (!cfg.labels.empty() && !cfg.pairs.empty())
      throw CLI::ValidationError("--labels", "give either labels or pairs, not both");
    cfg.validate();
    return cfg;
  }
};

inline std::string format_metrics(const std::vector<std::pair<std::string, double>>& metrics) {
  std::string line;
  char buf[64];
  for (const auto& [k, v] : metrics) {
    std::snprintf(buf, sizeof buf, "%.4f", v);
    line += (line.empty() ? "" : " ") + k + "=" + buf;
  }
  return line + "\n";
}

// Runs one CLI invocation. Returns 0 on success, 1 on usage errors, 2 on
// runtime failures.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multi-view network embedding with attention-weighted view voting", "mve"};
  app.require_subcommand(1, 1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-view graph");
  std::string synth_out;
  std::uint64_t synth_seed = 7;
  std::size_t synth_nodes = 400, synth_communities = 4;
  double synth_holdout = 0.1;
  bool synth_weighted = false;
  std::vector<std::string> synth_sbm, synth_noise;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--nodes", synth_nodes, "node count");
  synth->add_option("--communities", synth_communities, "community count");
  synth->add_option("--sbm", synth_sbm, "informative view NAME=P_IN:P_OUT (repeatable)");
  synth->add_option("--noise", synth_noise, "noise view NAME=P (repeatable)");
  synth->add_option("--holdout", synth_holdout, "fraction of informative edges withheld");
  synth->add_flag("--weighted", synth_weighted, "integer edge weights in [1,5]");

  // train
  auto* train_cmd = app.add_subcommand("train", "train embeddings and view weights");
  TrainFlags train_flags;
  train_flags.add_train_flags(train_cmd);

  // eval-classify
  auto* eval_cls = app.add_subcommand("eval-classify", "one-vs-rest node classification on a trained model");
  std::string ec_out, ec_labels, ec_pin, ec_repr = "robust";
  std::uint64_t ec_seed = 1;
  double ec_fraction = 0.1;
  std::size_t ec_buckets = 0;
  TrainFlags ec_graph;
  eval_cls->add_option("--out", ec_out, "trained model directory")->required()->check(CLI::ExistingDirectory);
  eval_cls->add_option("--labels", ec_labels, "ground-truth labels")->required()->check(CLI::ExistingFile);
  eval_cls->add_option("--pin", ec_pin, "labels used for attention (kept in train)")->check(CLI::ExistingFile);
  eval_cls->add_option("--seed", ec_seed, "split seed");
  eval_cls->add_option("--train-fraction", ec_fraction, "fraction of labeled nodes used for training");
  eval_cls->add_option("--repr", ec_repr, "robust | concat | view:NAME");
  eval_cls->add_option("--degree-buckets", ec_buckets, "also report micro-F1 per degree bucket (needs views)");
  ec_graph.add_graph_flags(eval_cls);

  // eval-link
  auto* eval_link = app.add_subcommand("eval-link", "link prediction AUC on a trained model");
  std::string el_out, el_pairs, el_exclude, el_repr = "robust";
  std::uint64_t el_seed = 1;
  TrainFlags el_graph;
  eval_link->add_option("--out", el_out, "trained model directory")->required()->check(CLI::ExistingDirectory);
  eval_link->add_option("--pairs", el_pairs, "held-out positive pairs")->required()->check(CLI::ExistingFile);
  eval_link->add_option("--exclude", el_exclude, "pairs used for attention (dropped from positives)")
      ->check(CLI::ExistingFile);
  eval_link->add_option("--seed", el_seed, "negative sampling seed");
  eval_link->add_option("--repr", el_repr, "robust | concat | view:NAME");
  el_graph.add_graph_flags(eval_link);

  // dumps
  auto* dump_w = app.add_subcommand("dump-weights", "print per-node view weights recomputed from a trained model");
  std::string dw_out;
  dump_w->add_option("--out", dw_out, "trained model directory")->required()->check(CLI::ExistingDirectory);
  auto* dump_e = app.add_subcommand("dump-embeddings", "print one embedding table of a trained model");
  std::string de_out, de_repr = "robust";
  dump_e->add_option("--out", de_out, "trained model directory")->required()->check(CLI::ExistingDirectory);
  dump_e->add_option("--repr", de_repr, "robust | concat | view:NAME");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  std::optional<TrainConfig> train_cfg;
  try {
    app.parse(reversed);
    if (train_cmd->parsed()) train_cfg = train_flags.resolve();
    if (eval_link->parsed() && el_graph.views.empty() && el_graph.config.empty())
      throw CLI::ValidationError("eval-link", "graph views are required (--view or --config) to sample negatives");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code == 0 ? 0 : 1;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 1;
  }

  auto graph_from = [](const TrainFlags& flags) {
    TrainConfig cfg;
    if (!flags.config.empty()) cfg = load_config(flags.config);
    if (!flags.views.empty()) {
      cfg.views.clear();
      for (const auto& v : flags.views) cfg.views.push_back(parse_view_source(v));
    }
    return load_graph(cfg.views);
  };

  try {
    if (synth->parsed()) {
      SynthSpec spec = default_synth_spec(synth_seed);
      spec.nodes = synth_nodes;
      spec.communities = synth_communities;
      spec.holdout_fraction = synth_holdout;
      spec.weighted = synth_weighted;
      if (!synth_sbm.empty() || !synth_noise.empty()) spec.views.clear();
      for (const auto& s : synth_sbm) {
        auto [name, p] = parse_named_numbers(s);
        if (p.size() != 2) throw InputError("--sbm expects NAME=P_IN:P_OUT");
        spec.views.push_back(SynthView::sbm(name, p[0], p[1]));
      }
      for (const auto& s : synth_noise) {
        auto [name, p] = parse_named_numbers(s);
        if (p.size() != 1) throw InputError("--noise expects NAME=P");
        spec.views.push_back(SynthView::noise(name, p[0]));
      }
      const auto result = generate(spec);
      write_synth(synth_out, spec, result);
      out << "nodes=" << result.graph.node_count() << " views=" << result.graph.view_count()
          << " edges=" << result.graph.total_edges() << " heldout=" << result.heldout.pairs.size() << '\n';
      return 0;
    }

    if (train_cmd->parsed()) {
      const auto& cfg = *train_cfg;
      const auto graph = load_graph(cfg.views);
      LabeledSet labeled;
      if (!cfg.labels.empty()) labeled = read_label_file(cfg.labels, graph.vocabulary());
      else if (!cfg.pairs.empty()) labeled = read_pair_file(cfg.pairs, graph.vocabulary());
      info("nodes=" + std::to_string(graph.node_count()) + " views=" + std::to_string(graph.view_count()) +
           " edges=" + std::to_string(graph.total_edges()) + " labeled=" + std::to_string(labeled.size()));
      const auto result = train(cfg, graph, labeled, [](const IterationStats& s) {
        char buf[128];
        std::snprintf(buf, sizeof buf, " embedding_s=%.3f attention_s=%.3f vote_s=%.3f", s.embedding_seconds,
                      s.attention_seconds, s.vote_seconds);
        info(format_iteration(s) + buf);
      });
      write_outputs(cfg.out, graph, result);
      out << "wrote " << cfg.out.string() << '\n';
      return 0;
    }

    if (eval_cls->parsed()) {
      const auto model = load_model(ec_out);
      const auto repr = parse_representation(ec_repr, model.view_names);
      const auto labels = NodeLabels::from(read_label_file(ec_labels, model.vocab));
      std::vector<NodeId> pinned;
      if (!ec_pin.empty())
        for (const auto& item : read_label_file(ec_pin, model.vocab).nodes) pinned.push_back(item.node);
      const auto split = split_nodes(labels, ec_fraction, ec_seed, pinned);
      std::vector<LabelSet> pred;
      const auto scores = evaluate_classification(model.store, repr, labels, split, {}, &pred);
      std::vector<std::pair<std::string, double>> metrics{{"macro_f1", scores.macro}, {"micro_f1", scores.micro},
                                                          {"train", static_cast<double>(split.train.size())},
                                                          {"test", static_cast<double>(split.test.size())}};
      std::string text = format_metrics(metrics);
      if (ec_buckets > 0) {
        if (ec_graph.views.empty() && ec_graph.config.empty())
          throw InputError("--degree-buckets needs the graph views (--view or --config)");
        const auto graph = graph_from(ec_graph);
        std::vector<NodeId> test_nodes;
        for (auto r : split.test) test_nodes.push_back(*graph.vocabulary().find(model.vocab.token(labels.nodes[r])));
        const auto buckets = degree_buckets(graph, test_nodes, ec_buckets);
        for (std::size_t b = 0; b < buckets.size(); ++b) {
          std::vector<LabelSet> p, t;
          for (auto pos : buckets[b]) {
            p.push_back(pred[pos]);
            t.push_back(labels.labels[split.test[pos]]);
          }
          const auto s = p.empty() ? F1Scores{} : f1_scores(p, t, labels.label_count);
          text += format_metrics({{"bucket", static_cast<double>(b)}, {"size", static_cast<double>(p.size())},
                                  {"micro_f1", s.micro}});
        }
      }
      write_text(std::filesystem::path(ec_out) / "metrics_classify.txt", text);
      out << text;
      return 0;
    }

    if (eval_link->parsed()) {
      const auto model = load_model(el_out);
      const auto repr = parse_representation(el_repr, model.view_names);
      const auto graph = graph_from(el_graph);
      if (!(graph.vocabulary() == model.vocab)) throw InputError("graph views do not match the trained vocabulary");
      auto positives = read_pair_file(el_pairs, model.vocab).pairs;
      std::vector<std::pair<NodeId, NodeId>> excluded;
      if (!el_exclude.empty()) {
        excluded = read_pair_file(el_exclude, model.vocab).pairs;
        std::unordered_set<std::uint64_t> drop;
        for (const auto& [a, b] : excluded) drop.insert(detail::pair_key(std::min(a, b), std::max(a, b)));
        std::erase_if(positives,
                      [&](const auto& p) { return drop.count(detail::pair_key(std::min(p.first, p.second), std::max(p.first, p.second))) > 0; });
      }
      if (positives.empty()) throw InputError("no positive pairs left to evaluate");
      std::vector<std::pair<NodeId, NodeId>> blocked = positives;
      blocked.insert(blocked.end(), excluded.begin(), excluded.end());
      const auto negatives = sample_non_edges(graph, positives.size(), blocked, el_seed);
      const double auc = evaluate_link(model.store, repr, positives, negatives);
      const auto text = format_metrics({{"auc", auc},
                                        {"positives", static_cast<double>(positives.size())},
                                        {"negatives", static_cast<double>(negatives.size())}});
      write_text(std::filesystem::path(el_out) / "metrics_link.txt", text);
      out << text;
      return 0;
    }

    if (dump_w->parsed()) {
      const auto model = load_model(dw_out);
      write_weights(out, model.vocab, weights_for_all(model.store, model.attention));
      return 0;
    }

    if (dump_e->parsed()) {
      const auto model = load_model(de_out);
      const auto repr = parse_representation(de_repr, model.view_names);
      std::vector<NodeId> all(model.vocab.size());
      std::iota(all.begin(), all.end(), 0);
      const auto f = extract_features(model.store, repr, all);
      write_embedding_table(out, model.vocab, f.dim, [&](NodeId i) { return f.row(i); });
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace mve::cli
