// Copyright 2026 The Juno Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Every stage reads and writes files, so a pipeline
// is a sequence of invocations:
//
//   juno gen-synth --out-dir syn
//   juno encode --docs syn/docs.jsonl --db syn/db.json --dim 64 --out emb.jemb
//   juno train --docs ... --db ... --emb emb.jemb --train syn/train.jsonl
//              --val syn/val.jsonl --out model.jprj
//   juno build-index ... --model model.jprj --train syn/train.jsonl --out index.jidx
//   juno match ... --index index.jidx --out matches.jsonl
//   juno eval --matches matches.jsonl --gold syn/gold.jsonl --out report.json
//
// Options may also come from a TOML file (--config); flags given on the
// command line win. Each run writes its resolved configuration next to its
// primary output as <output>.config.toml.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#pragma once

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "juno/juno.hpp"

namespace juno::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline void write_output(const std::string& path, std::string_view bytes) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  write_file(path, bytes);
}

inline std::vector<Document> load_docs(const std::string& path) {
  return parse_documents_jsonl(read_file(path));
}

inline Table load_db(const std::string& path) { return load_table(read_file(path)); }

inline std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = juno::detail::trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item[0] == '-') {
      throw CLI::ValidationError(what, "\"" + item + "\" is not a non-negative integer");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw CLI::ValidationError(what, "empty list");
  return out;
}

// Documents, table and their embeddings as read back from an encode run.
struct Encoded {
  std::vector<Document> docs;
  Table table;
  std::unique_ptr<EncodedCorpus> corpus;
};

inline Encoded load_encoded(const std::string& docs_path, const std::string& db_path,
                            const std::string& emb_path, std::size_t threads) {
  Encoded e;
  e.docs = load_docs(docs_path);
  e.table = load_db(db_path);
  std::size_t d = 0;
  auto map = decode_jemb(read_file(emb_path), 0, &d);
  const FileProvider provider(std::move(map), d);
  e.corpus = std::make_unique<EncodedCorpus>(
      EncodedCorpus::encode(e.docs, e.table, provider, threads));
  return e;
}

inline std::vector<LabeledSpan> load_pairs(const std::string& path) {
  return parse_labeled_spans(read_file(path));
}

}  // namespace detail

// Runs the command line. Output streams are parameters so tests can capture
// them.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Cross-modal entity matching between document text spans and table tuples",
               "juno"};
  app.set_config("--config", "", "TOML file with option values (command-line flags win)");
  app.require_subcommand(1);
  app.fallthrough();

  std::size_t threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (default: logical cores)")
      ->envname("JUNO_THREADS")
      ->check(CLI::PositiveNumber);

  std::function<void()> action;
  std::string echo_path;
  auto echo_beside = [&](const std::string& path) { echo_path = path + ".config.toml"; };

  // ---- gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate the planted-correlation synthetic corpus");
  SynthConfig synth;
  std::string synth_dir;
  gen->add_option("--docs", synth.docs, "Number of documents")->capture_default_str();
  gen->add_option("--tuples", synth.tuples, "Number of tuples")->capture_default_str();
  gen->add_option("--words", synth.words_per_doc, "Words per document")->capture_default_str();
  gen->add_option("--train-pairs", synth.train_pairs, "Labeled training spans")
      ->capture_default_str();
  gen->add_option("--val-pairs", synth.val_pairs, "Labeled validation spans")
      ->capture_default_str();
  gen->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  gen->add_option("--out-dir", synth_dir, "Output directory")->required();
  gen->callback([&] {
    echo_beside((std::filesystem::path(synth_dir) / "gen-synth").string());
    action = [&] {
      const auto s = generate_synthetic(synth);
      const std::filesystem::path dir(synth_dir);
      detail::write_output((dir / "docs.jsonl").string(), documents_jsonl(s.docs));
      detail::write_output((dir / "db.json").string(), serialize_table(s.table));
      detail::write_output((dir / "gold.jsonl").string(), gold_jsonl(s.gold));
      detail::write_output((dir / "train.jsonl").string(), labeled_spans_jsonl(s.train));
      detail::write_output((dir / "val.jsonl").string(), labeled_spans_jsonl(s.val));
      out << "wrote " << s.docs.size() << " documents, " << s.table.tuples.size() << " tuples, "
          << s.train.size() << "/" << s.val.size() << " train/val spans to " << synth_dir << "\n";
    };
  });

  // ---- ingest-docs
  auto* ingest_docs = app.add_subcommand("ingest-docs", "Parse hOCR or JSON documents");
  std::vector<std::string> doc_inputs;
  std::string docs_out;
  std::string doc_format = "auto";
  ingest_docs->add_option("inputs", doc_inputs, "hOCR (.html/.hocr) or document JSON files")
      ->required()
      ->check(CLI::ExistingFile);
  ingest_docs->add_option("--format", doc_format, "Input format")
      ->check(CLI::IsMember({"auto", "hocr", "json"}))
      ->capture_default_str();
  ingest_docs->add_option("--out", docs_out, "Output documents (JSON lines)")->required();
  ingest_docs->callback([&] {
    echo_beside(docs_out);
    action = [&] {
      std::vector<Document> docs;
      std::set<std::string> ids;
      for (const auto& path : doc_inputs) {
        const std::filesystem::path p(path);
        std::string fmt = doc_format;
        if (fmt == "auto") fmt = p.extension() == ".json" ? "json" : "hocr";
        const auto bytes = read_file(path);
        Document doc;
        if (fmt == "json") {
          doc = parse_doc_json(bytes);
        } else {
          HocrDiagnostics diag;
          doc = parse_hocr(bytes, p.stem().string(), &diag);
          if (diag.skipped_words > 0 || diag.enclosure_repairs > 0) {
            err << path << ": skipped " << diag.skipped_words << " word(s), repaired "
                << diag.enclosure_repairs << " bounding box(es)\n";
          }
        }
        if (!ids.insert(doc.doc_id).second) {
          throw ValidationError("duplicate document id \"" + doc.doc_id + "\" (" + path + ")");
        }
        docs.push_back(std::move(doc));
      }
      detail::write_output(docs_out, documents_jsonl(docs));
      out << "wrote " << docs.size() << " documents to " << docs_out << "\n";
    };
  });

  // ---- ingest-db
  auto* ingest_db = app.add_subcommand("ingest-db", "Validate and normalize a JSON table");
  std::string db_in, db_out;
  ingest_db->add_option("--input", db_in, "Table JSON (array of flat objects)")
      ->required()
      ->check(CLI::ExistingFile);
  ingest_db->add_option("--out", db_out, "Normalized table JSON")->required();
  ingest_db->callback([&] {
    echo_beside(db_out);
    action = [&] {
      const auto table = detail::load_db(db_in);
      detail::write_output(db_out, serialize_table(table));
      out << "schema (" << table.schema.arity() << "):";
      for (const auto& a : table.schema.attributes) out << " " << a;
      out << "\n" << table.tuples.size() << " tuples written to " << db_out << "\n";
    };
  });

  // Shared artifact options.
  std::string docs_path, db_path, emb_path, model_path, index_path, pairs_path, out_path;
  auto add_corpus_opts = [&](CLI::App* sub) {
    sub->add_option("--docs", docs_path, "Documents (JSON lines)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--db", db_path, "Table JSON")->required()->check(CLI::ExistingFile);
  };
  auto add_emb_opt = [&](CLI::App* sub) {
    sub->add_option("--emb", emb_path, "Embeddings from encode (JEMB)")
        ->required()
        ->check(CLI::ExistingFile);
  };

  // ---- encode
  auto* encode = app.add_subcommand("encode", "Embed document spans and table tuples");
  add_corpus_opts(encode);
  std::string provider_kind = "hash";
  std::size_t dim = 768;
  std::vector<std::string> emb_inputs;
  encode->add_option("--provider", provider_kind, "Embedding provider")
      ->check(CLI::IsMember({"hash", "file"}))
      ->capture_default_str();
  encode->add_option("--dim", dim, "Embedding dimension")
      ->check(CLI::Range(static_cast<std::size_t>(kMinDimension), std::size_t{1} << 20))
      ->capture_default_str();
  encode->add_option("--emb-input", emb_inputs, "Precomputed JEMB files (file provider)")
      ->check(CLI::ExistingFile);
  encode->add_option("--out", out_path, "Output embeddings (JEMB)")->required();
  encode->callback([&] {
    if (provider_kind == "file" && emb_inputs.empty()) {
      throw CLI::ValidationError("--emb-input", "required by the file provider");
    }
    echo_beside(out_path);
    action = [&] {
      const auto docs = detail::load_docs(docs_path);
      const auto table = detail::load_db(db_path);
      std::unique_ptr<EmbeddingProvider> provider;
      if (provider_kind == "hash") {
        provider = std::make_unique<HashProvider>(dim);
      } else {
        provider = std::make_unique<FileProvider>(FileProvider::from_files(emb_inputs, dim));
      }
      const auto corpus = EncodedCorpus::encode(docs, table, *provider, threads);
      EmbeddingMap map;
      for (const auto& d : corpus.documents()) {
        for (std::size_t i = 0; i < d.spans.size(); ++i) map.emplace(span_key(d.doc_id, i), d.spans[i]);
      }
      for (std::size_t t = 0; t < table.tuples.size(); ++t) {
        map.emplace(tuple_key(table.tuples[t].tuple_id), corpus.tuples()[t]);
      }
      detail::write_output(out_path, encode_jemb(map, dim));
      out << "wrote " << map.size() << " embeddings (d=" << dim << ") to " << out_path << "\n";
    };
  });

  // ---- train
  auto* train_cmd = app.add_subcommand("train", "Fit the projection model with the triplet loss");
  add_corpus_opts(train_cmd);
  add_emb_opt(train_cmd);
  TrainConfig tc;
  tc.seed = 7;
  std::string val_path, log_path;
  std::optional<double> hinge;
  train_cmd->add_option("--train", pairs_path, "Labeled training spans (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--val", val_path, "Labeled validation spans (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_path, "Output checkpoint (JPRJ)")->required();
  train_cmd->add_option("--log", log_path, "Training log (default: <out>.log.jsonl)");
  train_cmd->add_option("--lr", tc.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--batch", tc.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--epochs", tc.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--lambda", tc.lambda, "Negative-term weight")->capture_default_str();
  train_cmd->add_option("--weight-decay", tc.weight_decay, "Decoupled weight decay")
      ->capture_default_str();
  train_cmd->add_option("--beta1", tc.beta1, "Adam beta1")->capture_default_str();
  train_cmd->add_option("--beta2", tc.beta2, "Adam beta2")->capture_default_str();
  train_cmd->add_option("--patience", tc.patience, "Early-stopping patience (epochs)")
      ->capture_default_str();
  train_cmd->add_option("--hinge-margin", hinge, "Clamp the loss at -margin (default: off)");
  train_cmd->add_option("--seed", tc.seed, "Seed for initialization, shuffling and negatives")
      ->capture_default_str();
  train_cmd->callback([&] {
    echo_beside(out_path);
    action = [&] {
      tc.hinge_margin = hinge;
      const auto e = detail::load_encoded(docs_path, db_path, emb_path, threads);
      const auto train_pairs = detail::load_pairs(pairs_path);
      const auto val_pairs = detail::load_pairs(val_path);
      const auto tt = make_triplets(train_pairs, e.table, tc.seed);
      const auto vt = make_triplets(val_pairs, e.table, tc.seed + 1);
      const auto ts = resolve_triplets(tt, *e.corpus);
      const auto vs = resolve_triplets(vt, *e.corpus);
      const auto result = train(ts, vs, tc);
      detail::write_output(out_path, encode_jprj(result.model));
      detail::write_output(log_path.empty() ? out_path + ".log.jsonl" : log_path,
                           training_log_jsonl(result.log));
      out << "epochs run " << result.epochs_run << ", best epoch " << result.best_epoch
          << ", validation loss " << result.log.front().val_loss << " -> "
          << result.log[result.best_epoch].val_loss << "\n";
    };
  });

  // ---- build-index
  auto* build = app.add_subcommand("build-index", "Build the attention index from training matches");
  add_corpus_opts(build);
  add_emb_opt(build);
  IndexParams ip;
  std::optional<double> eps;
  build->add_option("--model", model_path, "Projection checkpoint (JPRJ)")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--train", pairs_path, "Labeled training spans (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--eps", eps, "DBSCAN radius (default: half the median pairwise distance)")
      ->check(CLI::PositiveNumber);
  build->add_option("--min-pts", ip.min_pts, "DBSCAN core-point threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  build->add_option("--out", out_path, "Output index (JIDX)")->required();
  build->callback([&] {
    echo_beside(out_path);
    action = [&] {
      ip.eps = eps;
      const auto e = detail::load_encoded(docs_path, db_path, emb_path, threads);
      const auto model = read_model(model_path);
      const auto pairs = detail::load_pairs(pairs_path);
      const auto matches = training_matches(pairs, *e.corpus, model);
      const auto index = build_index(matches, model, e.table, e.corpus->tuples(), ip);
      detail::write_output(out_path, encode_jidx(index));
      out << "index: " << index.span_store.centroid_count() << " span centroids, "
          << index.tuple_store.centroid_count() << " tuple centroids\n";
    };
  });

  // ---- match
  auto* match = app.add_subcommand("match", "Match documents against the table");
  add_corpus_opts(match);
  add_emb_opt(match);
  MatchOptions mo;
  std::optional<std::size_t> top_k;
  bool no_attention = false, no_visual = false, no_timing = false;
  match->add_option("--model", model_path, "Projection checkpoint (JPRJ)")
      ->required()
      ->check(CLI::ExistingFile);
  match->add_option("--index", index_path, "Attention index (JIDX)")->check(CLI::ExistingFile);
  match->add_option("--k-spans", mo.k_spans, "Spans kept by span attention")->capture_default_str();
  match->add_option("--k-tuples", mo.k_tuples, "Tuples kept per span by tuple attention")
      ->capture_default_str();
  match->add_option("--top-k", top_k, "Truncate each ranking to k tuples");
  match->add_flag("--no-attention", no_attention, "Disable pruning (compare against every tuple)");
  match->add_flag("--no-visual", no_visual, "Zero the visual row of every span");
  match->add_flag("--no-timing", no_timing, "Write latency as 0 for byte-stable output");
  match->add_option("--out", out_path, "Output matches (JSON lines)")->required();
  match->callback([&] {
    if (!no_attention && index_path.empty()) {
      throw CLI::ValidationError("--index", "required unless --no-attention is given");
    }
    echo_beside(out_path);
    action = [&] {
      mo.top_k = top_k;
      mo.use_attention = !no_attention;
      mo.use_visual = !no_visual;
      mo.record_latency = !no_timing;
      const auto e = detail::load_encoded(docs_path, db_path, emb_path, threads);
      const auto model = read_model(model_path);
      std::optional<AttentionIndex> index;
      if (mo.use_attention) index = read_index(index_path);
      const Matcher matcher(e.table, e.corpus->tuples(), model, index ? &*index : nullptr);
      const auto res = match_corpus(e.corpus->documents(), matcher, mo, threads);
      detail::write_output(out_path, match_results_jsonl(res.results));
      out << "matched " << res.results.size() << " documents, mean comparisons "
          << res.mean_comparisons << "\n";
    };
  });

  // ---- eval
  auto* eval = app.add_subcommand("eval", "Score matches against gold labels");
  std::string matches_path, gold_path, ks_text = "1,5,20";
  eval->add_option("--matches", matches_path, "Matches (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--gold", gold_path, "Gold labels (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--ks", ks_text, "Comma-separated cutoffs")->capture_default_str();
  eval->add_option("--out", out_path, "Output report (JSON)")->required();
  eval->callback([&] {
    const auto ks = detail::parse_size_list(ks_text, "--ks");
    for (std::size_t k : ks)
      if (k == 0) throw CLI::ValidationError("--ks", "cutoffs must be positive");
    echo_beside(out_path);
    action = [&, ks] {
      const auto results = parse_match_results(read_file(matches_path));
      const auto gold = parse_gold(read_file(gold_path));
      const auto rep = evaluate(results, gold, ks);
      if (rep.missing_results > 0) {
        err << "warning: " << rep.missing_results << " gold document(s) have no result\n";
      }
      detail::write_output(out_path, report_json(rep).dump(2) + "\n");
      for (const auto& m : rep.metrics) {
        out << "k=" << m.k << " precision " << m.precision << " recall " << m.recall << " f1 "
            << m.f1 << "\n";
      }
    };
  });

  // ---- bench
  auto* bench = app.add_subcommand(
      "bench", "Synthetic benchmarks: pruning economics and label efficiency");
  std::string sizes_text = "1000,10000", label_sizes_text;
  std::size_t bench_docs = 5, bench_words = 50, bench_dim = 64;
  std::uint64_t bench_seed = 7;
  bench->add_option("--db-sizes", sizes_text, "Comma-separated table sizes")->capture_default_str();
  bench->add_option("--docs", bench_docs, "Documents per corpus")->capture_default_str();
  bench->add_option("--words", bench_words, "Words (spans) per document")->capture_default_str();
  bench->add_option("--dim", bench_dim, "Embedding dimension")
      ->check(CLI::Range(static_cast<std::size_t>(kMinDimension), std::size_t{1} << 20))
      ->capture_default_str();
  bench->add_option("--seed", bench_seed, "Random seed")->capture_default_str();
  bench->add_option("--label-sizes", label_sizes_text,
                    "Run the label-efficiency curve at these training sizes instead");
  bench->add_option("--out", out_path, "Output (JSON)")->required();
  bench->callback([&] {
    const auto sizes = detail::parse_size_list(label_sizes_text.empty() ? sizes_text : label_sizes_text,
                                               label_sizes_text.empty() ? "--db-sizes" : "--label-sizes");
    echo_beside(out_path);
    action = [&, sizes] {
      const HashProvider provider(bench_dim);
      TrainConfig cfg;
      cfg.seed = bench_seed;
      nlohmann::json report;
      if (!label_sizes_text.empty()) {
        SynthConfig sc;
        sc.seed = bench_seed;
        sc.train_pairs = *std::max_element(sizes.begin(), sizes.end());
        const auto s = generate_synthetic(sc);
        const auto corpus = EncodedCorpus::encode(s.docs, s.table, provider, threads);
        LabelEfficiencyInputs in;
        in.corpus = &corpus;
        in.pool = s.train;
        in.validation = s.val;
        in.gold = s.gold;
        in.train = cfg;
        in.threads = threads;
        report = nlohmann::json::array();
        for (const auto& p : label_efficiency_curve(in, sizes)) {
          report.push_back({{"size", p.size}, {"f1_at_1", p.f1_at_1}, {"val_loss", p.final_val_loss}});
          out << "size " << p.size << " F1@1 " << p.f1_at_1 << "\n";
        }
      } else {
        std::vector<BenchRow> rows;
        for (std::size_t n : sizes) {
          SynthConfig sc;
          sc.seed = bench_seed;
          sc.tuples = n;
          sc.docs = bench_docs;
          sc.words_per_doc = bench_words;
          // Few long documents: every planted span is labeled, the last
          // fifth (round-robin order) is held out for validation.
          sc.train_pairs = std::numeric_limits<std::size_t>::max();
          auto s = generate_synthetic(sc);
          const auto held = std::max<std::size_t>(1, s.train.size() / 5);
          s.val.assign(s.train.end() - static_cast<std::ptrdiff_t>(held), s.train.end());
          s.train.resize(s.train.size() - held);
          const auto corpus = EncodedCorpus::encode(s.docs, s.table, provider, threads);
          const auto ts = resolve_triplets(make_triplets(s.train, s.table, cfg.seed), corpus);
          const auto vs = resolve_triplets(make_triplets(s.val, s.table, cfg.seed + 1), corpus);
          const auto model = train(ts, vs, cfg).model;
          const auto index =
              build_index(training_matches(s.train, corpus, model), model, s.table, corpus.tuples());
          const BenchCase c{n, &corpus, &model, &index};
          const auto r = bench_pruning(std::span<const BenchCase>(&c, 1), {}, threads);
          rows.insert(rows.end(), r.begin(), r.end());
          out << "db " << n << ": comparisons " << r[0].comparisons_unpruned << " -> "
              << r[0].comparisons_pruned << " (x" << r[0].comparison_ratio << "), latency x"
              << r[0].latency_ratio << "\n";
        }
        report = bench_json(rows);
      }
      detail::write_output(out_path, report.dump(2) + "\n");
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!echo_path.empty()) {
      // Resolved configuration: global options, then the selected subcommand
      // as a TOML table.
      std::string echo = "threads=" + std::to_string(threads) + "\n";
      for (const auto* sub : app.get_subcommands()) {
        echo += "[" + sub->get_name() + "]\n" + sub->config_to_str(true, false);
      }
      detail::write_output(echo_path, echo);
    }
    if (action) action();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace juno::cli
