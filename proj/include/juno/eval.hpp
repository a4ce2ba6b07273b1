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

// Evaluation: precision/recall/F1 at k, label-efficiency curves and the
// pruning benchmark.
//
// Precision@k is the fraction of gold documents whose top-k ranking contains
// the gold tuple. Recall is the fraction of gold documents that received a
// non-empty ranking (an answer-rate, not IR recall).

#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "juno/corpus.hpp"
#include "juno/pipeline.hpp"

namespace juno {

inline double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

struct MetricsAtK {
  std::size_t k = 1;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::vector<MetricsAtK> metrics;
  double mean_latency_ms = 0.0;
  double mean_comparisons = 0.0;
  std::size_t corpus_size = 0;
  std::size_t missing_results = 0;  // gold documents with no result (counted as misses)

  const MetricsAtK& at(std::size_t k) const {
    for (const auto& m : metrics)
      if (m.k == k) return m;
    throw Error("no metrics for k=" + std::to_string(k));
  }
};

inline const std::vector<std::size_t>& default_ks() {
  static const std::vector<std::size_t> ks{1, 5, 20};
  return ks;
}

inline EvalReport evaluate(std::span<const MatchResult> results, const GoldLabels& gold,
                           std::span<const std::size_t> ks = default_ks()) {
  std::map<std::string, const MatchResult*> by_doc;
  for (const auto& r : results) by_doc.emplace(r.doc_id, &r);

  EvalReport rep;
  rep.corpus_size = gold.size();
  std::vector<std::size_t> hits(ks.size(), 0);
  std::size_t answered = 0;
  double latency = 0.0;
  double comparisons = 0.0;
  std::size_t found = 0;
  for (const auto& [doc, tuple] : gold) {
    auto it = by_doc.find(doc);
    if (it == by_doc.end()) {
      ++rep.missing_results;
      continue;
    }
    const auto& r = *it->second;
    ++found;
    latency += r.latency_ms;
    comparisons += static_cast<double>(r.comparisons);
    if (!r.ranking.empty()) ++answered;
    for (std::size_t q = 0; q < ks.size(); ++q) {
      const std::size_t limit = std::min(ks[q], r.ranking.size());
      for (std::size_t i = 0; i < limit; ++i) {
        if (r.ranking[i].tuple_id == tuple) {
          ++hits[q];
          break;
        }
      }
    }
  }
  const double n = static_cast<double>(gold.size());
  for (std::size_t q = 0; q < ks.size(); ++q) {
    MetricsAtK m;
    m.k = ks[q];
    m.precision = gold.empty() ? 0.0 : static_cast<double>(hits[q]) / n;
    m.recall = gold.empty() ? 0.0 : static_cast<double>(answered) / n;
    m.f1 = f1_score(m.precision, m.recall);
    rep.metrics.push_back(m);
  }
  if (found > 0) {
    rep.mean_latency_ms = latency / static_cast<double>(found);
    rep.mean_comparisons = comparisons / static_cast<double>(found);
  }
  return rep;
}

inline nlohmann::json report_json(const EvalReport& rep) {
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& m : rep.metrics) {
    metrics.push_back({{"k", m.k}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}});
  }
  return {{"metrics", metrics},
          {"mean_latency_ms", rep.mean_latency_ms},
          {"mean_comparisons", rep.mean_comparisons},
          {"corpus_size", rep.corpus_size},
          {"missing_results", rep.missing_results}};
}

// ---------------------------------------------------------------------------
// Label efficiency

struct LabelEfficiencyInputs {
  const EncodedCorpus* corpus = nullptr;
  std::vector<LabeledSpan> pool;        // training pairs; prefixes are used
  std::vector<LabeledSpan> validation;  // fixed validation pairs
  GoldLabels gold;                      // evaluation documents
  TrainConfig train;
  IndexParams index;
  MatchOptions match;
  std::size_t threads = 1;
};

struct CurvePoint {
  std::size_t size = 0;
  double f1_at_1 = 0.0;
  double final_val_loss = 0.0;
};

// Trains a fresh model on each pool prefix, builds its index and reports F1@1
// on the gold documents.
inline std::vector<CurvePoint> label_efficiency_curve(const LabelEfficiencyInputs& in,
                                                      std::span<const std::size_t> sizes) {
  if (!in.corpus) throw Error("label efficiency: no corpus");
  if (sizes.empty()) throw ValidationError("label efficiency: no sizes given");
  std::set<std::size_t> seen;
  for (std::size_t s : sizes) {
    if (s == 0 || s > in.pool.size()) {
      throw ValidationError("label efficiency: size " + std::to_string(s) +
                            " outside [1, pool size " + std::to_string(in.pool.size()) + "]");
    }
    if (!seen.insert(s).second) {
      throw ValidationError("label efficiency: duplicate size " + std::to_string(s));
    }
  }
  const auto& corpus = *in.corpus;
  const auto val_triplets = make_triplets(in.validation, corpus.table(), in.train.seed + 1);
  const auto val = resolve_triplets(val_triplets, corpus);

  std::vector<EncodedDocument> eval_docs;
  for (const auto& [doc, tuple] : in.gold) eval_docs.push_back(corpus.document(doc));

  std::vector<CurvePoint> out;
  for (std::size_t s : sizes) {
    const std::span<const LabeledSpan> prefix(in.pool.data(), s);
    const auto triplets = make_triplets(prefix, corpus.table(), in.train.seed);
    const auto samples = resolve_triplets(triplets, corpus);
    const auto trained = train(samples, val, in.train);
    const auto matches = training_matches(prefix, corpus, trained.model);
    const auto index = build_index(matches, trained.model, corpus.table(), corpus.tuples(), in.index);
    const Matcher matcher(corpus.table(), corpus.tuples(), trained.model, &index);
    const auto res = match_corpus(eval_docs, matcher, in.match, in.threads);
    const auto rep = evaluate(res.results, in.gold, std::vector<std::size_t>{1});
    out.push_back({s, rep.at(1).f1, trained.log.back().val_loss});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pruning benchmark

struct BenchCase {
  std::size_t db_size = 0;
  const EncodedCorpus* corpus = nullptr;
  const ProjectionModel* model = nullptr;
  const AttentionIndex* index = nullptr;
};

struct BenchRow {
  std::size_t db_size = 0;
  std::size_t documents = 0;
  double comparisons_pruned = 0.0;  // mean per document
  double comparisons_unpruned = 0.0;
  std::size_t max_comparisons_pruned = 0;
  double latency_pruned_ms = 0.0;  // mean per document
  double latency_unpruned_ms = 0.0;
  double comparison_ratio = 0.0;  // unpruned / pruned
  double latency_ratio = 0.0;
};

// Runs every document of each case with and without attention pruning.
inline std::vector<BenchRow> bench_pruning(std::span<const BenchCase> cases,
                                           const MatchOptions& base = {}, std::size_t threads = 1) {
  std::vector<BenchRow> rows;
  for (const auto& c : cases) {
    const Matcher matcher(c.corpus->table(), c.corpus->tuples(), *c.model, c.index);
    MatchOptions pruned = base;
    pruned.use_attention = true;
    pruned.record_latency = true;
    MatchOptions full = pruned;
    full.use_attention = false;
    const auto& docs = c.corpus->documents();
    const auto rp = match_corpus(docs, matcher, pruned, threads);
    const auto ru = match_corpus(docs, matcher, full, threads);
    BenchRow row;
    row.db_size = c.db_size;
    row.documents = docs.size();
    row.comparisons_pruned = rp.mean_comparisons;
    row.comparisons_unpruned = ru.mean_comparisons;
    for (const auto& r : rp.results) {
      row.max_comparisons_pruned = std::max(row.max_comparisons_pruned, r.comparisons);
    }
    row.latency_pruned_ms = rp.latency.mean_ms;
    row.latency_unpruned_ms = ru.latency.mean_ms;
    row.comparison_ratio =
        row.comparisons_pruned > 0.0 ? row.comparisons_unpruned / row.comparisons_pruned : 0.0;
    row.latency_ratio =
        row.latency_pruned_ms > 0.0 ? row.latency_unpruned_ms / row.latency_pruned_ms : 0.0;
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json bench_json(std::span<const BenchRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"db_size", r.db_size},
                   {"documents", r.documents},
                   {"comparisons_pruned", r.comparisons_pruned},
                   {"comparisons_unpruned", r.comparisons_unpruned},
                   {"max_comparisons_pruned", r.max_comparisons_pruned},
                   {"latency_pruned_ms", r.latency_pruned_ms},
                   {"latency_unpruned_ms", r.latency_unpruned_ms},
                   {"comparison_ratio", r.comparison_ratio},
                   {"latency_ratio", r.latency_ratio}});
  }
  return out;
}

}  // namespace juno
