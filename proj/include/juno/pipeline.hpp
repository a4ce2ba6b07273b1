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

// End-to-end matching. Spans are pruned with span attention, each surviving
// span prunes the table with tuple attention, the survivors are aligned
// exhaustively, and span-level winners are aggregated into a document-level
// ranking by majority vote.

#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "juno/alignment.hpp"
#include "juno/attention_index.hpp"
#include "juno/corpus.hpp"

namespace juno {

struct MatchOptions {
  std::size_t k_spans = kDefaultSpanK;
  std::size_t k_tuples = kDefaultTupleK;
  std::optional<std::size_t> top_k;
  bool use_attention = true;
  bool use_visual = true;
  bool record_latency = true;
};

struct SpanWinner {
  std::size_t span = 0;
  std::string tuple_id;
  double distance = 0.0;
  std::size_t attribute = 0;  // i*
  std::size_t span_row = 0;   // j*
  bool operator==(const SpanWinner&) const = default;
};

struct RankedTuple {
  std::string tuple_id;
  std::size_t votes = 0;
  double best_distance = 0.0;
  double total_distance = 0.0;
  bool operator==(const RankedTuple&) const = default;
};

struct MatchResult {
  std::string doc_id;
  std::vector<RankedTuple> ranking;
  std::vector<SpanWinner> winners;
  std::size_t retained_spans = 0;
  std::size_t comparisons = 0;
  double latency_ms = 0.0;

  // Equality ignores wall-clock latency.
  bool operator==(const MatchResult& o) const {
    return doc_id == o.doc_id && ranking == o.ranking && winners == o.winners &&
           retained_spans == o.retained_spans && comparisons == o.comparisons;
  }
};

// Majority vote. Ranked by votes (desc), then summed distance (asc), then
// tuple id (asc).
inline std::vector<RankedTuple> aggregate(std::span<const SpanWinner> winners) {
  std::map<std::string, RankedTuple> acc;
  for (const auto& w : winners) {
    auto [it, fresh] = acc.try_emplace(w.tuple_id, RankedTuple{w.tuple_id, 0, w.distance, 0.0});
    auto& r = it->second;
    ++r.votes;
    r.best_distance = std::min(r.best_distance, w.distance);
    r.total_distance += w.distance;
  }
  std::vector<RankedTuple> out;
  out.reserve(acc.size());
  for (auto& [id, r] : acc) out.push_back(std::move(r));
  std::sort(out.begin(), out.end(), [](const RankedTuple& a, const RankedTuple& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    if (a.total_distance != b.total_distance) return a.total_distance < b.total_distance;
    return a.tuple_id < b.tuple_id;
  });
  return out;
}

// A table prepared for matching: projected tuples, ids and (optionally) the
// attention index with its tuple assignments. Immutable and shareable.
class Matcher {
 public:
  Matcher(const Table& table, std::span<const Matrix> table_embeddings,
          const ProjectionModel& model, const AttentionIndex* index = nullptr)
      : model_(model), index_(index) {
    if (table.tuples.empty()) throw ValidationError("cannot match against an empty table");
    if (table_embeddings.size() != table.tuples.size()) {
      throw Error("matcher: table embeddings and tuples differ in count");
    }
    projected_.reserve(table.tuples.size());
    for (std::size_t t = 0; t < table.tuples.size(); ++t) {
      if (table_embeddings[t].cols != model.dim) {
        throw DimensionError("tuple \"" + table.tuples[t].tuple_id +
                             "\" embedding does not match model dimension");
      }
      projected_.push_back(project_tuple(table_embeddings[t], model));
      ids_.push_back(table.tuples[t].tuple_id);
    }
    if (index_) {
      if (index_->dim != model.dim) throw DimensionError("index dimension does not match model");
      assignments_ = assignments_for(*index_, table);
    }
  }

  std::size_t tuple_count() const { return ids_.size(); }

  MatchResult match(std::string_view doc_id, std::span<const Matrix> spans,
                    const MatchOptions& opt) const {
    const auto start = std::chrono::steady_clock::now();
    MatchResult result;
    result.doc_id = std::string(doc_id);
    const bool attend = opt.use_attention;
    if (attend && !index_) throw Error("attention requested but no index was provided");

    std::vector<Matrix> local;
    std::span<const Matrix> input = spans;
    if (!opt.use_visual) {
      local.assign(spans.begin(), spans.end());
      for (auto& m : local) std::fill(m.row(3).begin(), m.row(3).end(), 0.0);
      input = local;
    }

    std::vector<std::size_t> span_ids;
    if (attend) {
      span_ids = attend_spans(input, *index_, opt.k_spans).retained;
    } else {
      span_ids.resize(input.size());
      std::iota(span_ids.begin(), span_ids.end(), std::size_t{0});
    }
    result.retained_spans = span_ids.size();

    // Tuple attention depends only on the projected span, so repeated spans
    // within a document share one evaluation.
    std::map<std::vector<double>, std::vector<std::size_t>> tuple_cache;
    std::vector<std::size_t> all_tuples;
    if (!attend) {
      all_tuples.resize(ids_.size());
      std::iota(all_tuples.begin(), all_tuples.end(), std::size_t{0});
    }

    for (std::size_t s : span_ids) {
      const Matrix pw = project_span(input[s], model_);
      const std::vector<std::size_t>* candidates = &all_tuples;
      if (attend) {
        auto it = tuple_cache.find(pw.values);
        if (it == tuple_cache.end()) {
          it = tuple_cache
                   .emplace(pw.values, attend_tuples(pw, *index_, assignments_, opt.k_tuples).retained)
                   .first;
        }
        candidates = &it->second;
      }
      std::optional<std::size_t> best;
      Alignment best_a;
      for (std::size_t t : *candidates) {
        const auto a = align_distance(pw, projected_[t]);
        ++result.comparisons;
        if (!best || a.distance < best_a.distance ||
            (a.distance == best_a.distance && ids_[t] < ids_[*best])) {
          best = t;
          best_a = a;
        }
      }
      if (best) {
        result.winners.push_back({s, ids_[*best], best_a.distance, best_a.attribute, best_a.span_row});
      }
    }
    result.ranking = aggregate(result.winners);
    if (opt.top_k && result.ranking.size() > *opt.top_k) result.ranking.resize(*opt.top_k);
    if (opt.record_latency) {
      result.latency_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    return result;
  }

 private:
  ProjectionModel model_;
  const AttentionIndex* index_;
  std::vector<Matrix> projected_;
  std::vector<std::string> ids_;
  TupleAssignments assignments_;
};

inline MatchResult match_document(const EncodedDocument& doc, const Table& table,
                                  std::span<const Matrix> table_embeddings,
                                  const ProjectionModel& model, const AttentionIndex* index,
                                  const MatchOptions& opt = {}) {
  return Matcher(table, table_embeddings, model, index).match(doc.doc_id, doc.spans, opt);
}

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
};

struct CorpusResult {
  std::vector<MatchResult> results;  // ordered by doc_id
  LatencyStats latency;
  double mean_comparisons = 0.0;
};

inline LatencyStats latency_stats(std::span<const MatchResult> results) {
  LatencyStats s;
  if (results.empty()) return s;
  std::vector<double> l;
  for (const auto& r : results) l.push_back(r.latency_ms);
  std::sort(l.begin(), l.end());
  s.mean_ms = std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
  auto q = [&](double p) {
    return l[std::min(l.size() - 1, static_cast<std::size_t>(p * static_cast<double>(l.size())))];
  };
  s.p50_ms = q(0.5);
  s.p95_ms = q(0.95);
  s.max_ms = l.back();
  return s;
}

// Matches every document independently (in parallel when threads > 1).
inline CorpusResult match_corpus(std::span<const EncodedDocument> docs, const Matcher& matcher,
                                 const MatchOptions& opt, std::size_t threads = 1) {
  CorpusResult out;
  out.results.resize(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    out.results[i] = matcher.match(docs[i].doc_id, docs[i].spans, opt);
  });
  std::sort(out.results.begin(), out.results.end(),
            [](const MatchResult& a, const MatchResult& b) { return a.doc_id < b.doc_id; });
  out.latency = latency_stats(out.results);
  if (!out.results.empty()) {
    double c = 0.0;
    for (const auto& r : out.results) c += static_cast<double>(r.comparisons);
    out.mean_comparisons = c / static_cast<double>(out.results.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON-lines: {"doc_id", "ranking": [{"tuple_id", "votes", "distance"}],
// "comparisons", "latency_ms"}

inline nlohmann::json match_result_json(const MatchResult& r) {
  nlohmann::json ranking = nlohmann::json::array();
  for (const auto& t : r.ranking) {
    ranking.push_back({{"tuple_id", t.tuple_id}, {"votes", t.votes}, {"distance", t.best_distance}});
  }
  return {{"doc_id", r.doc_id},
          {"ranking", ranking},
          {"comparisons", r.comparisons},
          {"latency_ms", r.latency_ms}};
}

inline std::string match_results_jsonl(std::span<const MatchResult> results) {
  std::string out;
  for (const auto& r : results) out += match_result_json(r).dump() + "\n";
  return out;
}

inline std::vector<MatchResult> parse_match_results(std::string_view text) {
  std::vector<MatchResult> out;
  detail::for_each_jsonl(text, "match results", [&](const nlohmann::json& j) {
    MatchResult r;
    r.doc_id = j.at("doc_id").get<std::string>();
    for (const auto& t : j.at("ranking")) {
      RankedTuple rt;
      rt.tuple_id = detail::id_string(t.at("tuple_id"));
      rt.votes = t.at("votes").get<std::size_t>();
      rt.best_distance = t.at("distance").get<double>();
      r.ranking.push_back(std::move(rt));
    }
    r.comparisons = j.at("comparisons").get<std::size_t>();
    r.latency_ms = j.at("latency_ms").get<double>();
    out.push_back(std::move(r));
  });
  return out;
}

}  // namespace juno
