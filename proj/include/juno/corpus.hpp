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

// Encoded corpora and labeled data: documents and tables together with their
// embeddings, gold span/tuple pairs, triplet construction and the JSON-lines
// readers and writers for labels.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "juno/alignment.hpp"
#include "juno/attention_index.hpp"
#include "juno/doc_model.hpp"
#include "juno/encoders.hpp"

namespace juno {

// A word of a document annotated with its matching tuple.
struct LabeledSpan {
  std::string doc_id;
  std::size_t word_index = 0;
  std::string tuple_id;
  bool operator==(const LabeledSpan&) const = default;
};

struct TrainingTriplet {
  LabeledSpan span;
  std::string negative_id;
  bool operator==(const TrainingTriplet&) const = default;
};

struct EncodedDocument {
  std::string doc_id;
  std::vector<Matrix> spans;
};

// Embeddings of a document collection and a table, addressable by id.
class EncodedCorpus {
 public:
  EncodedCorpus() = default;
  EncodedCorpus(std::vector<EncodedDocument> docs, const Table& table, std::vector<Matrix> tuples)
      : docs_(std::move(docs)), table_(&table), tuples_(std::move(tuples)) {
    if (tuples_.size() != table.tuples.size()) {
      throw Error("encoded corpus: tuple embeddings and table differ in count");
    }
    for (std::size_t i = 0; i < docs_.size(); ++i) {
      if (!by_id_.emplace(docs_[i].doc_id, i).second) {
        throw ValidationError("duplicate document id \"" + docs_[i].doc_id + "\"");
      }
    }
  }

  static EncodedCorpus encode(std::span<const Document> docs, const Table& table,
                              const EmbeddingProvider& provider, std::size_t threads = 1) {
    std::vector<EncodedDocument> enc(docs.size());
    parallel_for(docs.size(), threads, [&](std::size_t i) {
      enc[i] = {docs[i].doc_id, encode_document(docs[i], provider)};
    });
    return EncodedCorpus(std::move(enc), table, encode_table(table, provider, threads));
  }

  const std::vector<EncodedDocument>& documents() const { return docs_; }
  const Table& table() const { return *table_; }
  const std::vector<Matrix>& tuples() const { return tuples_; }

  const EncodedDocument& document(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    if (it == by_id_.end()) throw ValidationError("unknown document \"" + std::string(doc_id) + "\"");
    return docs_[it->second];
  }

  const Matrix& span(std::string_view doc_id, std::size_t word_index) const {
    const auto& d = document(doc_id);
    if (word_index >= d.spans.size()) {
      throw ValidationError("word index " + std::to_string(word_index) + " out of range in \"" +
                            std::string(doc_id) + "\"");
    }
    return d.spans[word_index];
  }

  const Matrix& tuple(std::string_view tuple_id) const {
    const auto t = table_->find(tuple_id);
    if (!t) throw ValidationError("unknown tuple \"" + std::string(tuple_id) + "\"");
    return tuples_[*t];
  }

  // Visual-feature ablation: zero row 3 of every span matrix.
  void zero_visual_rows() {
    for (auto& d : docs_)
      for (auto& m : d.spans)
        std::fill(m.row(3).begin(), m.row(3).end(), 0.0);
  }

 private:
  std::vector<EncodedDocument> docs_;
  std::map<std::string, std::size_t> by_id_;
  const Table* table_ = nullptr;
  std::vector<Matrix> tuples_;
};

// Pairs each labeled span with a uniformly sampled non-matching tuple.
inline std::vector<TrainingTriplet> make_triplets(std::span<const LabeledSpan> pairs,
                                                  const Table& table, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingTriplet> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p, sample_negative(table, p.tuple_id, rng)});
  return out;
}

inline std::vector<TripletSample> resolve_triplets(std::span<const TrainingTriplet> triplets,
                                                   const EncodedCorpus& corpus) {
  std::vector<TripletSample> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) {
    if (t.span.tuple_id == t.negative_id) {
      throw ValidationError("triplet positive and negative tuples are identical");
    }
    out.push_back({&corpus.span(t.span.doc_id, t.span.word_index), &corpus.tuple(t.span.tuple_id),
                   &corpus.tuple(t.negative_id)});
  }
  return out;
}

inline std::vector<TrainingMatch> training_matches(std::span<const LabeledSpan> pairs,
                                                   const EncodedCorpus& corpus,
                                                   const ProjectionModel& model) {
  std::vector<TrainingMatch> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back(make_training_match(corpus.span(p.doc_id, p.word_index),
                                      corpus.tuple(p.tuple_id), model));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON-lines I/O

namespace detail {

template <typename F>
void for_each_jsonl(std::string_view text, const std::string& what, F&& f) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(what + " line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      f(j);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(what + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::string id_string(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace detail

// Labeled spans: {"doc_id": ..., "word_index": ..., "tuple_id": ...} per line.
inline std::vector<LabeledSpan> parse_labeled_spans(std::string_view text) {
  std::vector<LabeledSpan> out;
  detail::for_each_jsonl(text, "labeled spans", [&](const nlohmann::json& j) {
    out.push_back({j.at("doc_id").get<std::string>(), j.at("word_index").get<std::size_t>(),
                   detail::id_string(j.at("tuple_id"))});
  });
  return out;
}

inline std::string labeled_spans_jsonl(std::span<const LabeledSpan> spans) {
  std::string out;
  for (const auto& s : spans) {
    out += nlohmann::json{{"doc_id", s.doc_id}, {"word_index", s.word_index}, {"tuple_id", s.tuple_id}}
               .dump() +
           "\n";
  }
  return out;
}

// Gold labels: {"doc_id": ..., "tuple_id": ...} per line.
using GoldLabels = std::map<std::string, std::string>;

inline GoldLabels parse_gold(std::string_view text) {
  GoldLabels out;
  detail::for_each_jsonl(text, "gold labels", [&](const nlohmann::json& j) {
    auto doc = j.at("doc_id").get<std::string>();
    if (!out.emplace(doc, detail::id_string(j.at("tuple_id"))).second) {
      throw ValidationError("duplicate gold label for document \"" + doc + "\"");
    }
  });
  return out;
}

inline std::string gold_jsonl(const GoldLabels& gold) {
  std::string out;
  for (const auto& [doc, tuple] : gold) {
    out += nlohmann::json{{"doc_id", doc}, {"tuple_id", tuple}}.dump() + "\n";
  }
  return out;
}

// Documents as one canonical JSON object per line.
inline std::vector<Document> parse_documents_jsonl(std::string_view text) {
  std::vector<Document> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!detail::trim(line).empty()) out.push_back(parse_doc_json(line));
  }
  return out;
}

inline std::string documents_jsonl(std::span<const Document> docs) {
  std::string out;
  for (const auto& d : docs) out += serialize_doc_json(d) + "\n";
  return out;
}

}  // namespace juno
