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

// Representation layer. Words become 4 x d span matrices (word, forward
// bigram, forward trigram, document visual vector) and tuples become n x d
// matrices (one row per schema attribute). Embeddings come from a provider:
// the hash provider is a deterministic character-trigram feature hasher; the
// file provider serves vectors precomputed by an external model (JEMB files).

#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "juno/common.hpp"
#include "juno/doc_model.hpp"

namespace juno {

inline constexpr std::size_t kSpanRows = 4;
inline constexpr std::size_t kMinDimension = 8;
inline constexpr const char* kUnknownToken = "[UNK]";

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

namespace detail {

inline void check_dimension(std::size_t d) {
  if (d < kMinDimension) {
    throw DimensionError("embedding dimension must be at least 8, got " + std::to_string(d));
  }
}

// Splits a UTF-8 string into code points (kept as their byte sequences).
inline std::vector<std::string_view> utf8_chars(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i + 1;
    while (j < s.size() && (static_cast<unsigned char>(s[j]) & 0xC0) == 0x80) ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

// Hashed character-trigram embedding of a token sequence. Tokens are ASCII
// lowercased and wrapped as "^token$"; each trigram adds +1 or -1 (top bit of
// its FNV-1a-64 hash) at index hash mod d. The sum is L2-normalized; an empty
// sum stays zero.
inline std::vector<double> embed_text(std::span<const std::string> tokens, std::size_t d) {
  detail::check_dimension(d);
  std::vector<double> v(d, 0.0);
  for (const auto& raw : tokens) {
    std::string tok = "^";
    for (char c : raw) {
      tok.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
    }
    tok.push_back('$');
    const auto chars = detail::utf8_chars(tok);
    for (std::size_t i = 0; i + 3 <= chars.size(); ++i) {
      std::string gram;
      gram.append(chars[i]).append(chars[i + 1]).append(chars[i + 2]);
      const std::uint64_t h = fnv1a64(gram);
      v[h % d] += (h >> 63) ? -1.0 : 1.0;
    }
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

inline std::vector<double> embed_text(std::initializer_list<std::string> tokens, std::size_t d) {
  return embed_text(std::span<const std::string>(tokens.begin(), tokens.size()), d);
}

// Tokens of the forward n-gram starting at word `index`, clipped at the end
// of the word's text line.
inline std::vector<std::string> ngram_tokens(std::span<const WordRef> ws, std::size_t index,
                                             std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = index; k < ws.size() && k < index + n; ++k) {
    if (ws[k].line != ws[index].line) break;
    for (auto& t : split_whitespace(ws[k].element->text_data)) out.push_back(std::move(t));
  }
  return out;
}

// Token sequence of attribute `i`: the attribute name followed by its value
// tokens; a missing value is the single token [UNK] and multi-valued
// attributes are linearized in order.
inline std::vector<std::string> attribute_tokens(const Schema& schema, const Tuple& t,
                                                 std::size_t i) {
  std::vector<std::string> out{schema.attributes[i]};
  const auto& v = t.values[i];
  if (is_missing(v)) {
    out.emplace_back(kUnknownToken);
  } else if (const auto* s = std::get_if<std::string>(&v)) {
    for (auto& tok : split_whitespace(*s)) out.push_back(std::move(tok));
  } else {
    for (const auto& item : std::get<std::vector<std::string>>(v)) {
      for (auto& tok : split_whitespace(item)) out.push_back(std::move(tok));
    }
  }
  return out;
}

inline std::string span_key(std::string_view doc_id, std::size_t word_index) {
  return "span:" + std::string(doc_id) + ":" + std::to_string(word_index);
}
inline std::string visual_key(std::string_view doc_id) { return "vis:" + std::string(doc_id); }
inline std::string tuple_key(std::string_view tuple_id) { return "tup:" + std::string(tuple_id); }

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  // 4 x d matrix for word `index`; `ws` are the document's words in reading order.
  virtual Matrix span(const Document& doc, std::span<const WordRef> ws,
                      std::size_t index) const = 0;
  virtual Matrix tuple(const Schema& schema, const Tuple& t) const = 0;
};

class HashProvider final : public EmbeddingProvider {
 public:
  explicit HashProvider(std::size_t d) : d_(d) { detail::check_dimension(d); }

  std::size_t dimension() const override { return d_; }

  Matrix span(const Document& doc, std::span<const WordRef> ws,
              std::size_t index) const override {
    Matrix m(kSpanRows, d_);
    for (std::size_t n = 1; n <= 3; ++n) {
      const auto v = embed_text(ngram_tokens(ws, index, n), d_);
      std::copy(v.begin(), v.end(), m.row(n - 1).begin());
    }
    const auto vis = embed_text({std::string("VIS"), doc.doc_id}, d_);
    std::copy(vis.begin(), vis.end(), m.row(3).begin());
    return m;
  }

  Matrix tuple(const Schema& schema, const Tuple& t) const override {
    Matrix m(schema.arity(), d_);
    for (std::size_t i = 0; i < schema.arity(); ++i) {
      const auto v = embed_text(attribute_tokens(schema, t, i), d_);
      std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    return m;
  }

 private:
  std::size_t d_;
};

// ---------------------------------------------------------------------------
// JEMB: "JEMB", u32 version=1, u32 d, u32 count, then per record
// u16 id length, id bytes, u32 rows, rows*d float32 (row-major, little-endian).

using EmbeddingMap = std::map<std::string, Matrix>;

inline std::string encode_jemb(const EmbeddingMap& map, std::size_t d) {
  BinaryWriter w;
  w.bytes("JEMB");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(map.size()));
  for (const auto& [id, m] : map) {
    if (m.cols != d) {
      throw DimensionError("JEMB record \"" + id + "\" has " + std::to_string(m.cols) +
                           " columns, file dimension is " + std::to_string(d));
    }
    w.id(id);
    w.u32(static_cast<std::uint32_t>(m.rows));
    w.f32s(m.values);
  }
  return w.str();
}

// Decodes a JEMB blob. When `expected_d` is non-zero the stored dimension
// must equal it.
inline EmbeddingMap decode_jemb(std::string_view bytes, std::size_t expected_d = 0,
                                std::size_t* dimension = nullptr) {
  BinaryReader r(bytes, "JEMB");
  r.magic("JEMB", 1);
  const std::size_t d = r.u32();
  if (expected_d != 0 && d != expected_d) {
    throw DimensionError("JEMB dimension " + std::to_string(d) +
                         " does not match configured dimension " + std::to_string(expected_d));
  }
  const std::uint32_t count = r.u32();
  EmbeddingMap map;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string id = r.id();
    const std::size_t rows = r.u32();
    Matrix m(rows, d);
    r.f32s(m.values);
    if (!map.emplace(id, std::move(m)).second) {
      throw FormatError("JEMB: duplicate id \"" + id + "\"");
    }
  }
  r.expect_end();
  if (dimension) *dimension = d;
  return map;
}

inline EmbeddingMap read_embedding_file(const std::string& path, std::size_t expected_d = 0) {
  return decode_jemb(read_file(path), expected_d);
}

inline void write_embedding_file(const EmbeddingMap& map, std::size_t d, const std::string& path) {
  write_file(path, encode_jemb(map, d));
}

// Serves precomputed embeddings. Span records hold either all four rows or
// the three text rows, in which case the visual row comes from the
// document's "vis:" record.
class FileProvider final : public EmbeddingProvider {
 public:
  FileProvider(EmbeddingMap map, std::size_t d) : d_(d), map_(std::move(map)) {
    detail::check_dimension(d);
    for (const auto& [id, m] : map_) {
      if (m.cols != d_) throw DimensionError("embedding \"" + id + "\" has wrong dimension");
      if (!m.all_finite()) throw FormatError("embedding \"" + id + "\" has non-finite entries");
    }
  }

  static FileProvider from_files(const std::vector<std::string>& paths, std::size_t d) {
    EmbeddingMap merged;
    for (const auto& p : paths) {
      for (auto& [id, m] : read_embedding_file(p, d)) {
        if (!merged.emplace(id, std::move(m)).second) {
          throw FormatError("embedding id \"" + id + "\" defined in more than one file");
        }
      }
    }
    return FileProvider(std::move(merged), d);
  }

  std::size_t dimension() const override { return d_; }

  Matrix span(const Document& doc, std::span<const WordRef>,
              std::size_t index) const override {
    const auto& rec = lookup(span_key(doc.doc_id, index));
    if (rec.rows == kSpanRows) return rec;
    if (rec.rows != kSpanRows - 1) {
      throw FormatError("span embedding " + span_key(doc.doc_id, index) + " must have 3 or 4 rows");
    }
    const auto& vis = lookup(visual_key(doc.doc_id));
    if (vis.rows != 1) throw FormatError("visual embedding must have exactly one row");
    Matrix m(kSpanRows, d_);
    std::copy(rec.values.begin(), rec.values.end(), m.values.begin());
    std::copy(vis.values.begin(), vis.values.end(), m.row(3).begin());
    return m;
  }

  Matrix tuple(const Schema& schema, const Tuple& t) const override {
    const auto& rec = lookup(tuple_key(t.tuple_id));
    if (rec.rows != schema.arity()) {
      throw DimensionError("tuple embedding " + tuple_key(t.tuple_id) + " has " +
                           std::to_string(rec.rows) + " rows, schema arity is " +
                           std::to_string(schema.arity()));
    }
    return rec;
  }

 private:
  const Matrix& lookup(const std::string& id) const {
    auto it = map_.find(id);
    if (it == map_.end()) throw Error("no precomputed embedding for \"" + id + "\"");
    return it->second;
  }

  std::size_t d_;
  EmbeddingMap map_;
};

// ---------------------------------------------------------------------------
// Encoding entry points

inline Matrix encode_span(const Document& doc, std::size_t word_index,
                          const EmbeddingProvider& provider) {
  const auto ws = words(doc);
  if (word_index >= ws.size()) {
    throw Error("word index " + std::to_string(word_index) + " out of range for document \"" +
                doc.doc_id + "\" with " + std::to_string(ws.size()) + " words");
  }
  return provider.span(doc, ws, word_index);
}

// All span matrices of a document, in reading order.
inline std::vector<Matrix> encode_document(const Document& doc,
                                           const EmbeddingProvider& provider) {
  const auto ws = words(doc);
  std::vector<Matrix> out;
  out.reserve(ws.size());
  for (std::size_t i = 0; i < ws.size(); ++i) out.push_back(provider.span(doc, ws, i));
  return out;
}

inline Matrix encode_tuple(const Schema& schema, const Tuple& t,
                           const EmbeddingProvider& provider) {
  if (t.values.size() != schema.arity()) {
    throw ValidationError("tuple \"" + t.tuple_id + "\" does not conform to the schema");
  }
  return provider.tuple(schema, t);
}

inline std::vector<Matrix> encode_table(const Table& table, const EmbeddingProvider& provider,
                                        std::size_t threads = 1) {
  std::vector<Matrix> out(table.tuples.size());
  parallel_for(table.tuples.size(), threads, [&](std::size_t i) {
    out[i] = encode_tuple(table.schema, table.tuples[i], provider);
  });
  return out;
}

}  // namespace juno
