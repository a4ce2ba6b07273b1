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

// Bi-directional attention index used to prune spans and tuples before the
// pairwise alignment.
//
// Two vector stores are keyed by the winning schema attribute of each
// training match: the span store holds flattened raw 4 x d span matrices, the
// tuple store holds projected attribute rows. Each key's points are clustered
// with DBSCAN and only centroids are kept (noise points stay as singleton
// centroids). At query time distances to the centroids are min-max
// normalized into scores in [0, 1] and only the k best items are retained.

#pragma once

#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "juno/alignment.hpp"
#include "juno/common.hpp"
#include "juno/doc_model.hpp"
#include "juno/encoders.hpp"

namespace juno {

inline constexpr int kNoise = -1;
inline constexpr std::size_t kDefaultSpanK = 25;
inline constexpr std::size_t kDefaultTupleK = 100;

// DBSCAN over the rows of `points` with the mean-absolute-difference metric.
// A point is core when at least `min_pts` points (itself included) lie within
// `eps`. Points are scanned in index order, so labels are deterministic:
// clusters are numbered 0, 1, ... in discovery order, noise is kNoise.
inline std::vector<int> cluster_dbscan(const Matrix& points, double eps, std::size_t min_pts) {
  if (!(eps > 0.0)) throw ValidationError("DBSCAN eps must be positive");
  if (min_pts < 1) throw ValidationError("DBSCAN min_pts must be at least 1");
  const std::size_t n = points.rows;
  constexpr int kUnvisited = -2;
  std::vector<int> label(n, kUnvisited);

  auto neighbors = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < n; ++q) {
      if (row_distance(points.row(p), points.row(q)) <= eps) out.push_back(q);
    }
    return out;
  };

  int cluster = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] != kUnvisited) continue;
    auto seeds = neighbors(p);
    if (seeds.size() < min_pts) {
      label[p] = kNoise;
      continue;
    }
    label[p] = cluster;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const std::size_t q = seeds[s];
      if (label[q] == kNoise) label[q] = cluster;  // border point
      if (label[q] != kUnvisited) continue;
      label[q] = cluster;
      auto more = neighbors(q);
      if (more.size() >= min_pts) seeds.insert(seeds.end(), more.begin(), more.end());
    }
    ++cluster;
  }
  return label;
}

// Half the median pairwise distance (floored at a tiny positive value so
// identical points still form one cluster).
inline double default_eps(const Matrix& points) {
  std::vector<double> ds;
  for (std::size_t a = 0; a < points.rows; ++a)
    for (std::size_t b = a + 1; b < points.rows; ++b)
      ds.push_back(row_distance(points.row(a), points.row(b)));
  double median = 0.0;
  if (!ds.empty()) {
    std::sort(ds.begin(), ds.end());
    const std::size_t m = ds.size() / 2;
    median = ds.size() % 2 ? ds[m] : 0.5 * (ds[m - 1] + ds[m]);
  }
  return std::max(0.5 * median, 1e-12);
}

// Cluster centroids (member means, in label order) followed by one singleton
// centroid per noise point (in index order).
inline Matrix cluster_centroids(const Matrix& points, const std::vector<int>& labels) {
  const int clusters = labels.empty() ? 0 : std::max(-1, *std::max_element(labels.begin(), labels.end())) + 1;
  Matrix sums(static_cast<std::size_t>(clusters), points.cols);
  std::vector<std::size_t> counts(static_cast<std::size_t>(clusters), 0);
  std::vector<std::size_t> noise;
  for (std::size_t p = 0; p < points.rows; ++p) {
    if (labels[p] == kNoise) {
      noise.push_back(p);
      continue;
    }
    auto row = sums.row(static_cast<std::size_t>(labels[p]));
    const auto x = points.row(p);
    for (std::size_t k = 0; k < x.size(); ++k) row[k] += x[k];
    ++counts[static_cast<std::size_t>(labels[p])];
  }
  Matrix out(sums.rows + noise.size(), points.cols);
  for (std::size_t c = 0; c < sums.rows; ++c) {
    auto dst = out.row(c);
    const auto src = sums.row(c);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] / static_cast<double>(counts[c]);
  }
  for (std::size_t i = 0; i < noise.size(); ++i) {
    const auto src = points.row(noise[i]);
    std::copy(src.begin(), src.end(), out.row(sums.rows + i).begin());
  }
  return out;
}

// Attribute key -> centroids (one per row).
struct VectorStore {
  std::map<std::size_t, Matrix> centroids;

  std::size_t centroid_count() const {
    std::size_t n = 0;
    for (const auto& [k, m] : centroids) n += m.rows;
    return n;
  }
  bool operator==(const VectorStore&) const = default;
};

struct AssignmentEntry {
  std::string tuple_id;
  std::size_t key = 0;
  std::size_t centroid = 0;
  bool operator==(const AssignmentEntry&) const = default;
};

struct AttentionIndex {
  std::size_t dim = 0;  // d; span store vectors have 4 * d entries
  VectorStore span_store;
  VectorStore tuple_store;
  // Nearest tuple-store centroid of every non-missing attribute of every
  // tuple, in table order.
  std::vector<AssignmentEntry> assignments;

  // Build metadata; not part of the binary format.
  std::size_t min_pts = 2;
  std::uint64_t model_checksum = 0;

  bool operator==(const AttentionIndex& o) const {
    return dim == o.dim && span_store == o.span_store && tuple_store == o.tuple_store &&
           assignments == o.assignments;
  }
};

// A training span matched to its gold tuple; `attribute` is the winning
// attribute index i* of the alignment.
struct TrainingMatch {
  const Matrix* span = nullptr;
  const Matrix* tuple = nullptr;
  std::size_t attribute = 0;
};

inline TrainingMatch make_training_match(const Matrix& span, const Matrix& tuple,
                                         const ProjectionModel& m) {
  const auto a = align_distance(project_span(span, m), project_tuple(tuple, m));
  return {&span, &tuple, a.attribute};
}

struct IndexParams {
  std::optional<double> eps;  // default: per-key default_eps()
  std::size_t min_pts = 2;
};

namespace detail {

inline std::size_t nearest_row(const Matrix& centroids, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = row_distance(centroids.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline Matrix clustered(const Matrix& points, const IndexParams& p) {
  const double eps = p.eps ? *p.eps : default_eps(points);
  Matrix c = cluster_centroids(points, cluster_dbscan(points, eps, p.min_pts));
  round_to_float(c.values);
  return c;
}

}  // namespace detail

// Builds both vector stores from the training matches and assigns every
// tuple attribute of `table` to its nearest tuple-store centroid.
inline AttentionIndex build_index(std::span<const TrainingMatch> matches,
                                  const ProjectionModel& model, const Table& table,
                                  std::span<const Matrix> table_embeddings,
                                  const IndexParams& params = {}) {
  if (matches.empty()) throw ValidationError("cannot build an index from zero training matches");
  if (table_embeddings.size() != table.tuples.size()) {
    throw Error("build_index: table embeddings and tuples differ in count");
  }
  const std::size_t d = model.dim;
  const std::size_t n = table.schema.arity();
  std::map<std::size_t, std::vector<double>> span_points, tuple_points;
  for (const auto& m : matches) {
    if (m.span->rows != kSpanRows || m.span->cols != d || m.tuple->cols != d) {
      throw DimensionError("build_index: training match has wrong shape");
    }
    if (m.attribute >= n || m.attribute >= m.tuple->rows) {
      throw ValidationError("build_index: attribute index out of range");
    }
    auto& sp = span_points[m.attribute];
    sp.insert(sp.end(), m.span->values.begin(), m.span->values.end());
    const Matrix pt = project_tuple(*m.tuple, model);
    const auto row = pt.row(m.attribute);
    auto& tp = tuple_points[m.attribute];
    tp.insert(tp.end(), row.begin(), row.end());
  }

  AttentionIndex index;
  index.dim = d;
  index.min_pts = params.min_pts;
  index.model_checksum = model_checksum(model);
  for (auto& [key, flat] : span_points) {
    Matrix pts(flat.size() / (kSpanRows * d), kSpanRows * d);
    pts.values = std::move(flat);
    index.span_store.centroids.emplace(key, detail::clustered(pts, params));
  }
  for (auto& [key, flat] : tuple_points) {
    Matrix pts(flat.size() / d, d);
    pts.values = std::move(flat);
    index.tuple_store.centroids.emplace(key, detail::clustered(pts, params));
  }

  for (std::size_t t = 0; t < table.tuples.size(); ++t) {
    const Matrix pt = project_tuple(table_embeddings[t], model);
    for (const auto& [key, cents] : index.tuple_store.centroids) {
      if (is_missing(table.tuples[t].values[key])) continue;
      index.assignments.push_back(
          {table.tuples[t].tuple_id, key, detail::nearest_row(cents, pt.row(key))});
    }
  }
  return index;
}

// Per-tuple (key, centroid ordinal) lists aligned with a table's tuple order.
using TupleAssignments = std::vector<std::vector<std::pair<std::size_t, std::size_t>>>;

inline TupleAssignments assignments_for(const AttentionIndex& index, const Table& table) {
  TupleAssignments out(table.tuples.size());
  for (const auto& e : index.assignments) {
    const auto t = table.find(e.tuple_id);
    if (!t) throw ValidationError("index references unknown tuple \"" + e.tuple_id + "\"");
    auto it = index.tuple_store.centroids.find(e.key);
    if (it == index.tuple_store.centroids.end() || e.centroid >= it->second.rows) {
      throw FormatError("index assignment for \"" + e.tuple_id + "\" points to a missing centroid");
    }
    out[*t].emplace_back(e.key, e.centroid);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scores

// A = 1 - (C - min C) / (max C - min C); all ones when max C == min C.
inline std::vector<double> normalize_distances(std::span<const double> c) {
  std::vector<double> a(c.size(), 1.0);
  if (c.empty()) return a;
  const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return a;
  for (std::size_t i = 0; i < c.size(); ++i) a[i] = 1.0 - (c[i] - *lo) / range;
  return a;
}

// Indices of the k largest scores (ties to the smaller index), ascending.
inline std::vector<std::size_t> k_max_indices(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Keeps the k largest entries and zeroes the rest.
inline std::vector<double> k_max_attention(std::span<const double> scores, std::size_t k) {
  std::vector<double> out(scores.size(), 0.0);
  for (std::size_t i : k_max_indices(scores, k)) out[i] = scores[i];
  return out;
}

struct AttentionVector {
  std::vector<double> distances;  // C
  std::vector<double> scores;     // k-max masked A
  // Items selected by k-max, ascending. This is the selection itself rather
  // than the nonzero entries: the farthest item always scores exactly 0.
  std::vector<std::size_t> retained;
};

inline AttentionVector make_attention(std::vector<double> distances, std::size_t k) {
  AttentionVector v;
  const auto a = normalize_distances(distances);
  v.retained = k_max_indices(a, k);
  v.scores.assign(a.size(), 0.0);
  for (std::size_t i : v.retained) v.scores[i] = a[i];
  v.distances = std::move(distances);
  return v;
}

// Span attention: each span's distance is its minimum distance to any span
// store centroid (flattened raw 4 x d matrices).
inline AttentionVector attend_spans(std::span<const Matrix> spans, const AttentionIndex& index,
                                    std::size_t k = kDefaultSpanK) {
  if (index.span_store.centroids.empty()) throw Error("attention index has an empty span store");
  std::vector<double> c(spans.size());
  for (std::size_t s = 0; s < spans.size(); ++s) {
    if (spans[s].values.size() != kSpanRows * index.dim) {
      throw DimensionError("attend_spans: span matrix does not match index dimension");
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [key, cents] : index.span_store.centroids) {
      for (std::size_t r = 0; r < cents.rows; ++r) {
        best = std::min(best, row_distance(spans[s].values, cents.row(r)));
      }
    }
    c[s] = best;
  }
  return make_attention(std::move(c), k);
}

// Tuple attention for one projected span: a centroid's distance is the
// minimum over the span's four rows; a tuple's distance is the minimum over
// its assigned centroids. Tuples without assignments get the worst distance.
inline AttentionVector attend_tuples(const Matrix& projected_span, const AttentionIndex& index,
                                     const TupleAssignments& assignments,
                                     std::size_t k = kDefaultTupleK) {
  if (projected_span.cols != index.dim) {
    throw DimensionError("attend_tuples: span dimension does not match index");
  }
  std::map<std::size_t, std::vector<double>> centroid_dist;
  for (const auto& [key, cents] : index.tuple_store.centroids) {
    auto& ds = centroid_dist[key];
    ds.resize(cents.rows);
    for (std::size_t r = 0; r < cents.rows; ++r) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < projected_span.rows; ++j) {
        best = std::min(best, row_distance(projected_span.row(j), cents.row(r)));
      }
      ds[r] = best;
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> c(assignments.size(), inf);
  double worst = 0.0;
  bool any = false;
  for (std::size_t t = 0; t < assignments.size(); ++t) {
    for (const auto& [key, ord] : assignments[t]) c[t] = std::min(c[t], centroid_dist[key][ord]);
    if (c[t] != inf) {
      worst = any ? std::max(worst, c[t]) : c[t];
      any = true;
    }
  }
  for (double& x : c)
    if (x == inf) x = worst;
  return make_attention(std::move(c), k);
}

// ---------------------------------------------------------------------------
// JIDX: "JIDX", u32 version=1, u32 d, u32 d', then the span store and the
// tuple store (u32 key count; per key u32 attribute, u32 centroid count,
// float32 centroids row-major), then u32 assignment count and per entry
// u16 id length, id bytes, u32 key, u32 centroid ordinal.

inline std::string encode_jidx(const AttentionIndex& index) {
  BinaryWriter w;
  w.bytes("JIDX");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(index.dim));
  w.u32(static_cast<std::uint32_t>(kSpanRows * index.dim));
  for (const VectorStore* s : {&index.span_store, &index.tuple_store}) {
    w.u32(static_cast<std::uint32_t>(s->centroids.size()));
    for (const auto& [key, cents] : s->centroids) {
      w.u32(static_cast<std::uint32_t>(key));
      w.u32(static_cast<std::uint32_t>(cents.rows));
      w.f32s(cents.values);
    }
  }
  w.u32(static_cast<std::uint32_t>(index.assignments.size()));
  for (const auto& e : index.assignments) {
    w.id(e.tuple_id);
    w.u32(static_cast<std::uint32_t>(e.key));
    w.u32(static_cast<std::uint32_t>(e.centroid));
  }
  return w.str();
}

inline AttentionIndex decode_jidx(std::string_view bytes) {
  BinaryReader r(bytes, "JIDX");
  r.magic("JIDX", 1);
  AttentionIndex index;
  index.dim = r.u32();
  const std::size_t span_dim = r.u32();
  if (index.dim == 0 || span_dim != kSpanRows * index.dim) {
    throw FormatError("JIDX: inconsistent dimensions");
  }
  for (auto [store, cols] : {std::pair{&index.span_store, span_dim},
                             std::pair{&index.tuple_store, index.dim}}) {
    const std::uint32_t keys = r.u32();
    for (std::uint32_t k = 0; k < keys; ++k) {
      const std::size_t key = r.u32();
      const std::size_t rows = r.u32();
      Matrix m(rows, cols);
      r.f32s(m.values);
      if (!store->centroids.emplace(key, std::move(m)).second) {
        throw FormatError("JIDX: duplicate store key " + std::to_string(key));
      }
    }
  }
  const std::uint32_t entries = r.u32();
  for (std::uint32_t e = 0; e < entries; ++e) {
    AssignmentEntry a;
    a.tuple_id = r.id();
    a.key = r.u32();
    a.centroid = r.u32();
    index.assignments.push_back(std::move(a));
  }
  r.expect_end();
  if (index.span_store.centroids.empty() || index.tuple_store.centroids.empty()) {
    throw FormatError("JIDX: empty vector store");
  }
  return index;
}

inline AttentionIndex read_index(const std::string& path) { return decode_jidx(read_file(path)); }
inline void write_index(const AttentionIndex& index, const std::string& path) {
  write_file(path, encode_jidx(index));
}

}  // namespace juno
