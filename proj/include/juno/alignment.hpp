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

// Alignment layer: per-modality affine projections into a shared space, the
// min-over-row-pairs span/tuple distance, the triplet objective
//
//   L = D(w, t+) - lambda * D(w, t-),   D = min_{i,j} mean|F'_w[j] - F'_t[i]|
//
// with its analytic subgradient, and an AdamW training loop with early
// stopping on validation loss.

#pragma once

#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "juno/common.hpp"
#include "juno/doc_model.hpp"

namespace juno {

// F'_w = F_w W_doc^T + b_doc and F'_t = F_t W_tup^T + b_tup, row-wise.
struct ProjectionModel {
  std::size_t dim = 0;
  Matrix w_doc;
  std::vector<double> b_doc;
  Matrix w_tup;
  std::vector<double> b_tup;

  static ProjectionModel zeros(std::size_t d) {
    return {d, Matrix(d, d), std::vector<double>(d, 0.0), Matrix(d, d),
            std::vector<double>(d, 0.0)};
  }

  static ProjectionModel identity(std::size_t d) {
    auto m = zeros(d);
    m.w_doc = Matrix::identity(d);
    m.w_tup = Matrix::identity(d);
    return m;
  }

  // Identity plus uniform(-0.01/sqrt(d), 0.01/sqrt(d)) noise, zero bias.
  static ProjectionModel initialized(std::size_t d, std::uint64_t seed) {
    auto m = identity(d);
    Rng rng(seed);
    const double a = 0.01 / std::sqrt(static_cast<double>(d));
    for (double& x : m.w_doc.values) x += rng.uniform(-a, a);
    for (double& x : m.w_tup.values) x += rng.uniform(-a, a);
    return m;
  }

  // All parameters in a fixed order.
  std::vector<std::span<double>> parameters() {
    return {w_doc.values, b_doc, w_tup.values, b_tup};
  }
  std::vector<std::span<const double>> parameters() const {
    return {w_doc.values, b_doc, w_tup.values, b_tup};
  }

  bool all_finite() const {
    for (auto p : parameters())
      for (double x : p)
        if (!std::isfinite(x)) return false;
    return true;
  }

  bool operator==(const ProjectionModel&) const = default;
};

using ModelGradient = ProjectionModel;

inline Matrix project(const Matrix& in, const Matrix& w, std::span<const double> b) {
  if (in.cols != w.cols || w.rows != b.size()) {
    throw DimensionError("projection: input has " + std::to_string(in.cols) +
                         " columns, weights are " + std::to_string(w.rows) + "x" +
                         std::to_string(w.cols));
  }
  Matrix out(in.rows, w.rows);
  for (std::size_t r = 0; r < in.rows; ++r) {
    const auto x = in.row(r);
    auto y = out.row(r);
    for (std::size_t a = 0; a < w.rows; ++a) {
      const auto wa = w.row(a);
      double s = b[a];
      for (std::size_t k = 0; k < x.size(); ++k) s += wa[k] * x[k];
      y[a] = s;
    }
  }
  return out;
}

inline Matrix project_span(const Matrix& span, const ProjectionModel& m) {
  return project(span, m.w_doc, m.b_doc);
}

inline Matrix project_tuple(const Matrix& tuple, const ProjectionModel& m) {
  return project(tuple, m.w_tup, m.b_tup);
}

// Mean absolute difference (L1 / d).
inline double row_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionError("row_distance: length mismatch");
  if (u.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += std::abs(u[k] - v[k]);
  return s / static_cast<double>(u.size());
}

struct Alignment {
  double distance = std::numeric_limits<double>::infinity();
  std::size_t span_row = 0;   // j*
  std::size_t attribute = 0;  // i*

  bool operator==(const Alignment&) const = default;
};

// Minimum row distance over all (span row j, attribute row i) pairs. Ties go
// to the smallest i, then the smallest j.
inline Alignment align_distance(const Matrix& span, const Matrix& tuple) {
  if (span.cols != tuple.cols) throw DimensionError("align_distance: dimension mismatch");
  Alignment best;
  for (std::size_t i = 0; i < tuple.rows; ++i) {
    for (std::size_t j = 0; j < span.rows; ++j) {
      const double d = row_distance(span.row(j), tuple.row(i));
      if (d < best.distance) best = {d, j, i};
    }
  }
  return best;
}

struct TupleMatch {
  std::size_t tuple = 0;  // index into the candidate list
  Alignment alignment;
};

// Exhaustive scan over projected tuples; ties go to the lexicographically
// smallest id.
inline std::optional<TupleMatch> match_tuple_bruteforce(const Matrix& projected_span,
                                                        std::span<const Matrix> projected_tuples,
                                                        std::span<const std::string> ids) {
  if (projected_tuples.size() != ids.size()) throw Error("match: ids and tuples differ in count");
  std::optional<TupleMatch> best;
  for (std::size_t t = 0; t < projected_tuples.size(); ++t) {
    const auto a = align_distance(projected_span, projected_tuples[t]);
    if (!best || a.distance < best->alignment.distance ||
        (a.distance == best->alignment.distance && ids[t] < ids[best->tuple])) {
      best = TupleMatch{t, a};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Triplet objective

struct TripletLossParams {
  double lambda = 0.025;
  // When set, the loss is clamped to max(L, -margin).
  std::optional<double> hinge_margin;
};

struct TripletLossValue {
  double loss = 0.0;
  Alignment positive;
  Alignment negative;
  bool clamped = false;
};

inline TripletLossValue triplet_loss_detail(const Matrix& span, const Matrix& positive,
                                            const Matrix& negative, const ProjectionModel& m,
                                            const TripletLossParams& p) {
  const Matrix pw = project_span(span, m);
  TripletLossValue out;
  out.positive = align_distance(pw, project_tuple(positive, m));
  out.negative = align_distance(pw, project_tuple(negative, m));
  out.loss = out.positive.distance - p.lambda * out.negative.distance;
  if (p.hinge_margin && out.loss < -*p.hinge_margin) {
    out.loss = -*p.hinge_margin;
    out.clamped = true;
  }
  return out;
}

inline double triplet_loss(const Matrix& span, const Matrix& positive, const Matrix& negative,
                           const ProjectionModel& m, const TripletLossParams& p = {}) {
  return triplet_loss_detail(span, positive, negative, m, p).loss;
}

namespace detail {

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

// Accumulates coeff * d/d(params) of mean|F'_w[j] - F'_t[i]| into g.
inline void accumulate_pair_gradient(const Matrix& span, const Matrix& tuple,
                                     const Matrix& pw, const Matrix& pt, const Alignment& a,
                                     double coeff, ModelGradient& g) {
  const std::size_t d = pw.cols;
  const auto fw = span.row(a.span_row);
  const auto ft = tuple.row(a.attribute);
  const auto yw = pw.row(a.span_row);
  const auto yt = pt.row(a.attribute);
  const double scale = coeff / static_cast<double>(d);
  for (std::size_t r = 0; r < d; ++r) {
    const double s = sign(yw[r] - yt[r]) * scale;
    if (s == 0.0) continue;
    auto gd = g.w_doc.row(r);
    auto gt = g.w_tup.row(r);
    for (std::size_t k = 0; k < d; ++k) {
      gd[k] += s * fw[k];
      gt[k] -= s * ft[k];
    }
    g.b_doc[r] += s;
    g.b_tup[r] -= s;
  }
}

}  // namespace detail

// Subgradient of the triplet loss. Only the minimizing row pairs of the
// positive and negative terms receive gradient; sign(0) = 0.
inline ModelGradient loss_gradient(const Matrix& span, const Matrix& positive,
                                   const Matrix& negative, const ProjectionModel& m,
                                   const TripletLossParams& p = {},
                                   double* loss_out = nullptr) {
  ModelGradient g = ModelGradient::zeros(m.dim);
  const Matrix pw = project_span(span, m);
  const Matrix pp = project_tuple(positive, m);
  const Matrix pn = project_tuple(negative, m);
  const auto ap = align_distance(pw, pp);
  const auto an = align_distance(pw, pn);
  double loss = ap.distance - p.lambda * an.distance;
  const bool clamped = p.hinge_margin && loss < -*p.hinge_margin;
  if (clamped) loss = -*p.hinge_margin;
  if (loss_out) *loss_out = loss;
  if (clamped) return g;
  detail::accumulate_pair_gradient(span, positive, pw, pp, ap, 1.0, g);
  if (p.lambda != 0.0) detail::accumulate_pair_gradient(span, negative, pw, pn, an, -p.lambda, g);
  return g;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double lambda = 0.025;
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  double learning_rate = 1e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t patience = 3;
  std::optional<double> hinge_margin;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
    if (epochs == 0) throw ValidationError("epochs must be positive");
    if (batch_size == 0) throw ValidationError("batch size must be positive");
    if (!(learning_rate >= 0.0)) throw ValidationError("learning rate must be non-negative");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be non-negative");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw ValidationError("Adam betas must lie in (0, 1)");
    }
    if (hinge_margin && !(*hinge_margin >= 0.0)) {
      throw ValidationError("hinge margin must be non-negative");
    }
  }

  TripletLossParams loss_params() const { return {lambda, hinge_margin}; }
};

// A resolved training example: span matrix, matching and non-matching tuple
// matrices (raw provider embeddings).
struct TripletSample {
  const Matrix* span = nullptr;
  const Matrix* positive = nullptr;
  const Matrix* negative = nullptr;
};

struct EpochLog {
  std::size_t epoch = 0;  // 0 is the initial model
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  ProjectionModel model;  // best validation loss
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

// AdamW: bias-corrected Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(const ProjectionModel& shape, const TrainConfig& cfg)
      : cfg_(cfg), m_(ModelGradient::zeros(shape.dim)), v_(ModelGradient::zeros(shape.dim)) {}

  void step(ProjectionModel& model, const ModelGradient& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto params = model.parameters();
    auto grads = grad.parameters();
    auto ms = m_.parameters();
    auto vs = v_.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t i = 0; i < params[k].size(); ++i) {
        const double g = grads[k][i];
        double& m = ms[k][i];
        double& v = vs[k][i];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m / c1;
        const double vhat = v / c2;
        double& p = params[k][i];
        p -= cfg_.learning_rate * (mhat / (std::sqrt(vhat) + cfg_.adam_epsilon) +
                                   cfg_.weight_decay * p);
      }
    }
  }

 private:
  TrainConfig cfg_;
  ModelGradient m_;
  ModelGradient v_;
  std::uint64_t t_ = 0;
};

inline double mean_loss(std::span<const TripletSample> samples, const ProjectionModel& m,
                        const TripletLossParams& p) {
  if (samples.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : samples) s += triplet_loss(*x.span, *x.positive, *x.negative, m, p);
  return s / static_cast<double>(samples.size());
}

inline TrainResult train(std::span<const TripletSample> train_set,
                         std::span<const TripletSample> val_set, const TrainConfig& cfg,
                         std::optional<ProjectionModel> init = std::nullopt) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("training corpus is empty");
  if (val_set.empty()) throw ValidationError("validation split is empty");
  const std::size_t d = train_set.front().span->cols;
  const auto params = cfg.loss_params();

  ProjectionModel model = init ? *init : ProjectionModel::initialized(d, cfg.seed);
  if (model.dim != d) throw DimensionError("initial model dimension does not match embeddings");
  AdamW opt(model, cfg);
  Rng rng(cfg.seed ^ 0x5DEECE66DULL);

  auto check = [&](double loss, std::size_t epoch) {
    if (!std::isfinite(loss)) {
      throw Error("non-finite loss in epoch " + std::to_string(epoch) +
                  "; the objective is unbounded below, consider setting hinge_margin");
    }
  };

  TrainResult result;
  double best = mean_loss(val_set, model, params);
  check(best, 0);
  result.log.push_back({0, mean_loss(train_set, model, params), best});
  result.model = model;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      ModelGradient batch = ModelGradient::zeros(d);
      auto acc = batch.parameters();
      for (std::size_t b = start; b < end; ++b) {
        const auto& s = train_set[order[b]];
        double loss = 0.0;
        const auto g = loss_gradient(*s.span, *s.positive, *s.negative, model, params, &loss);
        check(loss, epoch);
        epoch_loss += loss;
        const auto gp = g.parameters();
        for (std::size_t k = 0; k < acc.size(); ++k)
          for (std::size_t i = 0; i < acc[k].size(); ++i) acc[k][i] += gp[k][i];
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto p : acc)
        for (double& x : p) x *= inv;
      opt.step(model, batch);
      if (!model.all_finite()) {
        throw Error("non-finite parameters in epoch " + std::to_string(epoch) +
                    "; consider setting hinge_margin or lowering the learning rate");
      }
    }
    const double val = mean_loss(val_set, model, params);
    check(val, epoch);
    result.log.push_back({epoch, epoch_loss / static_cast<double>(order.size()), val});
    result.epochs_run = epoch;
    if (val < best) {
      best = val;
      result.model = model;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

// Uniform draw over tuple indices other than `positive`.
inline std::size_t sample_negative(std::size_t table_size, std::size_t positive, Rng& rng) {
  if (table_size < 2) throw ValidationError("negative sampling needs at least two tuples");
  if (positive >= table_size) throw ValidationError("positive tuple index out of range");
  const auto r = static_cast<std::size_t>(rng.below(table_size - 1));
  return r < positive ? r : r + 1;
}

inline std::string sample_negative(const Table& table, std::string_view positive_id, Rng& rng) {
  const auto pos = table.find(positive_id);
  if (!pos) throw ValidationError("unknown tuple id \"" + std::string(positive_id) + "\"");
  return table.tuples[sample_negative(table.tuples.size(), *pos, rng)].tuple_id;
}

// ---------------------------------------------------------------------------
// JPRJ checkpoint: "JPRJ", u32 version=1, u32 d, then W_doc, b_doc, W_tup,
// b_tup as float32 row-major.

inline std::string encode_jprj(const ProjectionModel& m) {
  BinaryWriter w;
  w.bytes("JPRJ");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(m.dim));
  for (auto p : m.parameters()) w.f32s(p);
  return w.str();
}

inline ProjectionModel decode_jprj(std::string_view bytes) {
  BinaryReader r(bytes, "JPRJ");
  r.magic("JPRJ", 1);
  const std::size_t d = r.u32();
  if (d == 0) throw FormatError("JPRJ: zero dimension");
  auto m = ProjectionModel::zeros(d);
  for (auto p : m.parameters()) r.f32s(p);
  r.expect_end();
  if (!m.all_finite()) throw FormatError("JPRJ: non-finite parameters");
  return m;
}

inline ProjectionModel read_model(const std::string& path) { return decode_jprj(read_file(path)); }
inline void write_model(const ProjectionModel& m, const std::string& path) {
  write_file(path, encode_jprj(m));
}

inline std::uint64_t model_checksum(const ProjectionModel& m) { return fnv1a64(encode_jprj(m)); }

inline std::string training_log_jsonl(const std::vector<EpochLog>& log) {
  std::string out;
  for (const auto& e : log) {
    nlohmann::json j = {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace juno
