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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "juno/corpus.hpp"
#include "juno/pipeline.hpp"
#include "juno/synth.hpp"
#include "support/oracles.hpp"

namespace juno {
namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& x : m.values) x = rng.uniform(lo, hi);
  return m;
}

Matrix rows(std::vector<std::vector<double>> v) {
  Matrix m(v.size(), v.front().size());
  for (std::size_t r = 0; r < v.size(); ++r)
    for (std::size_t c = 0; c < v[r].size(); ++c) m(r, c) = v[r][c];
  return m;
}

// Independent re-derivation of the pair minimum.
struct OraclePair {
  double distance;
  std::size_t j, i;
};

OraclePair oracle_align(const Matrix& w, const Matrix& t) {
  std::vector<OraclePair> all;
  for (std::size_t j = 0; j < w.rows; ++j) {
    for (std::size_t i = 0; i < t.rows; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < w.cols; ++k) s += std::fabs(w(j, k) - t(i, k));
      all.push_back({s / static_cast<double>(w.cols), j, i});
    }
  }
  std::sort(all.begin(), all.end(), [](const OraclePair& a, const OraclePair& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  return all.front();
}

// ---------------------------------------------------------------------------

TEST(ProjectTest, IdentityAndZero) {
  Rng rng(1);
  const Matrix x = random_matrix(4, 8, rng);
  const auto id = ProjectionModel::identity(8);
  EXPECT_EQ(project_span(x, id), x);
  EXPECT_EQ(project_tuple(x, id), x);
  const auto z = ProjectionModel::zeros(8);
  EXPECT_EQ(project_span(x, z), Matrix(4, 8));
}

TEST(ProjectTest, MatchesHandMultiplication) {
  const Matrix x = rows({{1, 2}, {3, -1}});
  const Matrix w = rows({{0.5, 1}, {-2, 0}});
  const std::vector<double> b = {1, 10};
  const Matrix y = project(x, w, b);
  // y = x W^T + b
  EXPECT_EQ(y, rows({{3.5, 8}, {1.5, 4}}));
  EXPECT_THROW(project(rows({{1, 2, 3}}), w, b), DimensionError);
}

TEST(ProjectTest, InitializationIsNearIdentity) {
  const auto m = ProjectionModel::initialized(16, 3);
  const double a = 0.01 / 4.0;
  for (std::size_t r = 0; r < 16; ++r) {
    for (std::size_t c = 0; c < 16; ++c) {
      EXPECT_LE(std::fabs(m.w_doc(r, c) - (r == c ? 1.0 : 0.0)), a);
      EXPECT_LE(std::fabs(m.w_tup(r, c) - (r == c ? 1.0 : 0.0)), a);
    }
  }
  EXPECT_EQ(m.b_doc, std::vector<double>(16, 0.0));
  EXPECT_EQ(m, ProjectionModel::initialized(16, 3));
  EXPECT_NE(m, ProjectionModel::initialized(16, 4));
}

TEST(RowDistanceTest, MeanAbsoluteDifference) {
  const std::vector<double> u = {1, 2}, v = {0, 4};
  EXPECT_DOUBLE_EQ(row_distance(u, v), 1.5);
  EXPECT_DOUBLE_EQ(row_distance(v, u), 1.5);
  EXPECT_DOUBLE_EQ(row_distance(u, u), 0.0);
  EXPECT_THROW(row_distance(u, std::vector<double>{1.0}), DimensionError);
}

TEST(AlignDistanceTest, ExactRowMatch) {
  Rng rng(2);
  Matrix w = random_matrix(4, 8, rng);
  Matrix t(1, 8);
  std::copy(w.row(2).begin(), w.row(2).end(), t.row(0).begin());
  const auto a = align_distance(w, t);
  EXPECT_EQ(a.distance, 0.0);
  EXPECT_EQ(a.span_row, 2u);
  EXPECT_EQ(a.attribute, 0u);
}

TEST(AlignDistanceTest, HandGridEqualsExhaustiveMinimum) {
  const Matrix w = rows({{0, 0}, {1, 1}, {5, 5}, {2, -2}});
  const Matrix t = rows({{9, 9}, {1.5, 1}, {2, -1.5}});
  const auto a = align_distance(w, t);
  const auto o = oracle_align(w, t);
  EXPECT_DOUBLE_EQ(a.distance, 0.25);
  EXPECT_EQ(a.distance, o.distance);
  EXPECT_EQ(a.attribute, 1u);
  EXPECT_EQ(a.span_row, 1u);
}

TEST(AlignDistanceTest, RandomInstancesMatchOracle) {
  Rng rng(5);
  for (int n = 0; n < 300; ++n) {
    // Coarse values so that ties occur.
    Matrix w(4, 6), t(1 + rng.below(5), 6);
    for (double& x : w.values) x = static_cast<double>(rng.below(3));
    for (double& x : t.values) x = static_cast<double>(rng.below(3));
    const auto a = align_distance(w, t);
    const auto o = oracle_align(w, t);
    ASSERT_EQ(a.distance, o.distance);
    ASSERT_EQ(a.attribute, o.i);
    ASSERT_EQ(a.span_row, o.j);
  }
}

TEST(AlignDistanceTest, TiesGoToSmallestAttributeThenRow) {
  const Matrix w = rows({{1, 1}, {0, 0}, {0, 0}, {9, 9}});
  const Matrix t = rows({{5, 5}, {0, 0}, {1, 1}});
  const auto a = align_distance(w, t);
  EXPECT_EQ(a.distance, 0.0);
  EXPECT_EQ(a.attribute, 1u);
  EXPECT_EQ(a.span_row, 1u);
}

TEST(AlignDistanceTest, ScalingIsHomogeneous) {
  Rng rng(8);
  for (int n = 0; n < 50; ++n) {
    Matrix w = random_matrix(4, 8, rng), t = random_matrix(3, 8, rng);
    const auto a = align_distance(w, t);
    for (double& x : w.values) x *= 2.0;
    for (double& x : t.values) x *= 2.0;
    const auto b = align_distance(w, t);
    EXPECT_DOUBLE_EQ(b.distance, 2.0 * a.distance);
    EXPECT_EQ(b.span_row, a.span_row);
    EXPECT_EQ(b.attribute, a.attribute);
  }
}

// ---------------------------------------------------------------------------

TEST(MatchTupleTest, PlantedCopyWins) {
  Rng rng(9);
  const Matrix w = random_matrix(4, 8, rng);
  std::vector<Matrix> tuples;
  for (int k = 0; k < 10; ++k) tuples.push_back(random_matrix(3, 8, rng));
  std::copy(w.row(1).begin(), w.row(1).end(), tuples[6].row(2).begin());
  std::vector<std::string> ids;
  for (int k = 0; k < 10; ++k) ids.push_back("t" + std::to_string(k));
  const auto m = match_tuple_bruteforce(w, tuples, ids);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->tuple, 6u);
  EXPECT_EQ(m->alignment.distance, 0.0);
}

TEST(MatchTupleTest, EqualsScanOracleAndIgnoresOrder) {
  Rng rng(10);
  for (int n = 0; n < 100; ++n) {
    Matrix w(4, 4);
    for (double& x : w.values) x = static_cast<double>(rng.below(3));
    std::vector<Matrix> tuples;
    std::vector<std::string> ids;
    for (int k = 0; k < 5; ++k) {
      Matrix t(2, 4);
      for (double& x : t.values) x = static_cast<double>(rng.below(3));
      tuples.push_back(t);
      ids.push_back(std::string(1, static_cast<char>('e' - k)));
    }
    // Oracle: smallest (distance, id).
    std::pair<double, std::string> best{std::numeric_limits<double>::infinity(), ""};
    for (std::size_t k = 0; k < tuples.size(); ++k) {
      best = std::min(best, {oracle_align(w, tuples[k]).distance, ids[k]});
    }
    const auto m = match_tuple_bruteforce(w, tuples, ids);
    ASSERT_EQ(ids[m->tuple], best.second);
    ASSERT_EQ(m->alignment.distance, best.first);

    std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    std::vector<Matrix> pt;
    std::vector<std::string> pi;
    for (auto p : perm) {
      pt.push_back(tuples[p]);
      pi.push_back(ids[p]);
    }
    ASSERT_EQ(pi[match_tuple_bruteforce(w, pt, pi)->tuple], best.second);
  }
}

TEST(MatchTupleTest, EmptyAndMismatched) {
  const Matrix w(4, 8);
  EXPECT_FALSE(match_tuple_bruteforce(w, {}, {}));
  std::vector<Matrix> one = {Matrix(1, 8)};
  EXPECT_THROW(match_tuple_bruteforce(w, one, {}), Error);
}

// ---------------------------------------------------------------------------

// Span with one nonzero row; tuples placed at L1 offsets of 1 and 2 (d=2).
TEST(TripletLossTest, HandEvaluation) {
  const auto id = ProjectionModel::identity(2);
  const Matrix w = rows({{0, 0}, {0, 0}, {0, 0}, {0, 0}});
  const Matrix pos = rows({{1, 1}});
  const Matrix neg = rows({{2, 2}});
  EXPECT_DOUBLE_EQ(triplet_loss(w, pos, neg, id), 1.0 - 0.025 * 2.0);
  EXPECT_DOUBLE_EQ(triplet_loss(w, pos, neg, id), 0.95);
  EXPECT_DOUBLE_EQ(triplet_loss(w, pos, neg, id, {0.0, std::nullopt}), 1.0);
  EXPECT_DOUBLE_EQ(triplet_loss(w, pos, pos, id), (1.0 - 0.025) * 1.0);
}

TEST(TripletLossTest, HingeClamp) {
  const auto id = ProjectionModel::identity(2);
  const Matrix w = rows({{0, 0}, {0, 0}, {0, 0}, {0, 0}});
  const Matrix pos = rows({{0, 0}});
  const Matrix neg = rows({{100, 100}});
  EXPECT_DOUBLE_EQ(triplet_loss(w, pos, neg, id, {0.025, std::nullopt}), -2.5);
  const auto v = triplet_loss_detail(w, pos, neg, id, {0.025, 1.0});
  EXPECT_DOUBLE_EQ(v.loss, -1.0);
  EXPECT_TRUE(v.clamped);
  EXPECT_EQ(loss_gradient(w, pos, neg, id, {0.025, 1.0}), ModelGradient::zeros(2));
}

TEST(LossGradientTest, MatchesFiniteDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 40; ++seed) {
    const auto r = oracle::finite_difference(seed);
    if (!r.eligible) continue;
    ++checked;
    EXPECT_LE(r.worst_relative_error, 1e-4) << "seed " << seed;
  }
}

TEST(LossGradientTest, IdenticalTuplesScaleThePositiveGradient) {
  Rng rng(12);
  const auto m = ProjectionModel::initialized(8, 12);
  const Matrix w = random_matrix(4, 8, rng), t = random_matrix(3, 8, rng);
  const auto both = loss_gradient(w, t, t, m, {0.025, std::nullopt});
  const auto pos_only = loss_gradient(w, t, t, m, {0.0, std::nullopt});
  const auto a = both.parameters();
  const auto b = pos_only.parameters();
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].size(); ++i) EXPECT_NEAR(a[k][i], 0.975 * b[k][i], 1e-15);
}

TEST(LossGradientTest, ZeroAtStationaryPoint) {
  const auto id = ProjectionModel::identity(4);
  const Matrix w = rows({{1, 2, 3, 4}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}});
  const Matrix t = rows({{1, 2, 3, 4}});
  double loss = -1.0;
  EXPECT_EQ(loss_gradient(w, t, t, id, {}, &loss), ModelGradient::zeros(4));
  EXPECT_EQ(loss, 0.0);
}

// ---------------------------------------------------------------------------

// Separable toy corpus: each span shares a planted hash token with its
// positive tuple.
struct ToyCorpus {
  std::vector<Matrix> spans, tuples;
  std::vector<TripletSample> train, val;
};

ToyCorpus toy_corpus(std::size_t d, std::size_t n_train, std::size_t n_val, std::uint64_t seed) {
  ToyCorpus c;
  Rng rng(seed);
  const std::size_t n_tuples = 40;
  for (std::size_t t = 0; t < n_tuples; ++t) {
    Matrix m(3, d);
    const std::string key = "key" + std::to_string(t);
    const auto a = embed_text({key}, d);
    const auto b = embed_text({"filler" + std::to_string(t), "x"}, d);
    std::copy(a.begin(), a.end(), m.row(0).begin());
    std::copy(b.begin(), b.end(), m.row(1).begin());
    const auto c2 = embed_text({"attr" + std::to_string(t % 7)}, d);
    std::copy(c2.begin(), c2.end(), m.row(2).begin());
    c.tuples.push_back(m);
  }
  const std::size_t total = n_train + n_val;
  std::vector<std::size_t> pos(total);
  c.spans.reserve(total);
  for (std::size_t s = 0; s < total; ++s) {
    pos[s] = rng.below(n_tuples);
    Matrix m(4, d);
    const auto a = embed_text({"key" + std::to_string(pos[s]), "noise" + std::to_string(s)}, d);
    std::copy(a.begin(), a.end(), m.row(0).begin());
    for (std::size_t r = 1; r < 4; ++r) {
      const auto v = embed_text({"ctx" + std::to_string(rng.below(1000))}, d);
      std::copy(v.begin(), v.end(), m.row(r).begin());
    }
    c.spans.push_back(m);
  }
  for (std::size_t s = 0; s < total; ++s) {
    const std::size_t neg = sample_negative(n_tuples, pos[s], rng);
    TripletSample x{&c.spans[s], &c.tuples[pos[s]], &c.tuples[neg]};
    (s < n_train ? c.train : c.val).push_back(x);
  }
  return c;
}

TEST(TrainTest, ValidationLossDecreases) {
  const auto c = toy_corpus(64, 200, 50, 1);
  TrainConfig cfg;
  cfg.seed = 1;
  const auto r = train(c.train, c.val, cfg);
  ASSERT_GE(r.log.size(), 2u);
  EXPECT_EQ(r.log.front().epoch, 0u);
  double best = r.log.front().val_loss;
  for (const auto& e : r.log) best = std::min(best, e.val_loss);
  EXPECT_LT(best, r.log.front().val_loss);
  EXPECT_DOUBLE_EQ(mean_loss(c.val, r.model, cfg.loss_params()), best);
  EXPECT_EQ(r.log[r.best_epoch].val_loss, best);
}

TEST(TrainTest, DeterministicGivenSeed) {
  const auto c = toy_corpus(32, 60, 20, 2);
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.epochs = 5;
  const auto a = train(c.train, c.val, cfg);
  const auto b = train(c.train, c.val, cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(encode_jprj(a.model), encode_jprj(b.model));
  cfg.seed = 6;
  EXPECT_NE(train(c.train, c.val, cfg).model, a.model);
}

// With a zero learning rate the validation loss never improves.
TEST(TrainTest, PatienceSemantics) {
  const auto c = toy_corpus(16, 20, 8, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.weight_decay = 0.0;
  cfg.epochs = 20;
  cfg.patience = 0;
  auto r = train(c.train, c.val, cfg);
  EXPECT_EQ(r.epochs_run, 1u);
  EXPECT_EQ(r.best_epoch, 0u);
  EXPECT_EQ(r.log.size(), 2u);
  cfg.patience = 3;
  r = train(c.train, c.val, cfg);
  EXPECT_EQ(r.epochs_run, 3u);
  EXPECT_EQ(r.log.size(), 4u);
}

TEST(TrainTest, RejectsEmptySplitsAndBadConfig) {
  const auto c = toy_corpus(16, 4, 2, 4);
  TrainConfig cfg;
  EXPECT_THROW(train({}, c.val, cfg), ValidationError);
  EXPECT_THROW(train(c.train, {}, cfg), ValidationError);
  cfg.batch_size = 0;
  EXPECT_THROW(train(c.train, c.val, cfg), ValidationError);
}

TEST(TrainTest, DivergenceIsReported) {
  const auto c = toy_corpus(16, 8, 4, 5);
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.lambda = 1.0;
  try {
    train(c.train, c.val, cfg);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("hinge_margin"), std::string::npos) << e.what();
  }
}

TEST(TrainingLogTest, JsonLines) {
  const std::vector<EpochLog> log = {{0, 1.5, 2.0}, {1, 1.0, 1.25}};
  EXPECT_EQ(training_log_jsonl(log),
            "{\"epoch\":0,\"train_loss\":1.5,\"val_loss\":2.0}\n"
            "{\"epoch\":1,\"train_loss\":1.0,\"val_loss\":1.25}\n");
}

// ---------------------------------------------------------------------------

TEST(SampleNegativeTest, ForcedChoice) {
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    EXPECT_EQ(sample_negative(2, 0, rng), 1u);
    EXPECT_EQ(sample_negative(2, 1, rng), 0u);
  }
  EXPECT_THROW(sample_negative(1, 0, rng), ValidationError);
  EXPECT_THROW(sample_negative(5, 5, rng), ValidationError);
}

// Chi-squared goodness of fit over the nine admissible tuples. The critical
// value for 8 degrees of freedom at p = 0.01 is 20.090.
TEST(SampleNegativeTest, UniformChiSquared) {
  Rng rng(2026);
  std::vector<int> counts(10, 0);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) ++counts[sample_negative(10, 4, rng)];
  EXPECT_EQ(counts[4], 0);
  const double expected = draws / 9.0;
  double chi2 = 0.0;
  for (int t = 0; t < 10; ++t) {
    if (t == 4) continue;
    chi2 += (counts[t] - expected) * (counts[t] - expected) / expected;
  }
  EXPECT_LT(chi2, 20.090);
}

TEST(SampleNegativeTest, SameSeedSameSequence) {
  Table table;
  table.schema.attributes = {"name"};
  for (int t = 0; t < 20; ++t) table.tuples.push_back({"id" + std::to_string(t), {std::string("x")}});
  table.reindex();
  Rng a(9), b(9);
  for (int k = 0; k < 200; ++k) {
    const auto x = sample_negative(table, "id3", a);
    EXPECT_EQ(x, sample_negative(table, "id3", b));
    EXPECT_NE(x, "id3");
  }
  EXPECT_THROW(sample_negative(table, "nope", a), ValidationError);
}

// ---------------------------------------------------------------------------

TEST(JprjTest, RoundTripIsBitExactAfterFloatRounding) {
  auto m = ProjectionModel::initialized(8, 1);
  for (auto p : m.parameters()) {
    std::vector<double> v(p.begin(), p.end());
    round_to_float(v);
    std::copy(v.begin(), v.end(), p.begin());
  }
  const auto bytes = encode_jprj(m);
  EXPECT_EQ(bytes.size(), 12u + 4u * (2 * 64 + 2 * 8));
  EXPECT_EQ(bytes.substr(0, 4), "JPRJ");
  EXPECT_EQ(decode_jprj(bytes), m);
  EXPECT_EQ(encode_jprj(decode_jprj(bytes)), bytes);
}

TEST(JprjTest, RejectsDamagedInput) {
  const auto bytes = encode_jprj(ProjectionModel::identity(8));
  EXPECT_THROW(decode_jprj(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_jprj(bytes + "x"), FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_jprj(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(decode_jprj(bad), FormatError);
}

// ---------------------------------------------------------------------------

double doc_top1(const SynthCorpus& sc, const EncodedCorpus& enc, const ProjectionModel& m) {
  const Matcher matcher(sc.table, enc.tuples(), m);
  MatchOptions opt;
  opt.use_attention = false;
  opt.record_latency = false;
  std::size_t hit = 0;
  for (const auto& d : enc.documents()) {
    const auto r = matcher.match(d.doc_id, d.spans, opt);
    if (!r.ranking.empty() && r.ranking.front().tuple_id == sc.gold.at(d.doc_id)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(enc.documents().size());
}

TEST(SyntheticSanityTest, PlantedTupleIsTopOneBeforeAndAfterTraining) {
  const auto sc = generate_synthetic({});
  const HashProvider hp(64);
  const auto enc = EncodedCorpus::encode(sc.docs, sc.table, hp);
  EXPECT_GE(doc_top1(sc, enc, ProjectionModel::identity(64)), 0.90);

  const auto tr = make_triplets(sc.train, sc.table, 7);
  const auto va = make_triplets(sc.val, sc.table, 8);
  TrainConfig cfg;
  cfg.seed = 7;
  const auto r = train(resolve_triplets(tr, enc), resolve_triplets(va, enc), cfg);
  EXPECT_GE(doc_top1(sc, enc, r.model), 0.99);
}

}  // namespace
}  // namespace juno
