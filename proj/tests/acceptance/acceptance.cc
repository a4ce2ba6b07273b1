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

// Acceptance suite: one PASS/FAIL line per criterion; exit status is the
// number of failures. Criteria that drive the command-line tool call it
// in-process with the same arguments a user would type.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "juno/cli.hpp"
#include "juno/juno.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace juno;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "juno_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int juno_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "juno");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

// gen-synth through match in `dir`; returns false when a step fails.
bool cli_pipeline(const fs::path& dir, const std::string& threads, const std::string& dim,
                  const std::vector<std::string>& synth_args = {}) {
  const std::string d = dir.string();
  std::vector<std::string> gen = {"--threads", threads, "gen-synth", "--out-dir", d};
  gen.insert(gen.end(), synth_args.begin(), synth_args.end());
  const std::vector<std::string> corpus = {"--docs", d + "/docs.jsonl", "--db", d + "/db.json"};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
    head.insert(head.begin(), {"--threads", threads});
    head.insert(head.end(), corpus.begin(), corpus.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };
  const std::string emb = d + "/emb.jemb", model = d + "/model.jprj";
  return juno_cli(gen) == 0 &&
         juno_cli(with({"encode"}, {"--dim", dim, "--out", emb})) == 0 &&
         juno_cli(with({"train"}, {"--emb", emb, "--train", d + "/train.jsonl", "--val",
                                   d + "/val.jsonl", "--out", model})) == 0 &&
         juno_cli(with({"build-index"}, {"--emb", emb, "--model", model, "--train",
                                         d + "/train.jsonl", "--out", d + "/index.jidx"})) == 0 &&
         juno_cli(with({"match"}, {"--emb", emb, "--model", model, "--index", d + "/index.jidx",
                                   "--no-timing", "--out", d + "/matches.jsonl"})) == 0 &&
         juno_cli({"eval", "--matches", d + "/matches.jsonl", "--gold", d + "/gold.jsonl", "--out",
                   d + "/report.json"}) == 0;
}

// ---------------------------------------------------------------------------

// F1 at perfect recall, truncated to two decimals of a percentage.
Outcome metric_arithmetic() {
  struct Case {
    std::size_t hits;
    double expected_f1;
  };
  const Case cases[] = {{7505, 85.74}, {5880, 74.05}};
  Outcome o{true, ""};
  for (const auto& c : cases) {
    std::vector<MatchResult> rs;
    GoldLabels gold;
    for (std::size_t i = 0; i < 10000; ++i) {
      const std::string doc = "d" + std::to_string(i);
      gold[doc] = "gold";
      MatchResult r;
      r.doc_id = doc;
      r.ranking.push_back({i < c.hits ? "gold" : "other", 1, 0.0, 0.0});
      rs.push_back(r);
    }
    const auto m = evaluate(rs, gold).at(1);
    const double f1 = std::floor(m.f1 * 10000.0) / 100.0;
    o.pass = o.pass && m.recall == 1.0 && std::fabs(f1 - c.expected_f1) < 1e-9;
    o.detail += "P=" + fmt(100.0 * m.precision) + "% -> F1=" + fmt(f1) + "% ";
  }
  return o;
}

Outcome oracle_equivalence() {
  SynthConfig sc;
  sc.docs = 50;
  sc.tuples = 500;
  sc.seed = 11;
  const auto s = generate_synthetic(sc);
  const auto enc = EncodedCorpus::encode(s.docs, s.table, HashProvider(64));
  auto model = ProjectionModel::initialized(64, 11);
  Rng rng(11);
  for (double& b : model.b_doc) b = rng.uniform(-0.01, 0.01);
  const auto index =
      build_index(training_matches(s.train, enc, model), model, s.table, enc.tuples());
  const Matcher matcher(s.table, enc.tuples(), model, &index);
  std::vector<std::string> ids;
  for (const auto& t : s.table.tuples) ids.push_back(t.tuple_id);

  MatchOptions brute;
  brute.use_attention = false;
  brute.record_latency = false;
  MatchOptions wide = brute;
  wide.use_attention = true;
  wide.k_spans = 1000;
  wide.k_tuples = s.table.tuples.size();

  std::size_t agree = 0, identical = 0;
  for (const auto& d : enc.documents()) {
    const auto r = matcher.match(d.doc_id, d.spans, brute);
    const auto o = oracle::match_document(d.spans, enc.tuples(), ids, model);
    bool same = r.ranking.size() == o.size();
    for (std::size_t i = 0; same && i < o.size(); ++i) {
      same = r.ranking[i].tuple_id == o[i].tuple_id && r.ranking[i].votes == o[i].votes &&
             std::fabs(r.ranking[i].best_distance - o[i].best) <= 1e-12;
    }
    agree += same;
    identical += matcher.match(d.doc_id, d.spans, wide) == r;
  }
  const std::size_t n = enc.documents().size();
  return {agree == n && identical == n,
          std::to_string(agree) + "/" + std::to_string(n) + " match the brute-force oracle, " +
              std::to_string(identical) + "/" + std::to_string(n) + " identical with full k"};
}

Outcome gradient_check() {
  int eligible = 0, skipped = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; eligible < 100; ++seed) {
    const auto r = oracle::finite_difference(seed, 8);
    if (!r.eligible) {
      ++skipped;
      continue;
    }
    ++eligible;
    worst = std::max(worst, r.worst_relative_error);
  }
  return {worst <= 1e-4, "100 instances (" + std::to_string(skipped) +
                             " skipped near kinks), worst relative error " + fmt(worst, 3)};
}

Outcome training_efficacy() {
  const auto dir = work_dir() / "efficacy";
  if (!cli_pipeline(dir, "1", "64", {"--docs", "100", "--tuples", "1000", "--train-pairs", "200",
                                     "--seed", "7"})) {
    return {false, "pipeline failed"};
  }
  const auto rep = nlohmann::json::parse(read_file((dir / "report.json").string()));
  const double f1 = rep.at("metrics")[0].at("f1").get<double>();
  std::vector<double> val;
  const auto log = read_file((dir / "model.jprj.log.jsonl").string());
  std::istringstream in(log);
  for (std::string line; std::getline(in, line);) {
    val.push_back(nlohmann::json::parse(line).at("val_loss").get<double>());
  }
  const bool improved = val.size() > 1 && val.back() < val.front();
  return {f1 >= 0.90 && improved, "F1@1 " + fmt(f1) + ", validation loss " + fmt(val.front()) +
                                      " -> " + fmt(val.back()) + " over " +
                                      std::to_string(val.size() - 1) + " epochs"};
}

Outcome pruning_economics() {
  const auto out = (work_dir() / "bench.json").string();
  if (juno_cli({"bench", "--db-sizes", "10000", "--docs", "5", "--words", "50", "--out", out}) != 0) {
    return {false, "bench failed"};
  }
  const auto row = nlohmann::json::parse(read_file(out)).at(0);
  const double ratio = row.at("comparison_ratio").get<double>();
  const double worst = row.at("max_comparisons_pruned").get<double>();
  return {ratio >= 4.0 && worst <= 2500.0,
          "unpruned " + fmt(row.at("comparisons_unpruned").get<double>(), 6) + " vs pruned " +
              fmt(row.at("comparisons_pruned").get<double>(), 6) + " per document (x" +
              fmt(ratio) + "), max pruned " + fmt(worst, 6)};
}

Outcome attention_scores() {
  bool ok = kDefaultSpanK == 25 && kDefaultTupleK == 100 && MatchOptions{}.k_spans == 25 &&
            MatchOptions{}.k_tuples == 100;
  Rng rng(6);
  for (int n = 0; n < 100 && ok; ++n) {
    std::vector<double> c(2 + rng.below(500));
    for (double& x : c) x = rng.uniform(0.0, 10.0);
    const auto a = normalize_distances(c);
    const auto lo = std::min_element(c.begin(), c.end()) - c.begin();
    const auto hi = std::max_element(c.begin(), c.end()) - c.begin();
    ok = a[lo] == 1.0 && a[hi] == 0.0;
  }
  const std::vector<double> flat(40, 2.5);
  ok = ok && normalize_distances(flat) == std::vector<double>(40, 1.0);
  std::string detail = "endpoints and degenerate case ok;";
  for (std::size_t k : {kDefaultSpanK, kDefaultTupleK}) {
    std::vector<double> c(1000);
    for (double& x : c) x = rng.uniform(0.0, 1.0);
    const auto v = make_attention(c, k);
    const auto nz = std::count_if(v.scores.begin(), v.scores.end(), [](double x) { return x != 0.0; });
    ok = ok && static_cast<std::size_t>(nz) == k && v.retained.size() == k;
    detail += " k=" + std::to_string(k) + " -> " + std::to_string(nz) + " nonzeros;";
  }
  return {ok, detail};
}

Outcome dbscan_correctness() {
  Rng rng(2024);
  int agree = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<std::vector<double>> pts;
    Matrix m(n, 2);
    for (std::size_t p = 0; p < n; ++p) {
      const double cx = static_cast<double>(rng.below(3)) * 4.0;
      pts.push_back({cx + rng.uniform(-1, 1), rng.uniform(-1, 1)});
      m(p, 0) = pts.back()[0];
      m(p, 1) = pts.back()[1];
    }
    const double eps = inst % 2 ? default_eps(m) : rng.uniform(0.1, 1.0);
    const std::size_t min_pts = 2 + rng.below(3);
    agree += cluster_dbscan(m, eps, min_pts) == oracle::dbscan(pts, eps, min_pts);
  }
  return {agree == 20, std::to_string(agree) + "/20 instances equal the oracle labels"};
}

Outcome determinism() {
  const char* files[] = {"emb.jemb", "model.jprj", "index.jidx", "matches.jsonl"};
  const std::vector<std::string> threads = {"1", "2", "4"};
  std::vector<std::vector<std::string>> bytes;
  for (std::size_t r = 0; r < threads.size(); ++r) {
    const auto dir = work_dir() / ("determinism" + std::to_string(r));
    if (!cli_pipeline(dir, threads[r], "64")) return {false, "pipeline failed"};
    bytes.emplace_back();
    for (const char* f : files) bytes.back().push_back(read_file((dir / f).string()));
  }
  bool same = true;
  for (std::size_t r = 1; r < bytes.size(); ++r) same = same && bytes[r] == bytes[0];
  return {same, "checkpoint, index and matches byte-identical across 1, 2 and 4 threads"};
}

Outcome label_efficiency() {
  Outcome o{true, ""};
  for (const char* seed : {"1", "2", "3"}) {
    const auto out = (work_dir() / ("labels" + std::string(seed) + ".json")).string();
    if (juno_cli({"bench", "--label-sizes", "25,50,100,200", "--seed", seed, "--out", out}) != 0) {
      return {false, "bench failed"};
    }
    const auto j = nlohmann::json::parse(read_file(out));
    const double first = j.front().at("f1_at_1").get<double>();
    const double last = j.back().at("f1_at_1").get<double>();
    o.pass = o.pass && last >= first;
    o.detail += "seed " + std::string(seed) + ": " + fmt(first, 3) + " -> " + fmt(last, 3) + "; ";
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric arithmetic", 1, metric_arithmetic},
      {2, "oracle equivalence", 30, oracle_equivalence},
      {3, "gradient correctness", 10, gradient_check},
      {4, "training efficacy", 120, training_efficacy},
      {5, "pruning economics", 120, pruning_economics},
      {6, "attention scores and k-max", 1, attention_scores},
      {7, "DBSCAN correctness", 10, dbscan_correctness},
      {8, "determinism", 0, determinism},
      {9, "label-efficiency direction", 300, label_efficiency},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_s <= 0 || secs <= c.budget_s;
    if (!in_time) o.detail += " [over the " + fmt(c.budget_s) + " s budget]";
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << " (" << fmt(secs, 3)
              << " s): " << o.detail << std::endl;
  }
  fs::remove_all(work_dir());
  return failures;
}
