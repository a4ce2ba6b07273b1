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

// Planted-correlation synthetic corpus (see docs/synthetic_corpus.md).
//
// A movie-like table with attributes actor (multi-valued), director, genre
// (multi-valued), id, title and year (sometimes missing). Each document is
// generated from one gold tuple: its words are that tuple's attribute values
// mixed with distractor vocabulary, laid out as short text lines.

#pragma once

#include <set>
#include <string>
#include <vector>

#include "juno/corpus.hpp"
#include "juno/doc_model.hpp"

namespace juno {

struct SynthConfig {
  std::size_t docs = 100;
  std::size_t tuples = 1000;
  std::size_t words_per_doc = 12;
  std::size_t train_pairs = 200;
  std::size_t val_pairs = 50;
  std::uint64_t seed = 7;

  void validate() const {
    if (tuples < 2) throw ValidationError("synthetic table needs at least two tuples");
    if (words_per_doc < 4) throw ValidationError("synthetic documents need at least four words");
  }
};

struct SynthCorpus {
  Table table;
  std::vector<Document> docs;
  GoldLabels gold;
  std::vector<LabeledSpan> planted;  // every planted word, document order
  std::vector<LabeledSpan> train;
  std::vector<LabeledSpan> val;
};

namespace synth_detail {

inline constexpr const char* kSyllables[] = {
    "ba", "ko", "ri", "mel", "tan", "vo", "zu", "ph", "dra", "len", "sor", "qui",
    "ma",  "nex", "lo", "fi", "gar", "ux", "te", "wyn", "cal", "bri", "os", "ke",
    "ju", "pel", "ra", "sti", "von", "ad", "ly", "mor"};

inline constexpr const char* kGenres[] = {"crime",  "action",  "drama",   "comedy",
                                          "horror", "western", "romance", "thriller",
                                          "mystery", "fantasy", "musical", "war"};

inline constexpr const char* kDistractors[] = {
    "now", "showing", "tickets", "at", "the", "cinema", "presents", "a", "film",
    "only", "in", "theaters", "this", "friday", "official", "selection", "festival",
    "winner", "best", "picture", "coming", "soon", "rated", "for", "all", "audiences"};

inline std::string pseudo_word(Rng& rng) {
  const std::size_t n = 2 + rng.below(2);
  std::string w;
  for (std::size_t i = 0; i < n; ++i) w += kSyllables[rng.below(std::size(kSyllables))];
  w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

inline std::string pseudo_name(Rng& rng) { return pseudo_word(rng) + " " + pseudo_word(rng); }

// Document ids are long and letter-only. The hash provider's visual row is
// embed("VIS", doc_id); a short or digit-heavy id would land close to some
// tuple's short rows and attract the votes of every weakly matched span.
inline std::string doc_id(std::size_t i, Rng& rng) {
  std::string s;
  for (int k = 0; k < 4 || i > 0; ++k) {
    s.insert(s.begin(), static_cast<char>('a' + i % 26));
    i /= 26;
  }
  s += '-';
  for (int k = 0; k < 20; ++k) s += static_cast<char>('a' + rng.below(26));
  return "scan-" + s;
}

inline std::string pad_id(char prefix, std::size_t i, std::size_t total) {
  const std::size_t width = std::max<std::size_t>(4, std::to_string(total).size());
  auto s = std::to_string(i);
  return std::string(1, prefix) + std::string(width - s.size(), '0') + s;
}

}  // namespace synth_detail

inline SynthCorpus generate_synthetic(const SynthConfig& cfg) {
  using namespace synth_detail;
  cfg.validate();
  Rng rng(cfg.seed);
  SynthCorpus out;
  out.table.schema.attributes = {"actor", "director", "genre", "id", "title", "year"};
  for (std::size_t t = 0; t < cfg.tuples; ++t) {
    Tuple tup;
    tup.tuple_id = pad_id('t', t, cfg.tuples);
    std::vector<std::string> actors;
    for (std::size_t a = 0, n = 1 + rng.below(3); a < n; ++a) actors.push_back(pseudo_name(rng));
    std::set<std::string> genres;
    for (std::size_t g = 0, n = 1 + rng.below(2); g < n; ++g) {
      genres.insert(kGenres[rng.below(std::size(kGenres))]);
    }
    std::string title = pseudo_word(rng);
    for (std::size_t w = 1, n = 1 + rng.below(3); w < n; ++w) title += " " + pseudo_word(rng);
    AttributeValue year = Missing{};
    if (rng.below(100) >= 15) year = std::to_string(1930 + rng.below(90));
    tup.values = {actors, pseudo_name(rng),
                  std::vector<std::string>(genres.begin(), genres.end()), tup.tuple_id, title,
                  year};
    out.table.tuples.push_back(std::move(tup));
  }
  out.table.reindex();

  // Gold tuples: distinct while the table is large enough.
  std::vector<std::size_t> order(cfg.tuples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  const std::size_t max_planted = std::max<std::size_t>(1, cfg.words_per_doc * 3 / 5);
  for (std::size_t d = 0; d < cfg.docs; ++d) {
    const auto& gold = out.table.tuples[order[d % order.size()]];
    Document doc;
    doc.doc_id = doc_id(d, rng);
    out.gold.emplace(doc.doc_id, gold.tuple_id);

    // Lines of planted words: title, director, actors, year.
    std::vector<std::vector<std::string>> planted_lines;
    planted_lines.push_back(split_whitespace(std::get<std::string>(gold.values[4])));
    planted_lines.push_back(split_whitespace(std::get<std::string>(gold.values[1])));
    for (const auto& a : std::get<std::vector<std::string>>(gold.values[0])) {
      planted_lines.push_back(split_whitespace(a));
    }
    if (const auto* y = std::get_if<std::string>(&gold.values[5])) planted_lines.push_back({*y});
    std::size_t budget = max_planted;
    for (auto& line : planted_lines) {
      if (line.size() > budget) line.resize(budget);
      budget -= line.size();
    }
    std::erase_if(planted_lines, [](const auto& l) { return l.empty(); });
    std::size_t planted_count = 0;
    for (const auto& l : planted_lines) planted_count += l.size();

    // Distractor lines fill the remaining words; lines are interleaved.
    std::size_t remaining = cfg.words_per_doc - planted_count;
    std::vector<std::pair<bool, std::vector<std::string>>> lines;
    for (auto& l : planted_lines) lines.push_back({true, std::move(l)});
    // Distractors are drawn without replacement (while the vocabulary lasts)
    // so that repeats of one word cannot stack votes on a single tuple.
    std::vector<std::string> pool(std::begin(kDistractors), std::end(kDistractors));
    rng.shuffle(pool);
    std::size_t next_distractor = 0;
    while (remaining > 0) {
      const std::size_t n = std::min<std::size_t>(remaining, 2 + rng.below(4));
      std::vector<std::string> l;
      for (std::size_t k = 0; k < n; ++k) l.push_back(pool[next_distractor++ % pool.size()]);
      const std::size_t at = rng.below(lines.size() + 1);
      lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(at), {false, std::move(l)});
      remaining -= n;
    }

    // Layout: one page and column, a paragraph per four lines.
    auto& nodes = doc.layout.nodes;
    auto add = [&](std::size_t parent, Level level) {
      LayoutNode n;
      n.level = level;
      n.parent = parent;
      nodes.push_back(std::move(n));
      const std::size_t self = nodes.size() - 1;
      if (parent == kNoParent) doc.layout.pages.push_back(self);
      else nodes[parent].children.push_back(self);
      return self;
    };
    const std::size_t page = add(kNoParent, Level::Page);
    const std::size_t col = add(page, Level::Column);
    std::size_t par = kNoParent;
    std::size_t word_index = 0;
    for (std::size_t li = 0; li < lines.size(); ++li) {
      if (li % 4 == 0) par = add(col, Level::Paragraph);
      const std::size_t line = add(par, Level::Line);
      const int y = 40 + 40 * static_cast<int>(li);
      for (std::size_t k = 0; k < lines[li].second.size(); ++k) {
        const int x = 40 + 90 * static_cast<int>(k);
        doc.elements.push_back(TextElement{lines[li].second[k], x, y, 80, 30});
        const std::size_t leaf = add(line, Level::Word);
        nodes[leaf].element = doc.elements.size() - 1;
        nodes[leaf].bbox = {x, y, x + 80, y + 30};
        if (lines[li].first) out.planted.push_back({doc.doc_id, word_index, gold.tuple_id});
        ++word_index;
      }
    }
    // Bounding boxes bottom-up (children follow parents in pre-order).
    for (std::size_t i = nodes.size(); i-- > 0;) {
      if (nodes[i].children.empty()) continue;
      BBox u = nodes[nodes[i].children.front()].bbox;
      for (std::size_t c : nodes[i].children) u = u.united(nodes[c].bbox);
      nodes[i].bbox = u;
    }
    nodes[page].bbox = nodes[page].bbox.united({0, 0, 1000, 1400});
    validate(doc);
    out.docs.push_back(std::move(doc));
  }

  // Training and validation pairs: planted spans spread evenly over documents
  // (round-robin over a shuffled per-document order), disjoint between splits.
  std::map<std::string, std::vector<LabeledSpan>> per_doc;
  for (const auto& p : out.planted) per_doc[p.doc_id].push_back(p);
  for (auto& [id, v] : per_doc) rng.shuffle(v);
  std::vector<LabeledSpan> spread;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (auto& [id, v] : per_doc) {
      if (round < v.size()) {
        spread.push_back(v[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  const std::size_t n_train = std::min(cfg.train_pairs, spread.size());
  const std::size_t n_val = std::min(cfg.val_pairs, spread.size() - n_train);
  out.train.assign(spread.begin(), spread.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(spread.begin() + static_cast<std::ptrdiff_t>(n_train),
                 spread.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  return out;
}

}  // namespace juno
