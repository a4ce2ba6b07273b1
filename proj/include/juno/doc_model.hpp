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

// Document and table data model.
//
// A document is a set of atomic elements (words and image regions) plus a
// five-level layout tree page > column > paragraph > line > word whose leaves
// are the words in reading order. Documents come from hOCR or from the
// canonical document JSON; relational tables come from a JSON array of flat
// objects.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"
#include "juno/common.hpp"
#include "juno/html.hpp"

namespace juno {

struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }

  bool contains(const BBox& o) const {
    return x0 <= o.x0 && y0 <= o.y0 && o.x1 <= x1 && o.y1 <= y1;
  }

  BBox united(const BBox& o) const {
    return {std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
  }

  bool operator==(const BBox&) const = default;
};

struct TextElement {
  std::string text_data;
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  BBox bbox() const { return {x, y, x + w, y + h}; }
  bool operator==(const TextElement&) const = default;
};

// An image region. The crop rectangle (x, y, w, h) refers to the rendered page
// image at `source`; `page` is the layout-tree node of the enclosing page.
struct ImageElement {
  std::string source;
  std::size_t page = 0;
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  BBox bbox() const { return {x, y, x + w, y + h}; }
  bool operator==(const ImageElement&) const = default;
};

using Element = std::variant<TextElement, ImageElement>;

enum class Level { Page = 0, Column = 1, Paragraph = 2, Line = 3, Word = 4 };

inline const char* level_name(Level l) {
  switch (l) {
    case Level::Page: return "page";
    case Level::Column: return "column";
    case Level::Paragraph: return "paragraph";
    case Level::Line: return "line";
    case Level::Word: return "word";
  }
  return "?";
}

inline constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);

struct LayoutNode {
  Level level = Level::Page;
  BBox bbox;
  std::size_t parent = kNoParent;
  std::vector<std::size_t> children;
  // Word leaves only: index into Document::elements.
  std::optional<std::size_t> element;

  bool operator==(const LayoutNode&) const = default;
};

// Nodes are stored in pre-order, so iterating `nodes` visits word leaves in
// reading order.
struct LayoutTree {
  std::vector<LayoutNode> nodes;
  std::vector<std::size_t> pages;

  bool operator==(const LayoutTree&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<Element> elements;
  LayoutTree layout;
  std::optional<std::string> image_ref;

  bool operator==(const Document&) const = default;
};

// A word in reading order together with the line it belongs to.
struct WordRef {
  const TextElement* element = nullptr;
  std::size_t line = 0;
};

inline std::vector<WordRef> words(const Document& doc) {
  std::vector<WordRef> out;
  for (const auto& node : doc.layout.nodes) {
    if (node.level == Level::Word && node.element) {
      out.push_back({&std::get<TextElement>(doc.elements[*node.element]), node.parent});
    }
  }
  return out;
}

inline std::size_t word_count(const Document& doc) {
  return static_cast<std::size_t>(std::count_if(
      doc.elements.begin(), doc.elements.end(),
      [](const Element& e) { return std::holds_alternative<TextElement>(e); }));
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

inline std::string collapse_ws(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      space = true;
    } else {
      if (space && !out.empty()) out.push_back(' ');
      space = false;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

// Checks every structural invariant of a document. Throws ValidationError
// describing the first violation.
inline void validate(const Document& doc) {
  const auto& nodes = doc.layout.nodes;
  auto where = [&](std::size_t i) {
    return std::string(level_name(nodes[i].level)) + " node " + std::to_string(i);
  };
  std::size_t leaves = 0;
  std::vector<int> seen(doc.elements.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.parent == kNoParent) {
      if (n.level != Level::Page) throw ValidationError(where(i) + ": only pages may be roots");
    } else if (static_cast<int>(nodes[n.parent].level) + 1 != static_cast<int>(n.level)) {
      throw ValidationError(where(i) + ": level does not follow its parent's level");
    }
    for (std::size_t c : n.children) {
      if (c >= nodes.size() || nodes[c].parent != i) {
        throw ValidationError(where(i) + ": broken parent/child link");
      }
      if (!n.bbox.contains(nodes[c].bbox)) {
        throw ValidationError(where(i) + ": bbox does not enclose child " + where(c));
      }
    }
    if (n.level == Level::Word) {
      if (!n.children.empty()) throw ValidationError(where(i) + ": word node has children");
      if (!n.element || *n.element >= doc.elements.size() ||
          !std::holds_alternative<TextElement>(doc.elements[*n.element])) {
        throw ValidationError(where(i) + ": word leaf does not reference a text element");
      }
      const auto& t = std::get<TextElement>(doc.elements[*n.element]);
      if (t.bbox() != n.bbox) throw ValidationError(where(i) + ": leaf bbox differs from element");
      ++seen[*n.element];
      ++leaves;
    } else if (n.element) {
      throw ValidationError(where(i) + ": only word leaves reference elements");
    }
  }
  std::size_t text_count = 0;
  std::size_t last_leaf_element = 0;
  bool first = true;
  for (std::size_t e = 0; e < doc.elements.size(); ++e) {
    if (const auto* t = std::get_if<TextElement>(&doc.elements[e])) {
      ++text_count;
      if (seen[e] != 1) {
        throw ValidationError("text element " + std::to_string(e) +
                              " must appear as exactly one word leaf");
      }
      if (t->w <= 0 || t->h <= 0 || t->x < 0 || t->y < 0) {
        throw ValidationError("text element " + std::to_string(e) + ": invalid geometry");
      }
      if (detail::trim(t->text_data).empty()) {
        throw ValidationError("text element " + std::to_string(e) + ": empty text");
      }
    } else {
      const auto& img = std::get<ImageElement>(doc.elements[e]);
      if (img.page >= nodes.size() || nodes[img.page].level != Level::Page) {
        throw ValidationError("image element " + std::to_string(e) + ": page reference invalid");
      }
      if (img.w <= 0 || img.h <= 0 || !nodes[img.page].bbox.contains(img.bbox())) {
        throw ValidationError("image element " + std::to_string(e) +
                              ": crop rectangle outside page bounds");
      }
    }
  }
  if (leaves != text_count) throw ValidationError("word leaves and text elements differ in count");
  // Reading order: leaves in pre-order reference text elements in increasing order.
  for (const auto& n : nodes) {
    if (n.level != Level::Word) continue;
    if (!first && *n.element <= last_leaf_element) {
      throw ValidationError("word leaves are not in element order");
    }
    first = false;
    last_leaf_element = *n.element;
  }
}

// ---------------------------------------------------------------------------
// hOCR

struct HocrDiagnostics {
  std::size_t skipped_words = 0;     // word without bbox or without text
  std::size_t enclosure_repairs = 0;  // parent bbox grown to cover children
};

namespace detail {

struct RawNode {
  int level = -1;  // -1 root, 0..4 per Level
  std::optional<BBox> bbox;
  std::string text;
  bool is_image = false;
  std::vector<RawNode> children;
};

inline std::optional<std::string_view> title_property(std::string_view title,
                                                      std::string_view key) {
  std::size_t pos = 0;
  while (pos <= title.size()) {
    auto end = title.find(';', pos);
    if (end == std::string_view::npos) end = title.size();
    auto item = title.substr(pos, end - pos);
    auto b = item.find_first_not_of(" \t\r\n");
    if (b != std::string_view::npos) {
      item.remove_prefix(b);
      if (item.substr(0, key.size()) == key &&
          (item.size() == key.size() || item[key.size()] == ' ' || item[key.size()] == '\t')) {
        return item.substr(key.size());
      }
    }
    pos = end + 1;
  }
  return std::nullopt;
}

inline std::optional<BBox> parse_title_bbox(std::string_view title) {
  auto prop = title_property(title, "bbox");
  if (!prop) return std::nullopt;
  std::istringstream in{std::string(*prop)};
  BBox b;
  if (!(in >> b.x0 >> b.y0 >> b.x1 >> b.y1)) {
    throw ParseError("hOCR: malformed bbox property \"" + std::string(title) + "\"");
  }
  return b;
}

inline std::optional<std::string> parse_title_image(std::string_view title) {
  auto prop = title_property(title, "image");
  if (!prop) return std::nullopt;
  auto s = trim(*prop);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

// Maps an hOCR class attribute to a layout level; -1 when not structural.
inline int hocr_level(std::string_view cls, bool& is_image) {
  is_image = false;
  int level = -1;
  std::size_t pos = 0;
  while (pos < cls.size()) {
    auto b = cls.find_first_not_of(" \t\r\n", pos);
    if (b == std::string_view::npos) break;
    auto e = cls.find_first_of(" \t\r\n", b);
    if (e == std::string_view::npos) e = cls.size();
    auto token = cls.substr(b, e - b);
    if (token == "ocr_page") level = 0;
    else if (token == "ocr_carea") level = 1;
    else if (token == "ocr_par") level = 2;
    else if (token == "ocr_line" || token == "ocr_textfloat" || token == "ocr_header" ||
             token == "ocr_caption")
      level = 3;
    else if (token == "ocrx_word") level = 4;
    else if (token == "ocr_image" || token == "ocr_photo") is_image = true;
    pos = e;
  }
  return level;
}

class HocrBuilder {
 public:
  HocrBuilder(Document& doc, HocrDiagnostics& diag) : doc_(doc), diag_(diag) {}

  void build(const RawNode& root) {
    attach(kNoParent, -1, root.children);
  }

 private:
  // Attaches raw children below tree node `parent` (of level `parent_level`),
  // synthesizing single intermediate nodes for skipped levels.
  void attach(std::size_t parent, int parent_level, const std::vector<RawNode>& kids) {
    std::size_t i = 0;
    while (i < kids.size()) {
      const RawNode& k = kids[i];
      if (k.is_image) {
        add_image(k);
        ++i;
        continue;
      }
      if (k.level <= parent_level) {
        throw ParseError(std::string("hOCR: ") + level_name(static_cast<Level>(k.level)) +
                         " nested inside " + level_name(static_cast<Level>(parent_level)));
      }
      if (k.level == parent_level + 1) {
        add_node(parent, k);
        ++i;
        continue;
      }
      // Run of children that all skip the next level share one synthesized node.
      std::size_t j = i;
      std::vector<RawNode> run;
      while (j < kids.size() && (kids[j].is_image || kids[j].level > parent_level + 1)) {
        run.push_back(kids[j]);
        ++j;
      }
      RawNode synth;
      synth.level = parent_level + 1;
      synth.children = std::move(run);
      add_node(parent, synth);
      i = j;
    }
  }

  void add_node(std::size_t parent, const RawNode& raw) {
    const auto level = static_cast<Level>(raw.level);
    if (level == Level::Word) {
      auto text = trim(collapse_ws(raw.text));
      if (!raw.bbox || text.empty() || raw.bbox->width() <= 0 || raw.bbox->height() <= 0 ||
          raw.bbox->x0 < 0 || raw.bbox->y0 < 0) {
        ++diag_.skipped_words;
        return;
      }
      const BBox& b = *raw.bbox;
      doc_.elements.push_back(TextElement{text, b.x0, b.y0, b.width(), b.height()});
      LayoutNode n;
      n.level = Level::Word;
      n.bbox = b;
      n.parent = parent;
      n.element = doc_.elements.size() - 1;
      link(parent, std::move(n));
      return;
    }
    auto& nodes = doc_.layout.nodes;
    LayoutNode n;
    n.level = level;
    n.parent = parent;
    if (raw.bbox) n.bbox = *raw.bbox;
    const std::size_t self = link(parent, std::move(n));
    if (level == Level::Page) current_page_ = self;
    attach(self, raw.level, raw.children);
    auto& me = nodes[self];
    if (me.children.empty() && level != Level::Page) {
      // Nothing survived below this node; drop it (it is the last node added).
      unlink(self);
      return;
    }
    if (!me.children.empty()) {
      BBox u = nodes[me.children.front()].bbox;
      for (std::size_t c : me.children) u = u.united(nodes[c].bbox);
      if (!raw.bbox) {
        me.bbox = u;
      } else if (!me.bbox.contains(u)) {
        me.bbox = me.bbox.united(u);
        ++diag_.enclosure_repairs;
      }
    }
  }

  void add_image(const RawNode& raw) {
    if (!raw.bbox || raw.bbox->width() <= 0 || raw.bbox->height() <= 0) return;
    if (current_page_ == kNoParent) return;
    const BBox& b = *raw.bbox;
    doc_.elements.push_back(ImageElement{doc_.image_ref.value_or(""), current_page_, b.x0, b.y0,
                                         b.width(), b.height()});
  }

  std::size_t link(std::size_t parent, LayoutNode n) {
    auto& nodes = doc_.layout.nodes;
    nodes.push_back(std::move(n));
    const std::size_t self = nodes.size() - 1;
    if (parent == kNoParent) doc_.layout.pages.push_back(self);
    else nodes[parent].children.push_back(self);
    return self;
  }

  void unlink(std::size_t self) {
    auto& nodes = doc_.layout.nodes;
    const std::size_t parent = nodes[self].parent;
    if (parent == kNoParent) doc_.layout.pages.pop_back();
    else nodes[parent].children.pop_back();
    nodes.pop_back();
  }

 private:
  Document& doc_;
  HocrDiagnostics& diag_;
  std::size_t current_page_ = kNoParent;
};

}  // namespace detail

// Parses hOCR HTML into a Document. hOCR levels map page>page, carea>column,
// par>paragraph, line (and textfloat/header/caption)>line, ocrx_word>word.
// Words without a bbox or text are skipped and counted in `diag`.
inline Document parse_hocr(std::string_view html, std::string doc_id = {},
                           HocrDiagnostics* diag = nullptr) {
  HocrDiagnostics local;
  HocrDiagnostics& d = diag ? *diag : local;
  Document doc;
  doc.doc_id = std::move(doc_id);

  detail::RawNode root;
  std::vector<detail::RawNode*> open_hocr{&root};
  // For every open HTML element: whether it pushed onto open_hocr.
  std::vector<bool> pushed;
  int in_word = 0;

  html::tokenize(
      html,
      [&](const html::Tag& tag) {
        bool is_image = false;
        int level = -1;
        if (auto it = tag.attributes.find("class"); it != tag.attributes.end()) {
          level = detail::hocr_level(it->second, is_image);
        }
        const auto title_it = tag.attributes.find("title");
        const std::string_view title =
            title_it == tag.attributes.end() ? std::string_view{} : title_it->second;
        bool opened = false;
        if ((level >= 0 || is_image) && in_word == 0) {
          detail::RawNode node;
          node.level = level;
          node.is_image = is_image && level < 0;
          node.bbox = detail::parse_title_bbox(title);
          if (level == 0 && !doc.image_ref) doc.image_ref = detail::parse_title_image(title);
          open_hocr.back()->children.push_back(std::move(node));
          open_hocr.push_back(&open_hocr.back()->children.back());
          opened = true;
          if (level == 4) ++in_word;
        } else if (level == 4) {
          throw ParseError("hOCR: ocrx_word nested inside another word");
        }
        if (tag.self_closing) {
          if (opened) {
            if (open_hocr.back()->level == 4) --in_word;
            open_hocr.pop_back();
          }
        } else {
          pushed.push_back(opened);
        }
      },
      [&](std::string_view /*name*/) {
        if (pushed.back()) {
          if (open_hocr.back()->level == 4) --in_word;
          open_hocr.pop_back();
        }
        pushed.pop_back();
      },
      [&](std::string_view text) {
        if (in_word > 0) open_hocr.back()->text.append(text);
      });

  detail::HocrBuilder builder(doc, d);
  builder.build(root);
  validate(doc);
  return doc;
}

// ---------------------------------------------------------------------------
// Canonical document JSON

namespace detail {

inline BBox json_bbox(const nlohmann::json& node, const std::string& path) {
  auto it = node.find("bbox");
  if (it == node.end()) throw ValidationError(path + ".bbox: missing");
  const auto& b = *it;
  if (!b.is_array() || b.size() != 4 ||
      !std::all_of(b.begin(), b.end(), [](const auto& v) { return v.is_number_integer(); })) {
    throw ValidationError(path + ".bbox: expected [x0, y0, x1, y1] integers");
  }
  BBox out{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
  if (out.width() < 0 || out.height() < 0) {
    throw ValidationError(path + ".bbox: x1 < x0 or y1 < y0");
  }
  return out;
}

inline const nlohmann::json& json_array(const nlohmann::json& node, const char* key,
                                        const std::string& path) {
  auto it = node.find(key);
  if (it == node.end() || !it->is_array()) {
    throw ValidationError(path + "." + key + ": expected an array");
  }
  return *it;
}

inline nlohmann::json bbox_json(const BBox& b) { return {b.x0, b.y0, b.x1, b.y1}; }

}  // namespace detail

inline Document parse_doc_json(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("document JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("document: root must be an object");
  Document doc;
  auto id = j.find("doc_id");
  if (id == j.end() || !id->is_string()) throw ValidationError("doc_id: expected a string");
  doc.doc_id = id->get<std::string>();
  if (auto ir = j.find("image_ref"); ir != j.end() && !ir->is_null()) {
    if (!ir->is_string()) throw ValidationError("image_ref: expected a string or null");
    doc.image_ref = ir->get<std::string>();
  }

  auto& nodes = doc.layout.nodes;
  auto add = [&](std::size_t parent, Level level, BBox bbox) {
    LayoutNode n;
    n.level = level;
    n.bbox = bbox;
    n.parent = parent;
    nodes.push_back(std::move(n));
    const std::size_t self = nodes.size() - 1;
    if (parent == kNoParent) doc.layout.pages.push_back(self);
    else nodes[parent].children.push_back(self);
    return self;
  };

  const auto& pages = detail::json_array(j, "pages", "document");
  std::vector<std::pair<std::size_t, const nlohmann::json*>> images;
  for (std::size_t p = 0; p < pages.size(); ++p) {
    const std::string pp = "pages[" + std::to_string(p) + "]";
    const std::size_t page = add(kNoParent, Level::Page, detail::json_bbox(pages[p], pp));
    const auto& cols = detail::json_array(pages[p], "columns", pp);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string cp = pp + ".columns[" + std::to_string(c) + "]";
      const std::size_t col = add(page, Level::Column, detail::json_bbox(cols[c], cp));
      const auto& pars = detail::json_array(cols[c], "paragraphs", cp);
      for (std::size_t q = 0; q < pars.size(); ++q) {
        const std::string qp = cp + ".paragraphs[" + std::to_string(q) + "]";
        const std::size_t par = add(col, Level::Paragraph, detail::json_bbox(pars[q], qp));
        const auto& lines = detail::json_array(pars[q], "lines", qp);
        for (std::size_t l = 0; l < lines.size(); ++l) {
          const std::string lp = qp + ".lines[" + std::to_string(l) + "]";
          const std::size_t line = add(par, Level::Line, detail::json_bbox(lines[l], lp));
          const auto& ws = detail::json_array(lines[l], "words", lp);
          for (std::size_t w = 0; w < ws.size(); ++w) {
            const std::string wp = lp + ".words[" + std::to_string(w) + "]";
            const BBox b = detail::json_bbox(ws[w], wp);
            auto t = ws[w].find("text");
            if (t == ws[w].end() || !t->is_string()) {
              throw ValidationError(wp + ".text: expected a string");
            }
            auto text = detail::trim(t->get<std::string>());
            if (text.empty()) throw ValidationError(wp + ".text: empty");
            if (b.width() <= 0 || b.height() <= 0) {
              throw ValidationError(wp + ".bbox: word must have positive width and height");
            }
            if (b.x0 < 0 || b.y0 < 0) throw ValidationError(wp + ".bbox: negative coordinates");
            doc.elements.push_back(TextElement{text, b.x0, b.y0, b.width(), b.height()});
            const std::size_t leaf = add(line, Level::Word, b);
            nodes[leaf].element = doc.elements.size() - 1;
          }
        }
      }
    }
    if (auto im = pages[p].find("images"); im != pages[p].end()) {
      if (!im->is_array()) throw ValidationError(pp + ".images: expected an array");
      for (std::size_t k = 0; k < im->size(); ++k) {
        const BBox b = detail::json_bbox((*im)[k], pp + ".images[" + std::to_string(k) + "]");
        doc.elements.push_back(
            ImageElement{doc.image_ref.value_or(""), page, b.x0, b.y0, b.width(), b.height()});
      }
    }
  }
  try {
    validate(doc);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("document \"") + doc.doc_id + "\": " + e.what());
  }
  return doc;
}

inline nlohmann::json doc_to_json(const Document& doc) {
  const auto& nodes = doc.layout.nodes;
  nlohmann::json pages = nlohmann::json::array();
  for (std::size_t p : doc.layout.pages) {
    nlohmann::json cols = nlohmann::json::array();
    for (std::size_t c : nodes[p].children) {
      nlohmann::json pars = nlohmann::json::array();
      for (std::size_t q : nodes[c].children) {
        nlohmann::json lines = nlohmann::json::array();
        for (std::size_t l : nodes[q].children) {
          nlohmann::json ws = nlohmann::json::array();
          for (std::size_t w : nodes[l].children) {
            const auto& t = std::get<TextElement>(doc.elements[*nodes[w].element]);
            ws.push_back({{"bbox", detail::bbox_json(nodes[w].bbox)}, {"text", t.text_data}});
          }
          lines.push_back({{"bbox", detail::bbox_json(nodes[l].bbox)}, {"words", ws}});
        }
        pars.push_back({{"bbox", detail::bbox_json(nodes[q].bbox)}, {"lines", lines}});
      }
      cols.push_back({{"bbox", detail::bbox_json(nodes[c].bbox)}, {"paragraphs", pars}});
    }
    nlohmann::json page = {{"bbox", detail::bbox_json(nodes[p].bbox)}, {"columns", cols}};
    nlohmann::json images = nlohmann::json::array();
    for (const auto& e : doc.elements) {
      if (const auto* img = std::get_if<ImageElement>(&e); img && img->page == p) {
        images.push_back({{"bbox", detail::bbox_json(img->bbox())}});
      }
    }
    if (!images.empty()) page["images"] = images;
    pages.push_back(std::move(page));
  }
  return {{"doc_id", doc.doc_id},
          {"image_ref", doc.image_ref ? nlohmann::json(*doc.image_ref) : nlohmann::json()},
          {"pages", pages}};
}

// Canonical serialization: compact JSON with lexicographically sorted keys.
inline std::string serialize_doc_json(const Document& doc) { return doc_to_json(doc).dump(); }

// ---------------------------------------------------------------------------
// Relational tables

struct Schema {
  std::vector<std::string> attributes;

  std::size_t arity() const { return attributes.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const {
    auto it = std::find(attributes.begin(), attributes.end(), name);
    if (it == attributes.end()) return std::nullopt;
    return static_cast<std::size_t>(it - attributes.begin());
  }
  bool operator==(const Schema&) const = default;
};

struct Missing {
  bool operator==(const Missing&) const = default;
};

using AttributeValue = std::variant<Missing, std::string, std::vector<std::string>>;

inline bool is_missing(const AttributeValue& v) { return std::holds_alternative<Missing>(v); }

struct Tuple {
  std::string tuple_id;
  std::vector<AttributeValue> values;
  bool operator==(const Tuple&) const = default;
};

struct Table {
  Schema schema;
  std::vector<Tuple> tuples;

  std::optional<std::size_t> find(std::string_view id) const {
    if (index_.size() != tuples.size()) reindex();
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  void reindex() const {
    index_.clear();
    for (std::size_t i = 0; i < tuples.size(); ++i) index_.emplace(tuples[i].tuple_id, i);
  }

 private:
  mutable std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::string scalar_string(const nlohmann::json& v, const std::string& path) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  throw ValidationError(path + ": unsupported value type " + std::string(v.type_name()));
}

}  // namespace detail

// Loads a table from a JSON array of flat objects. The schema is the
// lexicographically sorted union of keys; null or absent keys are missing
// values and arrays are multi-valued attributes. Tuple ids come from the "id"
// key when present, otherwise from the row index.
inline Table load_table(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("table JSON: ") + e.what());
  }
  if (!j.is_array()) throw ValidationError("table: root must be an array of objects");
  std::map<std::string, std::size_t> keys;
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_object()) {
      throw ValidationError("table[" + std::to_string(r) + "]: expected an object");
    }
    for (const auto& [k, v] : j[r].items()) keys.emplace(k, 0);
  }
  if (keys.empty()) throw ValidationError("table: schema has zero attributes");
  Table table;
  for (auto& [k, idx] : keys) {
    idx = table.schema.attributes.size();
    table.schema.attributes.push_back(k);
  }
  std::unordered_map<std::string, std::size_t> ids;
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string rp = "table[" + std::to_string(r) + "]";
    Tuple t;
    t.values.assign(table.schema.arity(), Missing{});
    for (const auto& [k, v] : j[r].items()) {
      const std::string path = rp + "." + k;
      auto& slot = t.values[keys.at(k)];
      if (v.is_null()) continue;
      if (v.is_array()) {
        std::vector<std::string> items;
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (v[i].is_null()) continue;
          items.push_back(detail::scalar_string(v[i], path + "[" + std::to_string(i) + "]"));
        }
        if (!items.empty()) slot = std::move(items);
      } else {
        slot = detail::scalar_string(v, path);
      }
    }
    auto id = j[r].find("id");
    t.tuple_id = (id != j[r].end() && !id->is_null()) ? detail::scalar_string(*id, rp + ".id")
                                                        : std::to_string(r);
    if (!ids.emplace(t.tuple_id, r).second) {
      throw ValidationError(rp + ".id: duplicate tuple id \"" + t.tuple_id + "\"");
    }
    table.tuples.push_back(std::move(t));
  }
  table.reindex();
  return table;
}

// Writes a table back as a JSON array with every schema key present.
inline std::string serialize_table(const Table& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : table.tuples) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t i = 0; i < table.schema.arity(); ++i) {
      const auto& v = t.values[i];
      if (const auto* s = std::get_if<std::string>(&v)) row[table.schema.attributes[i]] = *s;
      else if (const auto* m = std::get_if<std::vector<std::string>>(&v))
        row[table.schema.attributes[i]] = *m;
      else row[table.schema.attributes[i]] = nullptr;
    }
    rows.push_back(std::move(row));
  }
  return rows.dump();
}

}  // namespace juno
