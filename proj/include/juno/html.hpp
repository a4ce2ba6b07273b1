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

// Minimal streaming tokenizer for the XHTML subset emitted by OCR engines.
// Element nesting must balance (HTML void elements excepted); anything else
// is reported as a ParseError.

#pragma once

#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "juno/common.hpp"

namespace juno::html {

struct Tag {
  std::string name;  // lowercased
  std::map<std::string, std::string> attributes;
  bool self_closing = false;
};

inline bool is_void_element(std::string_view name) {
  static constexpr std::string_view kVoid[] = {"area", "base", "br",   "col",   "embed",
                                               "hr",   "img",  "input", "link", "meta",
                                               "param", "source", "track", "wbr"};
  for (auto v : kVoid)
    if (v == name) return true;
  return false;
}

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes character references. Unknown named references are kept verbatim.
inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back('&');
      continue;
    }
    const auto name = s.substr(i + 1, semi - i - 1);
    std::string rep;
    if (name == "amp") rep = "&";
    else if (name == "lt") rep = "<";
    else if (name == "gt") rep = ">";
    else if (name == "quot") rep = "\"";
    else if (name == "apos") rep = "'";
    else if (name == "nbsp") rep = " ";
    else if (name.size() > 1 && name[0] == '#') {
      std::uint32_t cp = 0;
      bool ok = true;
      const bool hex = name[1] == 'x' || name[1] == 'X';
      const auto digits = name.substr(hex ? 2 : 1);
      if (digits.empty()) ok = false;
      for (char c : digits) {
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else { ok = false; break; }
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
        if (cp > 0x10FFFF) { ok = false; break; }
      }
      if (ok) append_utf8(rep, cp);
    }
    if (rep.empty()) {
      out.push_back('&');
      continue;
    }
    out += rep;
    i = semi;
  }
  return out;
}

namespace detail {

inline bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' ||
         c == '.';
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string where(std::string_view doc, std::size_t pos) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < pos && i < doc.size(); ++i) line += doc[i] == '\n';
  return "line " + std::to_string(line);
}

}  // namespace detail

// Streams `input`, calling on_open(Tag), on_close(name) and on_text(decoded)
// in document order. Self-closing and void elements produce only on_open.
template <typename OnOpen, typename OnClose, typename OnText>
void tokenize(std::string_view in, OnOpen&& on_open, OnClose&& on_close, OnText&& on_text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg, std::size_t at) {
    throw ParseError("HTML " + detail::where(in, at) + ": " + msg);
  };
  while (i < in.size()) {
    if (in[i] != '<') {
      const auto next = in.find('<', i);
      const auto end = next == std::string_view::npos ? in.size() : next;
      on_text(decode_entities(in.substr(i, end - i)));
      i = end;
      continue;
    }
    if (in.substr(i, 4) == "<!--") {
      const auto end = in.find("-->", i + 4);
      if (end == std::string_view::npos) fail("unterminated comment", i);
      i = end + 3;
      continue;
    }
    if (in.substr(i, 2) == "<!" || in.substr(i, 2) == "<?") {
      const auto end = in.find('>', i);
      if (end == std::string_view::npos) fail("unterminated declaration", i);
      i = end + 1;
      continue;
    }
    if (in.substr(i, 2) == "</") {
      const auto end = in.find('>', i);
      if (end == std::string_view::npos) fail("unterminated closing tag", i);
      auto name = detail::lower(in.substr(i + 2, end - i - 2));
      while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
      if (is_void_element(name)) {
        i = end + 1;
        continue;
      }
      if (stack.empty()) fail("closing tag </" + name + "> without an open element", i);
      if (stack.back() != name) {
        fail("closing tag </" + name + "> does not match <" + stack.back() + ">", i);
      }
      stack.pop_back();
      on_close(name);
      i = end + 1;
      continue;
    }
    // Start tag. A '<' not followed by a name is literal text.
    std::size_t p = i + 1;
    if (p >= in.size() || !std::isalpha(static_cast<unsigned char>(in[p]))) {
      on_text("<");
      ++i;
      continue;
    }
    while (p < in.size() && detail::name_char(in[p])) ++p;
    Tag tag;
    tag.name = detail::lower(in.substr(i + 1, p - i - 1));
    bool closed = false;
    while (p < in.size()) {
      while (p < in.size() && std::isspace(static_cast<unsigned char>(in[p]))) ++p;
      if (p >= in.size()) break;
      if (in[p] == '>') {
        ++p;
        closed = true;
        break;
      }
      if (in[p] == '/' && p + 1 < in.size() && in[p + 1] == '>') {
        tag.self_closing = true;
        p += 2;
        closed = true;
        break;
      }
      const std::size_t ns = p;
      while (p < in.size() && !std::isspace(static_cast<unsigned char>(in[p])) && in[p] != '=' &&
             in[p] != '>' && in[p] != '/')
        ++p;
      if (p == ns) fail("malformed attribute in <" + tag.name + ">", p);
      auto attr = detail::lower(in.substr(ns, p - ns));
      while (p < in.size() && std::isspace(static_cast<unsigned char>(in[p]))) ++p;
      std::string value;
      if (p < in.size() && in[p] == '=') {
        ++p;
        while (p < in.size() && std::isspace(static_cast<unsigned char>(in[p]))) ++p;
        if (p < in.size() && (in[p] == '"' || in[p] == '\'')) {
          const char q = in[p];
          const auto end = in.find(q, p + 1);
          if (end == std::string_view::npos) fail("unterminated attribute value", p);
          value = decode_entities(in.substr(p + 1, end - p - 1));
          p = end + 1;
        } else {
          const std::size_t vs = p;
          while (p < in.size() && !std::isspace(static_cast<unsigned char>(in[p])) && in[p] != '>')
            ++p;
          value = decode_entities(in.substr(vs, p - vs));
        }
      }
      tag.attributes.emplace(std::move(attr), std::move(value));
    }
    if (!closed) fail("unterminated tag <" + tag.name + ">", i);
    if (is_void_element(tag.name)) tag.self_closing = true;
    const std::string name = tag.name;
    const bool self_closing = tag.self_closing;
    on_open(tag);
    i = p;
    if (self_closing) continue;
    if (name == "script" || name == "style") {
      const auto end = detail::lower(in.substr(i)).find("</" + name);
      if (end == std::string::npos) fail("unterminated <" + name + ">", i);
      i += end;
    }
    stack.push_back(name);
  }
  if (!stack.empty()) {
    throw ParseError("HTML: unclosed element <" + stack.back() + "> at end of input");
  }
}

}  // namespace juno::html
