#pragma once

#include <string>
#include <vector>

#include "elfor/elfor.hpp"

namespace testing_support {

inline elfor::StationRecord station(std::string province, std::string district, std::string village,
                                    std::string id, elfor::Count n, elfor::Count t, elfor::Count v) {
  return elfor::make_station({std::move(province), std::move(district), std::move(village), std::move(id)}, n, t, v);
}

// Minimal XML well-formedness check: balanced tags, quoted attributes,
// exactly one root element after the prolog.
inline bool well_formed_xml(const std::string& doc, std::string* why = nullptr) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  std::vector<std::string> stack;
  std::size_t i = 0, roots = 0;
  while (i < doc.size()) {
    if (doc[i] != '<') {
      if (doc[i] == '&') {
        const auto semi = doc.find(';', i);
        if (semi == std::string::npos) return fail("bare ampersand");
        const auto ent = doc.substr(i + 1, semi - i - 1);
        if (ent != "amp" && ent != "lt" && ent != "gt" && ent != "quot" && ent != "apos" && ent.rfind('#', 0) != 0)
          return fail("unknown entity " + ent);
      } else if (stack.empty() && !std::isspace(static_cast<unsigned char>(doc[i]))) {
        return fail("text outside the root element");
      }
      ++i;
      continue;
    }
    const auto close = doc.find('>', i);
    if (close == std::string::npos) return fail("unterminated tag");
    std::string tag = doc.substr(i + 1, close - i - 1);
    i = close + 1;
    if (tag.rfind("?", 0) == 0) {
      if (tag.back() != '?') return fail("bad processing instruction");
      continue;
    }
    if (tag.rfind("!--", 0) == 0) continue;
    if (tag.empty()) return fail("empty tag");
    if (tag[0] == '/') {
      const auto name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return fail("mismatched </" + name + ">");
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    if (self_closing) tag.pop_back();
    const auto name_end = tag.find_first_of(" \t\n");
    const auto name = tag.substr(0, name_end);
    // attributes: name="value" pairs
    std::size_t k = name_end == std::string::npos ? tag.size() : name_end;
    while (k < tag.size()) {
      while (k < tag.size() && std::isspace(static_cast<unsigned char>(tag[k]))) ++k;
      if (k >= tag.size()) break;
      const auto eq = tag.find('=', k);
      if (eq == std::string::npos || eq + 1 >= tag.size()) return fail("attribute without value in <" + name + ">");
      const char q = tag[eq + 1];
      if (q != '"' && q != '\'') return fail("unquoted attribute in <" + name + ">");
      const auto end = tag.find(q, eq + 2);
      if (end == std::string::npos) return fail("unterminated attribute in <" + name + ">");
      if (tag.substr(eq + 2, end - eq - 2).find('<') != std::string::npos) return fail("'<' in attribute");
      k = end + 1;
    }
    if (stack.empty()) ++roots;
    if (!self_closing) stack.push_back(name);
  }
  if (!stack.empty()) return fail("unclosed <" + stack.back() + ">");
  if (roots != 1) return fail("expected one root element");
  return true;
}

inline std::size_t count_substr(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + needle.size())) ++n;
  return n;
}

}  // namespace testing_support
