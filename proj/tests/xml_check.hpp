#pragma once
// Minimal well-formedness checker: balanced tags, quoted attributes,
// escaped text. Enough for the SVG subset the renderer emits.

#include <cctype>
#include <string>
#include <vector>

namespace oracle {

inline bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool root_seen = false;
  while (i < s.size()) {
    if (s[i] != '<') {
      if (s[i] == '&') {
        auto semi = s.find(';', i);
        if (semi == std::string::npos) return false;
        i = semi + 1;
        continue;
      }
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(s[i]))) return false;
      ++i;
      continue;
    }
    if (s.compare(i, 5, "<?xml") == 0) {
      auto end = s.find("?>", i);
      if (end == std::string::npos || i != 0) return false;
      i = end + 2;
      continue;
    }
    auto end = s.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = s.substr(i + 1, end - i - 1);
    i = end + 1;
    if (!tag.empty() && tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    bool self_closing = !tag.empty() && tag.back() == '/';
    if (self_closing) tag.pop_back();
    std::size_t n = 0;
    while (n < tag.size() && (std::isalnum(static_cast<unsigned char>(tag[n])) || tag[n] == ':' || tag[n] == '-')) ++n;
    if (n == 0) return false;
    std::string name = tag.substr(0, n);
    // attributes: name="value"
    std::size_t j = n;
    while (j < tag.size()) {
      while (j < tag.size() && std::isspace(static_cast<unsigned char>(tag[j]))) ++j;
      if (j >= tag.size()) break;
      auto eq = tag.find('=', j);
      if (eq == std::string::npos || eq + 1 >= tag.size() || tag[eq + 1] != '"') return false;
      auto close = tag.find('"', eq + 2);
      if (close == std::string::npos) return false;
      if (tag.substr(eq + 2, close - eq - 2).find('<') != std::string::npos) return false;
      j = close + 1;
    }
    if (stack.empty()) {
      if (root_seen) return false;
      root_seen = true;
    }
    if (!self_closing) stack.push_back(name);
  }
  return root_seen && stack.empty();
}

}  // namespace oracle
