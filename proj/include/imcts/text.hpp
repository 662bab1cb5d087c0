#pragma once

#include <charconv>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

/** Small text helpers shared by prompt rendering and dump serialization. */

namespace imcts {

/**
 * Shortest round-trip decimal form of a double (`0.397` stays `0.397`,
 * integral values print without a trailing `.0`).  Used wherever a score is
 * embedded into text so goldens are stable across platforms.
 */
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: to_chars failed");
  return std::string(buf, res.ptr);
}

/**
 * Renders a python-format-style template: `{name}` is replaced by
 * `slots.at(name)`, `{{` / `}}` emit literal braces.  Throws
 * std::invalid_argument on an unknown slot or an unmatched brace, so a
 * template/slot mismatch fails loudly instead of producing a silently
 * mangled prompt.
 */
inline std::string render_template(std::string_view tmpl,
                                   const std::map<std::string, std::string, std::less<>>& slots) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    char c = tmpl[i];
    if (c == '{') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
        out.push_back('{');
        ++i;
        continue;
      }
      std::size_t end = tmpl.find('}', i + 1);
      if (end == std::string_view::npos)
        throw std::invalid_argument("render_template: unmatched '{'");
      std::string_view name = tmpl.substr(i + 1, end - i - 1);
      auto it = slots.find(name);
      if (it == slots.end())
        throw std::invalid_argument("render_template: unknown slot '" + std::string(name) + "'");
      out += it->second;
      i = end;
    } else if (c == '}') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
        out.push_back('}');
        ++i;
        continue;
      }
      throw std::invalid_argument("render_template: unmatched '}'");
    } else {
      out.push_back(c);
    }
  }
  return out;
}

/** Lowercases and collapses whitespace runs; the sibling-dedup key. */
inline std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    unsigned char uc = static_cast<unsigned char>(c);
    if (uc == ' ' || uc == '\t' || uc == '\n' || uc == '\r' || uc == '\f' || uc == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(uc >= 'A' && uc <= 'Z' ? uc - 'A' + 'a' : uc));
  }
  return out;
}

}  // namespace imcts
