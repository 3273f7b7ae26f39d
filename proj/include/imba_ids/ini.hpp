#pragma once

// Thin helpers over Boost.PropertyTree's INI reader. Files are flat
// "key = value" pairs grouped under [section] headers.

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "imba_ids/errors.hpp"

namespace imba_ids::ini {

using Tree = boost::property_tree::ptree;

inline Tree parse(std::istream& in, const std::string& origin) {
  Tree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin, e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return tree;
}

inline Tree parse_string(const std::string& text, const std::string& origin = "<string>") {
  std::istringstream in(text);
  return parse(in, origin);
}

inline Tree load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  return parse(in, path);
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(std::string_view text, char sep = ',') {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    out.emplace_back(trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_u64(std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

inline std::optional<bool> parse_bool(std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "yes" || text == "1" || text == "on") return true;
  if (text == "false" || text == "no" || text == "0" || text == "off") return false;
  return std::nullopt;
}

inline std::vector<double> parse_double_list(std::string_view text, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    auto v = parse_double(item);
    if (!v) throw ConfigError(key, "'" + item + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

// Value of "section.key" if present. Keys are looked up literally so that
// dots inside key names are allowed.
inline std::optional<std::string> find(const Tree& tree, const std::string& section,
                                       const std::string& key) {
  auto sec = tree.find(section);
  if (sec == tree.not_found()) return std::nullopt;
  auto it = sec->second.find(key);
  if (it == sec->second.not_found()) return std::nullopt;
  return std::string(trim(it->second.data()));
}

}  // namespace imba_ids::ini
