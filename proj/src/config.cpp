#include "emm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "emm/error.hpp"

namespace emm {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(const std::string &line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"')
      quoted = !quoted;
    else if (line[i] == '#' && !quoted)
      return line.substr(0, i);
  }
  return line;
}

double to_double(const std::string &text, const std::string &where) {
  const std::string t = trim(text);
  double value = 0.0;
  const char *first = t.data();
  const char *last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (t.empty() || ec != std::errc() || ptr != last)
    throw ParseError(where + ": expected a number, got '" + t + "'");
  return value;
}

} // namespace

ConfigDoc ConfigDoc::parse(const std::string &text) {
  ConfigDoc doc;
  doc.order_.push_back("");
  doc.tables_[""];
  std::string section;
  std::istringstream in(text);
  std::string line;
  std::string pending;
  int lineno = 0;
  int pending_line = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = trim(strip_comment(line));
    if (!pending.empty()) {
      // continuation of a multi-line list
      pending += " " + body;
      if (body.find(']') == std::string::npos)
        continue;
      body = pending;
      pending.clear();
    } else {
      pending_line = lineno;
    }
    if (body.empty())
      continue;
    if (body.front() == '[' && body.find('=') == std::string::npos) {
      if (body.back() != ']')
        throw ParseError("line " + std::to_string(lineno) +
                         ": unterminated section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      if (section.empty())
        throw ParseError("line " + std::to_string(lineno) +
                         ": empty section name");
      if (!doc.tables_.count(section))
        doc.order_.push_back(section);
      doc.tables_[section];
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty())
      throw ParseError("line " + std::to_string(lineno) + ": empty key");
    if (!value.empty() && value.front() == '[' &&
        value.find(']') == std::string::npos) {
      pending = body;
      continue;
    }
    if (doc.tables_[section].count(key))
      throw ParseError("line " + std::to_string(pending_line) +
                       ": duplicate key '" + key + "'");
    doc.tables_[section][key] = value;
  }
  if (!pending.empty())
    throw ParseError("line " + std::to_string(pending_line) +
                     ": unterminated list");
  return doc;
}

ConfigDoc ConfigDoc::load(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::vector<std::string> ConfigDoc::sections() const { return order_; }

bool ConfigDoc::has(const std::string &section, const std::string &key) const {
  auto it = tables_.find(section);
  return it != tables_.end() && it->second.count(key) > 0;
}

const std::string &ConfigDoc::raw(const std::string &section,
                                  const std::string &key) const {
  auto it = tables_.find(section);
  if (it == tables_.end() || !it->second.count(key))
    throw ParseError("missing key '" + key + "'" +
                     (section.empty() ? "" : " in [" + section + "]"));
  return it->second.at(key);
}

std::string ConfigDoc::get_string(const std::string &section,
                                  const std::string &key) const {
  std::string v = raw(section, key);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
    return v.substr(1, v.size() - 2);
  return v;
}

double ConfigDoc::get_double(const std::string &section,
                             const std::string &key) const {
  return to_double(raw(section, key), "key '" + key + "'");
}

long ConfigDoc::get_int(const std::string &section,
                        const std::string &key) const {
  const double v = get_double(section, key);
  if (v != static_cast<double>(static_cast<long>(v)))
    throw ParseError("key '" + key + "': expected an integer");
  return static_cast<long>(v);
}

bool ConfigDoc::get_bool(const std::string &section,
                         const std::string &key) const {
  const std::string v = get_string(section, key);
  if (v == "true" || v == "1")
    return true;
  if (v == "false" || v == "0")
    return false;
  throw ParseError("key '" + key + "': expected true/false");
}

bool ConfigDoc::is_list(const std::string &section,
                        const std::string &key) const {
  const std::string &v = raw(section, key);
  return !v.empty() && v.front() == '[';
}

std::vector<double> ConfigDoc::get_list(const std::string &section,
                                        const std::string &key) const {
  const std::string v = raw(section, key);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    throw ParseError("key '" + key + "': expected a [list]");
  std::vector<double> out;
  std::string inner = v.substr(1, v.size() - 2);
  std::replace(inner.begin(), inner.end(), ',', ' ');
  std::istringstream items(inner);
  std::string item;
  while (items >> item)
    out.push_back(to_double(item, "key '" + key + "'"));
  return out;
}

std::string ConfigDoc::get_string_or(const std::string &section,
                                     const std::string &key,
                                     const std::string &fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

double ConfigDoc::get_double_or(const std::string &section,
                                const std::string &key,
                                double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long ConfigDoc::get_int_or(const std::string &section, const std::string &key,
                           long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

void ConfigDoc::set(const std::string &section, const std::string &key,
                    const std::string &raw_value) {
  if (!tables_.count(section))
    order_.push_back(section);
  tables_[section][key] = raw_value;
}

} // namespace emm
