#include "linf/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "linf/errors.hpp"

namespace linf {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value '" + text + "' for key '" + key + "'");
  return value;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, const std::string& source) {
  KeyValueConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source + ":" + std::to_string(line_no) + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    cfg.entries_[section.empty() ? key : section + "." + key] = std::string(trim(line.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::to_text() const {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [key, value] : entries_) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      sections[""].emplace_back(key, value);
    } else {
      sections[key.substr(0, dot)].emplace_back(key.substr(dot + 1), value);
    }
  }
  std::string out;
  for (const auto& [name, items] : sections) {
    if (!name.empty()) out += "[" + name + "]\n";
    for (const auto& [k, v] : items) out += k + " = " + v + "\n";
  }
  return out;
}

const std::string* ConfigReader::find(const std::string& key) {
  auto it = cfg_.entries().find(key);
  if (it == cfg_.entries().end()) return nullptr;
  used_[key] = true;
  return &it->second;
}

void ConfigReader::read(const std::string& key, std::size_t& out) {
  if (const auto* v = find(key)) out = parse_number<std::size_t>(key, *v);
}
void ConfigReader::read(const std::string& key, double& out) {
  if (const auto* v = find(key)) out = parse_number<double>(key, *v);
}
void ConfigReader::read(const std::string& key, int& out) {
  if (const auto* v = find(key)) out = parse_number<int>(key, *v);
}
void ConfigReader::read(const std::string& key, bool& out) {
  if (const auto* v = find(key)) {
    if (*v == "true" || *v == "1" || *v == "on") {
      out = true;
    } else if (*v == "false" || *v == "0" || *v == "off") {
      out = false;
    } else {
      throw ConfigError("invalid boolean '" + *v + "' for key '" + key + "'");
    }
  }
}
void ConfigReader::read(const std::string& key, std::string& out) {
  if (const auto* v = find(key)) out = *v;
}
void ConfigReader::read(const std::string& key, std::vector<std::size_t>& out) {
  if (const auto* v = find(key)) {
    out.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t(trim(item));
      if (!t.empty()) out.push_back(parse_number<std::size_t>(key, t));
    }
  }
}
void ConfigReader::read(const std::string& key, std::vector<double>& out) {
  if (const auto* v = find(key)) out = parse_double_list(*v, key);
}

void ConfigReader::reject_unknown(const std::vector<std::string>& prefixes) const {
  for (const auto& [key, value] : cfg_.entries()) {
    bool governed = false;
    for (const auto& p : prefixes) governed = governed || key.rfind(p, 0) == 0;
    if (governed && !used_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string format_double(double v) {
  // shortest text that parses back to the same bits
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t(trim(item));
    if (!t.empty()) out.push_back(parse_number<double>(what, t));
  }
  return out;
}

}  // namespace linf
