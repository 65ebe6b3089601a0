#include "umcmc/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace umcmc {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  cfg.text_ = text;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw FormatError(origin + ":" + std::to_string(line_no) + ": unterminated section");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw FormatError(origin + ":" + std::to_string(line_no) + ": empty section name");
      }
      cfg.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    if (section.empty()) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": key outside any section");
    }
    auto [it, inserted] = cfg.sections_[section].emplace(key, Entry{value, line_no});
    if (!inserted) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                        "' in [" + section + "]");
    }
  }
  return cfg;
}

const ConfigFile::Entry& ConfigFile::entry(const std::string& section,
                                           const std::string& key) const {
  auto sit = sections_.find(section);
  if (sit == sections_.end()) {
    throw FormatError(origin_ + ": missing section [" + section + "]");
  }
  auto kit = sit->second.find(key);
  if (kit == sit->second.end()) {
    throw FormatError(origin_ + ": missing key '" + key + "' in [" + section + "]");
  }
  return kit->second;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  auto sit = sections_.find(section);
  return sit != sections_.end() && sit->second.count(key) > 0;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key) const {
  return entry(section, key).value;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  return has(section, key) ? entry(section, key).value : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
  const Entry& e = entry(section, key);
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw FormatError(origin_ + ":" + std::to_string(e.line) + ": '" + key +
                      "' is not a number: " + e.value);
  }
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long ConfigFile::get_int(const std::string& section, const std::string& key) const {
  const Entry& e = entry(section, key);
  try {
    std::size_t pos = 0;
    const long v = std::stol(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw FormatError(origin_ + ":" + std::to_string(e.line) + ": '" + key +
                      "' is not an integer: " + e.value);
  }
}

long ConfigFile::get_int(const std::string& section, const std::string& key,
                         long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

void ConfigFile::require_known_keys(
    const std::map<std::string, std::vector<std::string>>& allowed) const {
  for (const auto& [section, keys] : sections_) {
    auto ait = allowed.find(section);
    if (ait == allowed.end()) {
      throw FormatError(origin_ + ": unknown section [" + section + "]");
    }
    for (const auto& [key, e] : keys) {
      if (std::find(ait->second.begin(), ait->second.end(), key) == ait->second.end()) {
        throw FormatError(origin_ + ":" + std::to_string(e.line) + ": unknown key '" + key +
                          "' in [" + section + "]");
      }
    }
  }
}

}  // namespace umcmc
