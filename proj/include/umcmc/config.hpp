#pragma once

#include <map>
#include <string>
#include <vector>

#include "umcmc/errors.hpp"

namespace umcmc {

/// Sectioned key = value text config. '#' starts a comment; keys keep the
/// line number they were defined on for error messages. Unknown keys are
/// rejected by the schema-validating consumers (fail-fast).
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_int(const std::string& section, const std::string& key) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;

  /// Errors on any key outside the allowed set; `allowed` maps section name
  /// to its key list.
  void require_known_keys(
      const std::map<std::string, std::vector<std::string>>& allowed) const;

  std::string text() const { return text_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::string origin_;
  std::string text_;

  const Entry& entry(const std::string& section, const std::string& key) const;
};

}  // namespace umcmc
