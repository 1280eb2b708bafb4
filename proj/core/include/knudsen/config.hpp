#pragma once

#include <map>
#include <string>
#include <vector>

namespace kn {

// Flat key=value text. Blank lines and lines starting with '#' are skipped;
// whitespace around keys and values is trimmed. Later keys override earlier.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  // Keys of other overwrite ours.
  void merge(const Config& other);

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  // Throws std::invalid_argument naming the first key not in allowed.
  void require_known(const std::vector<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  std::string dump() const;  // sorted key=value lines

 private:
  std::map<std::string, std::string> values_;
};

// Comma-separated numbers, e.g. "0.2,0.1,0.05".
std::vector<double> parse_number_list(const std::string& text);
std::string format_number(double v);  // shortest text that reads back exactly

}  // namespace kn
