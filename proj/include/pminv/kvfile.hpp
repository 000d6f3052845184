#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pminv {

/// Shortest decimal with 17 significant digits, round-trippable.
std::string format_double(double x);
double parse_double(const std::string& s);

/// Flat `key = value` text file.  Lines starting with '#' are comments.
/// Insertion order is kept for writing.
class KeyValues {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);

  bool has(const std::string& key) const { return index_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  /// Comma-separated list of doubles.
  std::vector<double> get_list(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(std::ostream& os) const;
  void write(const std::string& path) const;
  static KeyValues read(std::istream& is);
  static KeyValues read(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace pminv
