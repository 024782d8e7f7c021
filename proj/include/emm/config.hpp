#ifndef EMM_CONFIG_HPP
#define EMM_CONFIG_HPP

// Minimal "key = value" document with [section] / [section.sub] tables.
// Values are numbers, bare or quoted strings, booleans, or [a, b, ...] lists.
// '#' starts a comment outside quotes.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emm {

class ConfigDoc {
public:
  static ConfigDoc parse(const std::string &text);
  static ConfigDoc load(const std::string &path);

  /// Section names in file order; the root section is "".
  std::vector<std::string> sections() const;
  bool has(const std::string &section, const std::string &key) const;

  std::string get_string(const std::string &section,
                         const std::string &key) const;
  double get_double(const std::string &section, const std::string &key) const;
  long get_int(const std::string &section, const std::string &key) const;
  bool get_bool(const std::string &section, const std::string &key) const;
  std::vector<double> get_list(const std::string &section,
                               const std::string &key) const;
  bool is_list(const std::string &section, const std::string &key) const;

  std::string get_string_or(const std::string &section, const std::string &key,
                            const std::string &fallback) const;
  double get_double_or(const std::string &section, const std::string &key,
                       double fallback) const;
  long get_int_or(const std::string &section, const std::string &key,
                  long fallback) const;

  void set(const std::string &section, const std::string &key,
           const std::string &raw);

private:
  const std::string &raw(const std::string &section,
                         const std::string &key) const;

  std::vector<std::string> order_;
  std::map<std::string, std::map<std::string, std::string>> tables_;
};

} // namespace emm

#endif // EMM_CONFIG_HPP
