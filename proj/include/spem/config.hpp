#ifndef SPEM_CONFIG_HPP
#define SPEM_CONFIG_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spem {

/// Scalar or array value from a config file.
struct ConfigValue {
  enum class Type { Number, Bool, String, Array };
  Type type = Type::Number;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<ConfigValue> items;

  [[nodiscard]] std::string to_string() const;
};

/// Flat key/value store parsed from a small TOML subset: `[section]` headers,
/// `key = value` lines, numbers, booleans, double-quoted strings, arrays and
/// inline tables. Nested names are flattened with dots, so
/// `basis = { p = 4, m = 2 }` under no section yields `basis.p` and `basis.m`.
class Config {
 public:
  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }
  [[nodiscard]] const std::map<std::string, ConfigValue>& values() const noexcept { return values_; }

  void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }
  /// Parses `text` as a value literal; bare words become strings.
  void set_literal(const std::string& key, const std::string& text);
  void merge(const Config& other);

  /// Typed lookups. Throw Error(Config) on a type mismatch.
  [[nodiscard]] std::optional<double> number(const std::string& key) const;
  [[nodiscard]] std::optional<long long> integer(const std::string& key) const;
  [[nodiscard]] std::optional<bool> boolean(const std::string& key) const;
  [[nodiscard]] std::optional<std::string> string(const std::string& key) const;
  [[nodiscard]] std::optional<std::vector<double>> numbers(const std::string& key) const;

  [[nodiscard]] double number_or(const std::string& key, double fallback) const;
  [[nodiscard]] long long integer_or(const std::string& key, long long fallback) const;
  [[nodiscard]] bool boolean_or(const std::string& key, bool fallback) const;
  [[nodiscard]] std::string string_or(const std::string& key, const std::string& fallback) const;

  /// Writes the store back as `[section]` blocks.
  void write(std::ostream& out) const;

 private:
  std::map<std::string, ConfigValue> values_;
};

Config parse_config(std::istream& in);
Config parse_config_string(const std::string& text);
Config load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const Config& config);

}  // namespace spem

#endif  // SPEM_CONFIG_HPP
