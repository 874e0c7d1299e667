#include "spem/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spem/csv.hpp"
#include "spem/error.hpp"

namespace spem {

namespace {

class Parser {
 public:
  explicit Parser(std::string text) : s_(std::move(text)) {}

  Config run() {
    Config cfg;
    std::string section;
    while (true) {
      skip_blank(true);
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        skip_blank(false);
        section = read_key();
        skip_blank(false);
        expect(']');
        end_of_line();
        continue;
      }
      const std::string key = read_key();
      skip_blank(false);
      expect('=');
      skip_blank(false);
      read_value_into(cfg, section.empty() ? key : section + "." + key);
      end_of_line();
    }
    return cfg;
  }

  ConfigValue single_value() {
    skip_blank(false);
    ConfigValue v = read_value();
    skip_blank(false);
    if (!eof()) fail("trailing characters after value");
    return v;
  }

 private:
  std::string s_;
  std::size_t pos_ = 0;
  int line_ = 1;

  [[nodiscard]] bool eof() const { return pos_ >= s_.size(); }
  [[nodiscard]] char peek() const { return eof() ? '\0' : s_[pos_]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Config, "config line " + std::to_string(line_) + ": " + msg);
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  // Skips spaces and comments; newlines too when `newlines` is set.
  void skip_blank(bool newlines) {
    while (!eof()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == '#') {
        while (!eof() && peek() != '\n') ++pos_;
      } else if (c == '\n' && newlines) {
        ++line_;
        ++pos_;
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip_blank(false);
    if (eof()) return;
    if (peek() != '\n') fail("unexpected text after value");
  }

  std::string read_key() {
    if (peek() == '"') return read_string();
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-' ||
                      peek() == '.')) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a key");
    return s_.substr(start, pos_ - start);
  }

  std::string read_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[pos_++];
      if (c == '"') break;
      if (c == '\\') {
        if (eof()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unknown escape \\") + e);
        }
      }
      out.push_back(c);
    }
    return out;
  }

  void read_value_into(Config& cfg, const std::string& key) {
    if (peek() == '{') {
      ++pos_;
      skip_blank(false);
      if (peek() == '}') {
        ++pos_;
        return;
      }
      while (true) {
        skip_blank(false);
        const std::string sub = read_key();
        skip_blank(false);
        expect('=');
        skip_blank(false);
        read_value_into(cfg, key + "." + sub);
        skip_blank(false);
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect('}');
        return;
      }
    }
    cfg.set(key, read_value());
  }

  ConfigValue read_value() {
    ConfigValue v;
    const char c = peek();
    if (c == '"') {
      v.type = ConfigValue::Type::String;
      v.text = read_string();
      return v;
    }
    if (c == '[') {
      ++pos_;
      v.type = ConfigValue::Type::Array;
      while (true) {
        skip_blank(true);
        if (peek() == ']') {
          ++pos_;
          return v;
        }
        v.items.push_back(read_value());
        skip_blank(true);
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect(']');
        return v;
      }
    }
    const std::size_t start = pos_;
    while (!eof() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' && peek() != ']' &&
           peek() != '}' && peek() != '#') {
      ++pos_;
    }
    const std::string word = s_.substr(start, pos_ - start);
    if (word.empty()) fail("expected a value");
    if (word == "true" || word == "false") {
      v.type = ConfigValue::Type::Bool;
      v.boolean = word == "true";
      return v;
    }
    const char* first = word.data();
    if (*first == '+') ++first;
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(first, word.data() + word.size(), x);
    if (ec != std::errc() || ptr != word.data() + word.size()) fail("cannot parse value '" + word + "'");
    v.type = ConfigValue::Type::Number;
    v.number = x;
    return v;
  }
};

const char* type_name(ConfigValue::Type t) {
  switch (t) {
    case ConfigValue::Type::Number: return "number";
    case ConfigValue::Type::Bool: return "boolean";
    case ConfigValue::Type::String: return "string";
    case ConfigValue::Type::Array: return "array";
  }
  return "value";
}

[[noreturn]] void type_error(const std::string& key, ConfigValue::Type want, ConfigValue::Type got) {
  throw Error(ErrorKind::Config, "config key '" + key + "' should be a " + type_name(want) + ", found a " +
                                     type_name(got));
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

std::string ConfigValue::to_string() const {
  switch (type) {
    case Type::Number: return csv::format_double(number);
    case Type::Bool: return boolean ? "true" : "false";
    case Type::String: return quote(text);
    case Type::Array: {
      std::string out = "[";
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i].to_string();
      }
      return out + "]";
    }
  }
  return {};
}

void Config::set_literal(const std::string& key, const std::string& text) {
  try {
    set(key, Parser(text).single_value());
  } catch (const Error&) {
    ConfigValue v;
    v.type = ConfigValue::Type::String;
    v.text = text;
    set(key, v);
  }
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<double> Config::number(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.type != ConfigValue::Type::Number) type_error(key, ConfigValue::Type::Number, it->second.type);
  return it->second.number;
}

std::optional<long long> Config::integer(const std::string& key) const {
  const auto v = number(key);
  if (!v) return std::nullopt;
  if (std::floor(*v) != *v || std::abs(*v) > 9.0e15) {
    throw Error(ErrorKind::Config, "config key '" + key + "' should be an integer");
  }
  return static_cast<long long>(*v);
}

std::optional<bool> Config::boolean(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.type != ConfigValue::Type::Bool) type_error(key, ConfigValue::Type::Bool, it->second.type);
  return it->second.boolean;
}

std::optional<std::string> Config::string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.type != ConfigValue::Type::String) type_error(key, ConfigValue::Type::String, it->second.type);
  return it->second.text;
}

std::optional<std::vector<double>> Config::numbers(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  const ConfigValue& v = it->second;
  if (v.type == ConfigValue::Type::Number) return std::vector<double>{v.number};
  if (v.type != ConfigValue::Type::Array) type_error(key, ConfigValue::Type::Array, v.type);
  std::vector<double> out;
  for (const auto& item : v.items) {
    if (item.type != ConfigValue::Type::Number) type_error(key + "[]", ConfigValue::Type::Number, item.type);
    out.push_back(item.number);
  }
  return out;
}

double Config::number_or(const std::string& key, double fallback) const { return number(key).value_or(fallback); }
long long Config::integer_or(const std::string& key, long long fallback) const {
  return integer(key).value_or(fallback);
}
bool Config::boolean_or(const std::string& key, bool fallback) const { return boolean(key).value_or(fallback); }
std::string Config::string_or(const std::string& key, const std::string& fallback) const {
  return string(key).value_or(fallback);
}

void Config::write(std::ostream& out) const {
  std::map<std::string, std::vector<std::pair<std::string, const ConfigValue*>>> sections;
  for (const auto& [k, v] : values_) {
    const auto dot = k.rfind('.');
    if (dot == std::string::npos) {
      sections[""].emplace_back(k, &v);
    } else {
      sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), &v);
    }
  }
  bool first = true;
  for (const auto& [name, entries] : sections) {
    if (!name.empty()) {
      if (!first) out << '\n';
      out << '[' << name << "]\n";
    }
    for (const auto& [k, v] : entries) out << k << " = " << v->to_string() << '\n';
    first = false;
  }
}

Config parse_config(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return Parser(buf.str()).run();
}

Config parse_config_string(const std::string& text) { return Parser(text).run(); }

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config file '" + path.string() + "'");
  return parse_config(in);
}

void save_config(const std::filesystem::path& path, const Config& config) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Schema, "cannot write '" + path.string() + "'");
  config.write(out);
}

}  // namespace spem
