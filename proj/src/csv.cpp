#include "spem/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "spem/error.hpp"

namespace spem::csv {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, std::size_t line_no) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::Schema, "line " + std::to_string(line_no) + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

}  // namespace

Eigen::Index Table::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] == name) return static_cast<Eigen::Index>(j);
  }
  return -1;
}

Eigen::Index TextTable::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] == name) return static_cast<Eigen::Index>(j);
  }
  return -1;
}

TextTable read_text(std::istream& in) {
  TextTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      table.comments.push_back(trim(t.substr(1)));
      continue;
    }
    auto fields = split(t);
    if (!have_header) {
      table.columns = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.columns.size()) {
      throw Error(ErrorKind::Schema, "line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(table.columns.size()) + " fields, found " +
                                         std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorKind::Schema, "missing header row");
  return table;
}

TextTable read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Schema, "cannot open '" + path.string() + "'");
  return read_text(in);
}

double parse_number(const std::string& text) { return parse_double(text, 0); }

Table read(std::istream& in) {
  TextTable text = read_text(in);
  Table table;
  table.columns = std::move(text.columns);
  table.comments = std::move(text.comments);
  table.values.resize(static_cast<Eigen::Index>(text.rows.size()), static_cast<Eigen::Index>(table.columns.size()));
  for (std::size_t i = 0; i < text.rows.size(); ++i) {
    for (std::size_t j = 0; j < text.rows[i].size(); ++j) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_double(text.rows[i][j], text.line_numbers[i]);
    }
  }
  return table;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Schema, "cannot open '" + path.string() + "'");
  return read(in);
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf, ptr);
}

void write(std::ostream& out, const Table& table) {
  for (const auto& c : table.comments) out << "# " << c << '\n';
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j) out << ',';
    out << table.columns[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(table.values(i, j));
    }
    out << '\n';
  }
}

void write_file(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Schema, "cannot write '" + path.string() + "'");
  write(out, table);
}

}  // namespace spem::csv
