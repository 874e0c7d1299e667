#ifndef SPEM_CSV_HPP
#define SPEM_CSV_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace spem::csv {

/// Numeric table with a header row. Lines starting with '#' are comments.
struct Table {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;  // rows x columns
  std::vector<std::string> comments;

  [[nodiscard]] Eigen::Index column_index(const std::string& name) const;  // -1 if absent
};

/// Same layout with the fields kept as text, for tables with label columns.
struct TextTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;
  std::vector<std::size_t> line_numbers;  // source line of each row

  [[nodiscard]] Eigen::Index column_index(const std::string& name) const;  // -1 if absent
};

Table read(std::istream& in);
TextTable read_text(std::istream& in);
TextTable read_text_file(const std::filesystem::path& path);
/// Throws Error(Schema) unless the whole field is a number.
double parse_number(const std::string& text);
Table read_file(const std::filesystem::path& path);

void write(std::ostream& out, const Table& table);
void write_file(const std::filesystem::path& path, const Table& table);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

}  // namespace spem::csv

#endif  // SPEM_CSV_HPP
