#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fopsim::csv {

// Shortest round-trip decimal representation; locale independent.
std::string format_number(double value);

void write_row(std::ostream& out, const std::vector<std::string>& cells);
void write_header(std::ostream& out, std::initializer_list<std::string_view> names);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(std::string_view name) const;
};

// Numeric CSV with a single header row. Blank lines are skipped.
Table read_table(std::istream& in);

}  // namespace fopsim::csv
