#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace trafficnmf::table {

// Shortest decimal text that parses back to the same double. Locale-free, so
// outputs are byte-stable across runs and machines.
std::string format_number(double value);

// Splits one delimited line. Double-quoted fields may contain the delimiter
// and escaped quotes (""). A trailing '\r' is dropped.
std::vector<std::string> split_line(std::string_view line, char delimiter = ',');

std::string quote_if_needed(std::string_view field, char delimiter = ',');

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter = ',');

// Strict numeric parses: the whole field (minus surrounding blanks) must be consumed.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

}  // namespace trafficnmf::table
