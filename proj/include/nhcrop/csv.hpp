#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nhcrop::csv {

// Splits one line on commas. Fields never contain quotes or commas in the
// files this project reads and writes.
std::vector<std::string> split(std::string_view line);

double parse_real(std::string_view field);
long long parse_int(std::string_view field);
std::optional<double> parse_optional_real(std::string_view field);

// Incrementally builds a comma-separated row.
class Row {
 public:
  Row& add(std::string_view field);
  Row& add(double value, int digits);
  Row& add(long long value);
  Row& add(std::optional<double> value, int digits);
  const std::string& str() const { return text_; }

 private:
  std::string text_;
  bool first_ = true;
};

}  // namespace nhcrop::csv
