#include "nhcrop/csv.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

#include "nhcrop/core_types.hpp"
#include "nhcrop/errors.hpp"

namespace nhcrop::csv {

std::vector<std::string> split(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_real(std::string_view field) {
  std::string text(field);
  if (text == "inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw DataError("malformed number '" + text + "'");
  }
  return value;
}

long long parse_int(std::string_view field) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError("malformed integer '" + std::string(field) + "'");
  }
  return value;
}

std::optional<double> parse_optional_real(std::string_view field) {
  if (field.empty()) return std::nullopt;
  return parse_real(field);
}

Row& Row::add(std::string_view field) {
  if (!first_) text_.push_back(',');
  first_ = false;
  text_.append(field);
  return *this;
}

Row& Row::add(double value, int digits) { return add(format_real(value, digits)); }

Row& Row::add(long long value) { return add(std::to_string(value)); }

Row& Row::add(std::optional<double> value, int digits) {
  return value ? add(*value, digits) : add(std::string_view{});
}

}  // namespace nhcrop::csv
