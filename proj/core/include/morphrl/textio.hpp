#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace morphrl {

/// Error with a source location, thrown by the text-format parsers.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// One meaningful line of the key-value text format shared by .morph files
/// and run configs. Comments (#) and blank lines are already stripped.
struct TextLine {
  enum class Kind {
    section,    // [name]
    block,      // introducer like "joint hip_fl:"
    key_value,  // "key: value"
  };

  Kind kind = Kind::key_value;
  int line_no = 0;
  int indent = 0;     // leading spaces (tabs count as one)
  std::string head;   // section name, block keyword, or key
  std::string name;   // block name for Kind::block
  std::string value;  // raw value text for Kind::key_value
};

std::vector<TextLine> tokenize_kv_text(std::string_view text);

double parse_number(const TextLine& line);
std::array<double, 3> parse_vec3(const TextLine& line);
std::pair<double, double> parse_pair(const TextLine& line);
bool parse_bool(const TextLine& line);

/// Canonical float formatting: the shortest representation up to 9
/// significant digits that parses back to the same double, falling back to
/// full precision when 9 digits cannot represent the value exactly.
std::string format_double(double v);
std::string format_vec3(const std::array<double, 3>& v);
std::string format_pair(double lo, double hi);

}  // namespace morphrl
