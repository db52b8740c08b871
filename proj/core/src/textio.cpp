#include "morphrl/textio.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace morphrl {

namespace {

std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') {
      return false;
    }
  }
  return true;
}

double parse_one_number(std::string_view text, const TextLine& line) {
  std::string token(trim(text));
  if (token.empty()) throw ParseError(line.line_no, line.indent + 1, "expected a number");
  char* end = nullptr;
  double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size() || !std::isfinite(v)) {
    throw ParseError(line.line_no, line.indent + 1,
                     "invalid number '" + token + "' for key '" + line.head + "'");
  }
  return v;
}

std::vector<double> parse_tuple(const TextLine& line, size_t arity) {
  std::string_view v = trim(line.value);
  if (v.size() < 2 || v.front() != '(' || v.back() != ')') {
    throw ParseError(line.line_no, line.indent + 1,
                     "expected '(...)' tuple for key '" + line.head + "'");
  }
  v = v.substr(1, v.size() - 2);
  std::vector<double> out;
  size_t start = 0;
  while (true) {
    size_t comma = v.find(',', start);
    std::string_view part = comma == std::string_view::npos ? v.substr(start)
                                                            : v.substr(start, comma - start);
    out.push_back(parse_one_number(part, line));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() != arity) {
    throw ParseError(line.line_no, line.indent + 1,
                     "key '" + line.head + "' expects " + std::to_string(arity) +
                         " components, got " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace

std::vector<TextLine> tokenize_kv_text(std::string_view text) {
  std::vector<TextLine> lines;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view raw = text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                          : eol - pos);
    ++line_no;
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

    if (size_t hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);

    int indent = 0;
    while (indent < static_cast<int>(raw.size()) &&
           (raw[indent] == ' ' || raw[indent] == '\t')) {
      ++indent;
    }
    std::string_view body = trim(raw);
    if (body.empty()) continue;

    TextLine out;
    out.line_no = line_no;
    out.indent = indent;

    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 3) {
        throw ParseError(line_no, indent + 1, "malformed section header");
      }
      out.kind = TextLine::Kind::section;
      out.head = std::string(trim(body.substr(1, body.size() - 2)));
      if (!valid_identifier(out.head)) {
        throw ParseError(line_no, indent + 1, "invalid section name '" + out.head + "'");
      }
      lines.push_back(std::move(out));
      continue;
    }

    size_t colon = body.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError(line_no, indent + static_cast<int>(body.size()),
                       "expected ':' in line");
    }
    std::string_view key = trim(body.substr(0, colon));
    std::string_view value = trim(body.substr(colon + 1));

    if (size_t space = key.find(' '); space != std::string_view::npos) {
      // Block introducer: "<keyword> <name>:"
      if (!value.empty()) {
        throw ParseError(line_no, indent + static_cast<int>(colon) + 2,
                         "block introducer must end at ':'");
      }
      out.kind = TextLine::Kind::block;
      out.head = std::string(trim(key.substr(0, space)));
      out.name = std::string(trim(key.substr(space + 1)));
      if (!valid_identifier(out.head) || !valid_identifier(out.name)) {
        throw ParseError(line_no, indent + 1, "invalid block introducer");
      }
    } else {
      out.kind = TextLine::Kind::key_value;
      out.head = std::string(key);
      out.value = std::string(value);
      if (!valid_identifier(out.head)) {
        throw ParseError(line_no, indent + 1, "invalid key '" + out.head + "'");
      }
    }
    lines.push_back(std::move(out));
  }
  return lines;
}

double parse_number(const TextLine& line) { return parse_one_number(line.value, line); }

std::array<double, 3> parse_vec3(const TextLine& line) {
  auto v = parse_tuple(line, 3);
  return {v[0], v[1], v[2]};
}

std::pair<double, double> parse_pair(const TextLine& line) {
  auto v = parse_tuple(line, 2);
  return {v[0], v[1]};
}

bool parse_bool(const TextLine& line) {
  std::string_view v = trim(line.value);
  if (v == "0" || v == "false") return false;
  if (v == "1" || v == "true") return true;
  throw ParseError(line.line_no, line.indent + 1,
                   "key '" + line.head + "' expects 0/1 or true/false");
}

std::string format_double(double v) {
  if (v == 0.0) return "0";  // also canonicalizes -0
  char buf[40];
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  for (int prec = 1; prec <= 9; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_vec3(const std::array<double, 3>& v) {
  return "(" + format_double(v[0]) + ", " + format_double(v[1]) + ", " + format_double(v[2]) + ")";
}

std::string format_pair(double lo, double hi) {
  return "(" + format_double(lo) + ", " + format_double(hi) + ")";
}

}  // namespace morphrl
