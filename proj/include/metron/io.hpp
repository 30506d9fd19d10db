#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace metron::io {

using json = nlohmann::ordered_json;

// Shortest text that reads back with 17 significant digits.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) x = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number()) return format_number(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_string()) return csv_escape(v.get<std::string>());
  return csv_escape(v.dump());
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;

  void add(std::vector<json> row) {
    if (row.size() != columns.size()) throw Error(Errc::PreconditionViolated, "row width differs from header");
    rows.push_back(std::move(row));
  }
};

inline void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << csv_escape(t.columns[c]);
  os << "\r\n";
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_cell(row[c]);
    os << "\r\n";
  }
}

// Whitespace-separated copy for gnuplot; strings become one token, header is a comment.
inline void write_dat(std::ostream& os, const Table& t) {
  os << "#";
  for (const auto& c : t.columns) os << ' ' << c;
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::string cell = row[c].is_string() ? row[c].get<std::string>() : csv_cell(row[c]);
      if (cell.empty()) cell = "?";
      for (char& ch : cell)
        if (ch == ' ' || ch == '\t') ch = '_';
      os << (c ? " " : "") << cell;
    }
    os << '\n';
  }
}

inline std::string gnuplot_stub(const std::string& dat_file, const Table& t, std::size_t x_col = 0) {
  std::ostringstream gp;
  gp << "# gnuplot -p " << dat_file.substr(0, dat_file.find_last_of('.')) << ".gp\n";
  gp << "set key autotitle columnhead\nset grid\n";
  gp << "set xlabel '" << (t.columns.empty() ? "" : t.columns[x_col]) << "'\n";
  gp << "plot ";
  bool first = true;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c == x_col) continue;
    bool numeric = !t.rows.empty() && t.rows.front()[c].is_number();
    if (!numeric) continue;
    gp << (first ? "" : ", \\\n     ") << "'" << dat_file << "' using " << x_col + 1 << ":" << c + 1 << " with lines title '"
       << t.columns[c] << "'";
    first = false;
  }
  if (first) gp << "'" << dat_file << "' using 0:1";
  gp << '\n';
  return gp.str();
}

// ---------------------------------------------------------------- parameters

inline bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
  if (b == e) return false;
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

// A value is a scalar, a comma list "a,b,c" or a range "lo:hi:n" (n points, endpoints included;
// "lo:hi:n:open" leaves out hi). Strings are kept verbatim.
inline std::vector<json> expand_values(const std::string& text, bool numeric) {
  const std::string t = trim(text);
  if (!numeric) {
    if (t.empty()) return {};
    std::vector<json> out;
    for (const auto& p : split(t, ',')) out.emplace_back(p);
    return out;
  }
  if (t.empty()) return {};
  if (t.find(':') != std::string::npos) {
    const auto parts = split(t, ':');
    double lo, hi, n;
    if ((parts.size() != 3 && parts.size() != 4) || !parse_double(parts[0], lo) || !parse_double(parts[1], hi) ||
        !parse_double(parts[2], n) || n < 0 || n != std::floor(n))
      throw Error(Errc::PreconditionViolated, "bad range '" + t + "' (expected lo:hi:n)");
    const bool open = parts.size() == 4;
    if (open && parts[3] != "open") throw Error(Errc::PreconditionViolated, "bad range flag '" + parts[3] + "'");
    const auto count = static_cast<std::size_t>(n);
    std::vector<json> out;
    for (std::size_t i = 0; i < count; ++i) {
      const double den = open ? static_cast<double>(count) : static_cast<double>(count > 1 ? count - 1 : 1);
      out.emplace_back(lo + (hi - lo) * static_cast<double>(i) / den);
    }
    return out;
  }
  std::vector<json> out;
  for (const auto& p : split(t, ',')) {
    double x;
    if (!parse_double(p, x)) throw Error(Errc::PreconditionViolated, "'" + p + "' is not a number");
    out.emplace_back(x);
  }
  return out;
}

// Flat "key = value" text with '#' comments.
inline std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::PreconditionViolated, "config line " + std::to_string(lineno) + " lacks '='");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(Errc::PreconditionViolated, "config line " + std::to_string(lineno) + " has an empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::PreconditionViolated, "cannot open config file '" + path + "'");
  return parse_config(in);
}

}  // namespace metron::io
