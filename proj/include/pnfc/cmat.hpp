// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

// Plain-text matrix format "cmat v1":
//
//   rows cols
//   re im        (rows*cols lines, row-major, scientific notation)

#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "pnfc/numerics.hpp"

namespace pnfc::cmat {

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline double parse_double(const std::string& token, std::size_t line) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("numerics", "cmat line " + std::to_string(line) + ": bad number '" + token + "'");
  return v;
}

}  // namespace detail

inline void write(std::ostream& os, const ComplexMatrix& a) {
  os << a.rows() << ' ' << a.cols() << '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      os << detail::format_double(a(i, j).real()) << ' ' << detail::format_double(a(i, j).imag())
         << '\n';
}

inline std::string to_string(const ComplexMatrix& a) {
  std::ostringstream os;
  write(os, a);
  return os.str();
}

/// Reads one cmat block; the stream is left just past its last entry line.
inline ComplexMatrix read(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError("numerics", "cmat: missing header line");
  std::istringstream header(line);
  long rows = 0, cols = 0;
  std::string extra;
  if (!(header >> rows >> cols) || (header >> extra) || rows <= 0 || cols <= 0)
    throw ParseError("numerics", "cmat: header must be 'rows cols' with positive integers");
  ComplexMatrix a(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      if (!next_line()) throw ParseError("numerics", "cmat: truncated entry list");
      std::istringstream ls(line);
      std::string re, im;
      if (!(ls >> re >> im) || (ls >> extra))
        throw ParseError("numerics", "cmat line " + std::to_string(lineno) + ": expected 're im'");
      a(i, j) = Complex(detail::parse_double(re, lineno), detail::parse_double(im, lineno));
    }
  }
  if (!all_finite(a)) throw ParseError("numerics", "cmat: non-finite entry");
  return a;
}

inline ComplexMatrix from_string(const std::string& text) {
  std::istringstream is(text);
  return read(is);
}

inline ComplexMatrix read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("numerics", "cannot open matrix file '" + path + "'");
  return read(is);
}

}  // namespace pnfc::cmat
