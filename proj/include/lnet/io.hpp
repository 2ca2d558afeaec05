// Text formats for fitted factors, objective traces and run manifests.
//
// Factor file:
//
//   format=lnet-tucker-1
//   dims=<n1> <n2> <n3>
//   ranks=<r1> <r2> <r3>
//   U            n1 lines of r1 values
//   V            n2 lines of r2 values
//   W            n3 lines of r3 values
//   S            r1 lines of r2*r3 values (the mode-1 unfolding of the core)
//
// Values are whitespace separated and written in shortest round-trip form.
#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lnet/error.hpp"
#include "lnet/tensor.hpp"
#include "lnet/text.hpp"

namespace lnet {

inline constexpr const char* kFactorFormat = "lnet-tucker-1";

namespace detail {

inline void write_rows(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << text::format_double(m(i, j));
    }
    out << '\n';
  }
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-empty line with comments removed.
  std::string_view next(const char* expecting) {
    while (std::getline(in_, buf_)) {
      ++line_;
      const auto s = text::strip_comment(buf_);
      if (!s.empty()) return s;
    }
    throw ParseError(line_, std::string("unexpected end of input, expected ") + expecting);
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::string buf_;
  std::size_t line_ = 0;
};

inline std::string_view expect_key(LineReader& r, std::string_view key) {
  const auto s = r.next(std::string(key).c_str());
  if (s.substr(0, key.size()) != key || s.size() <= key.size() || s[key.size()] != '=') {
    throw ParseError(r.line(), "expected '" + std::string(key) + "='");
  }
  return s.substr(key.size() + 1);
}

inline Dims3 parse_triple(LineReader& r, std::string_view key) {
  const auto fields = text::split_ws(expect_key(r, key));
  if (fields.size() != 3) throw ParseError(r.line(), std::string(key) + " needs three integers");
  Dims3 d{};
  for (std::size_t s = 0; s < 3; ++s) {
    const long long v = text::parse_int(fields[s], r.line(), key);
    if (v < 1) throw ParseError(r.line(), std::string(key) + " must be positive");
    d[s] = static_cast<Index>(v);
  }
  return d;
}

inline Matrix read_block(LineReader& r, const char* tag, Index rows, Index cols) {
  if (r.next(tag) != tag) throw ParseError(r.line(), std::string("expected block '") + tag + "'");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto fields = text::split_ws(r.next(tag));
    if (static_cast<Index>(fields.size()) != cols) {
      throw ParseError(r.line(), std::string(tag) + " row has " + std::to_string(fields.size()) +
                                     " values, expected " + std::to_string(cols));
    }
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = text::parse_double(fields[static_cast<std::size_t>(j)], r.line(), tag);
    }
  }
  return m;
}

}  // namespace detail

inline void save_factors(const TuckerFactors& f, std::ostream& out) {
  f.validate();
  const Dims3 d = f.dims();
  const Dims3 r = f.ranks();
  out << "format=" << kFactorFormat << '\n';
  out << "dims=" << d[0] << ' ' << d[1] << ' ' << d[2] << '\n';
  out << "ranks=" << r[0] << ' ' << r[1] << ' ' << r[2] << '\n';
  out << "U\n";
  detail::write_rows(out, f.u);
  out << "V\n";
  detail::write_rows(out, f.v);
  out << "W\n";
  detail::write_rows(out, f.w);
  out << "S\n";
  detail::write_rows(out, mode_unfold(f.core, 1));
}

inline TuckerFactors load_factors(std::istream& in) {
  detail::LineReader r(in);
  const auto format = detail::expect_key(r, "format");
  if (format != kFactorFormat) {
    throw ParseError(r.line(), "unsupported factor format '" + std::string(format) + "'");
  }
  const Dims3 d = detail::parse_triple(r, "dims");
  const Dims3 k = detail::parse_triple(r, "ranks");
  TuckerFactors f;
  f.u = detail::read_block(r, "U", d[0], k[0]);
  f.v = detail::read_block(r, "V", d[1], k[1]);
  f.w = detail::read_block(r, "W", d[2], k[2]);
  f.core = mode_refold(detail::read_block(r, "S", k[0], k[1] * k[2]), 1, k);
  try {
    f.validate();
  } catch (const ShapeError& e) {
    throw ParseError(r.line(), e.what());
  }
  return f;
}

/// iteration,objective with iteration 0 the starting point.
inline void write_trace_csv(const std::vector<double>& trace, std::ostream& out) {
  out << "iteration,objective\n";
  for (std::size_t r = 0; r < trace.size(); ++r) {
    out << r << ',' << text::format_double(trace[r]) << '\n';
  }
}

using Manifest = std::vector<std::pair<std::string, std::string>>;

inline void write_manifest(const Manifest& m, std::ostream& out) {
  for (const auto& [key, value] : m) out << key << '=' << value << '\n';
}

/// Opens `path` for writing or throws ValueError naming it.
inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValueError("cannot open '" + path + "' for writing");
  out.precision(17);
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValueError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace lnet
