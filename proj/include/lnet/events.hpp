// Timestamped directed edges, partitions of [0, T) and binning into count
// tensors.
//
// Edge-list file (node indices 1-based):
//
//   # comment
//   n1=<int> n2=<int> T=<real>
//   i,j,t
//   ...
//
// Partition file:
//
//   T=<real>
//   tau_1
//   ...
//   tau_m        (must equal T)
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "lnet/error.hpp"
#include "lnet/tensor.hpp"
#include "lnet/text.hpp"

namespace lnet {

/// One directed interaction; indices are 0-based in memory.
struct Edge {
  Index out = 0;
  Index in = 0;
  double time = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

class EdgeSet {
 public:
  EdgeSet(Index n1, Index n2, double horizon) : n1_(n1), n2_(n2), horizon_(horizon) {
    if (n1 < 1 || n2 < 1) throw ValueError("EdgeSet: node counts must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw ValueError("EdgeSet: horizon must be positive and finite");
    }
  }

  Index n1() const noexcept { return n1_; }
  Index n2() const noexcept { return n2_; }
  double horizon() const noexcept { return horizon_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t size() const noexcept { return edges_.size(); }

  void reserve(std::size_t n) { edges_.reserve(n); }

  /// Adds an edge given 0-based indices. Multiple edges per pair and repeated
  /// timestamps are allowed.
  void add(Index out, Index in, double time) {
    if (out < 0 || out >= n1_) {
      throw ValueError("out-node index " + std::to_string(out + 1) + " outside [1, " +
                       std::to_string(n1_) + "]");
    }
    if (in < 0 || in >= n2_) {
      throw ValueError("in-node index " + std::to_string(in + 1) + " outside [1, " +
                       std::to_string(n2_) + "]");
    }
    if (!(time >= 0.0 && time < horizon_)) {
      throw ValueError("timestamp " + text::format_double(time) + " outside [0, " +
                       text::format_double(horizon_) + ")");
    }
    edges_.push_back({out, in, time});
  }

  friend bool operator==(const EdgeSet&, const EdgeSet&) = default;

 private:
  Index n1_;
  Index n2_;
  double horizon_;
  std::vector<Edge> edges_;
};

/// Ordered breakpoints 0 < tau_1 < ... < tau_m = T with implicit tau_0 = 0.
class Partition {
 public:
  Partition(double horizon, std::vector<double> breakpoints)
      : horizon_(horizon), breaks_(std::move(breakpoints)) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw ValueError("Partition: horizon must be positive and finite");
    }
    if (breaks_.empty()) throw ValueError("Partition: at least one interval required");
    double prev = 0.0;
    for (double b : breaks_) {
      if (!(b > prev)) throw ValueError("Partition: breakpoints must be strictly increasing from 0");
      prev = b;
    }
    if (breaks_.back() != horizon_) {
      throw ValueError("Partition: last breakpoint " + text::format_double(breaks_.back()) +
                       " must equal T = " + text::format_double(horizon_));
    }
  }

  double horizon() const noexcept { return horizon_; }
  Index count() const noexcept { return static_cast<Index>(breaks_.size()); }
  const std::vector<double>& breakpoints() const noexcept { return breaks_; }

  /// Left endpoint of interval l (0-based).
  double left(Index l) const { return l == 0 ? 0.0 : breaks_.at(static_cast<std::size_t>(l - 1)); }
  double right(Index l) const { return breaks_.at(static_cast<std::size_t>(l)); }
  double width(Index l) const { return right(l) - left(l); }
  double mean_width() const { return horizon_ / static_cast<double>(count()); }

  Vector widths() const {
    Vector w(count());
    for (Index l = 0; l < count(); ++l) w(l) = width(l);
    return w;
  }

  /// Interval containing t under the half-open convention [tau_{l-1}, tau_l).
  Index interval_of(double t) const {
    if (!(t >= 0.0 && t < horizon_)) {
      throw ValueError("time " + text::format_double(t) + " outside [0, T)");
    }
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    return static_cast<Index>(it - breaks_.begin());
  }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  double horizon_;
  std::vector<double> breaks_;
};

/// L equally spaced intervals: tau_l = l * T / L.
inline Partition equal_partition(double horizon, Index count) {
  if (count < 1) throw ValueError("equal_partition: interval count must be at least 1");
  std::vector<double> b(static_cast<std::size_t>(count));
  for (Index l = 1; l <= count; ++l) {
    b[static_cast<std::size_t>(l - 1)] =
        static_cast<double>(l) * horizon / static_cast<double>(count);
  }
  b.back() = horizon;
  return Partition(horizon, std::move(b));
}

/// Y_ijl = number of edges i -> j with tau_{l-1} <= t < tau_l.
inline Tensor3 bin_edges(const EdgeSet& edges, const Partition& p) {
  if (edges.horizon() != p.horizon()) {
    throw ValueError("bin_edges: edge horizon " + text::format_double(edges.horizon()) +
                     " differs from partition horizon " + text::format_double(p.horizon()));
  }
  Tensor3 y(edges.n1(), edges.n2(), p.count());
  for (const Edge& e : edges.edges()) y(e.out, e.in, p.interval_of(e.time)) += 1.0;
  return y;
}

// ---------------------------------------------------------------------------
// Text formats

inline EdgeSet load_edges(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  long long n1 = 0, n2 = 0;
  double horizon = 0.0;
  std::vector<Edge> pending;
  std::vector<std::size_t> pending_lines;

  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::strip_comment(raw);
    if (line.empty()) continue;
    if (!have_header) {
      bool got_n1 = false, got_n2 = false, got_t = false;
      for (auto tok : text::split_ws(line)) {
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "header token without '='");
        const auto key = tok.substr(0, eq);
        const auto val = tok.substr(eq + 1);
        if (key == "n1") {
          n1 = text::parse_int(val, line_no, "n1");
          got_n1 = true;
        } else if (key == "n2") {
          n2 = text::parse_int(val, line_no, "n2");
          got_n2 = true;
        } else if (key == "T") {
          horizon = text::parse_double(val, line_no, "T");
          got_t = true;
        } else {
          throw ParseError(line_no, "unknown header key '" + std::string(key) + "'");
        }
      }
      if (!got_n1 || !got_n2 || !got_t) {
        throw ParseError(line_no, "header must define n1, n2 and T");
      }
      if (n1 < 1 || n2 < 1 || !(horizon > 0.0)) {
        throw ParseError(line_no, "header values must be positive");
      }
      have_header = true;
      continue;
    }
    const auto fields = text::split(line, ',');
    if (fields.size() != 3) throw ParseError(line_no, "expected 'i,j,t'");
    const long long i = text::parse_int(fields[0], line_no, "i");
    const long long j = text::parse_int(fields[1], line_no, "j");
    const double t = text::parse_double(fields[2], line_no, "t");
    pending.push_back({static_cast<Index>(i - 1), static_cast<Index>(j - 1), t});
    pending_lines.push_back(line_no);
  }
  if (!have_header) throw ParseError(line_no, "missing header line 'n1=.. n2=.. T=..'");

  EdgeSet out(static_cast<Index>(n1), static_cast<Index>(n2), horizon);
  out.reserve(pending.size());
  for (std::size_t m = 0; m < pending.size(); ++m) {
    try {
      out.add(pending[m].out, pending[m].in, pending[m].time);
    } catch (const ValueError& e) {
      throw ParseError(pending_lines[m], e.what());
    }
  }
  return out;
}

inline void save_edges(const EdgeSet& edges, std::ostream& out) {
  out << "n1=" << edges.n1() << " n2=" << edges.n2()
      << " T=" << text::format_double(edges.horizon()) << '\n';
  for (const Edge& e : edges.edges()) {
    out << (e.out + 1) << ',' << (e.in + 1) << ',' << text::format_double(e.time) << '\n';
  }
}

inline Partition load_partition(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  double horizon = 0.0;
  std::vector<double> b;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::strip_comment(raw);
    if (line.empty()) continue;
    if (!have_header) {
      if (line.substr(0, 2) != "T=") throw ParseError(line_no, "expected 'T=<real>'");
      horizon = text::parse_double(line.substr(2), line_no, "T");
      have_header = true;
      continue;
    }
    b.push_back(text::parse_double(line, line_no, "breakpoint"));
  }
  if (!have_header) throw ParseError(line_no, "missing 'T=' header");
  try {
    return Partition(horizon, std::move(b));
  } catch (const ValueError& e) {
    throw ParseError(0, e.what());
  }
}

inline void save_partition(const Partition& p, std::ostream& out) {
  out << "T=" << text::format_double(p.horizon()) << '\n';
  for (double b : p.breakpoints()) out << text::format_double(b) << '\n';
}

}  // namespace lnet
