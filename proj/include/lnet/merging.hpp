// Adaptive merging of equally spaced intervals.
//
// The estimated temporal factor is normalized to W~ = sqrt(L) W (W^T W)^{-1/2},
// its rows are split into contiguous segments minimizing the within-segment
// sum of squared deviations (segmented least squares, solved exactly by
// dynamic programming), and the number of segments is chosen by
//
//   K = argmin_S  loss_S / L + nu * S.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lnet/error.hpp"
#include "lnet/events.hpp"
#include "lnet/tensor.hpp"
#include "lnet/text.hpp"

namespace lnet {

struct MergeConfig {
  /// Penalty per segment; when unset the regime default is used.
  std::optional<double> nu;
  /// Largest candidate segment count; defaults to min(L, ceil(L/2), 25).
  std::optional<Index> k_max;
  double epsilon = 0.1;
  /// W^T W counts as singular when lambda_min <= condition_tol * lambda_max.
  double condition_tol = 1e-10;
};

/// Contiguous block of small-interval indices, 0-based and inclusive.
struct Segment {
  Index first = 0;
  Index last = 0;

  Index length() const { return last - first + 1; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct OrderedPartitionResult {
  std::vector<Segment> segments;
  /// Sum over segments of sum_l |w_l - mu_segment|^2 (not divided by L).
  double loss = 0.0;
  /// Per-segment contribution to `loss`.
  std::vector<double> segment_loss;
  /// Mapped breakpoints; filled by endpoints_from_segments.
  std::vector<double> endpoints;
};

/// W~ = sqrt(L) W (W^T W)^{-1/2}, so that W~^T W~ = L I.
inline Matrix normalize_w(const Matrix& w_hat, double condition_tol = 1e-10) {
  const Index rows = w_hat.rows();
  if (rows < w_hat.cols() || w_hat.cols() < 1) {
    throw ShapeError("normalize_w: need at least as many rows as columns");
  }
  const Matrix gram = w_hat.transpose() * w_hat;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success) throw NumericalError("normalize_w: eigendecomposition failed");
  const Vector& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(hi > 0.0) || !(lo > condition_tol * hi)) {
    throw NumericalError("normalize_w: W^T W is near-singular (eigenvalues " +
                         text::format_double(lo) + " .. " + text::format_double(hi) +
                         ", condition number " +
                         (lo > 0.0 ? text::format_double(hi / lo) : std::string("inf")) + ")");
  }
  const Matrix inv_sqrt =
      es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return std::sqrt(static_cast<double>(rows)) * w_hat * inv_sqrt;
}

/// Sum of squared deviations of rows[first..last] from their mean, two-pass.
inline double segment_sse(const Matrix& rows, Index first, Index last) {
  const Index len = last - first + 1;
  const Eigen::RowVectorXd mean = rows.middleRows(first, len).colwise().mean();
  double s = 0.0;
  for (Index l = first; l <= last; ++l) s += (rows.row(l) - mean).squaredNorm();
  return s;
}

/// Exact segmented least squares for every segment count up to k_max.
///
/// Segment costs come from prefix sums of rows and squared row norms, so the
/// table costs O(k_max L^2). Among equal-cost split points the earliest wins.
class SegmentationPath {
 public:
  SegmentationPath(const Matrix& rows, Index k_max) : rows_(rows), k_max_(k_max) {
    const Index n = rows.rows();
    if (n < 1) throw ValueError("segmentation: no rows");
    if (k_max < 1 || k_max > n) {
      throw ValueError("segmentation: k_max = " + std::to_string(k_max) + " outside [1, " +
                       std::to_string(n) + "]");
    }
    prefix_.setZero(n + 1, rows.cols());
    prefix_sq_.setZero(n + 1);
    for (Index l = 0; l < n; ++l) {
      prefix_.row(l + 1) = prefix_.row(l) + rows.row(l);
      prefix_sq_(l + 1) = prefix_sq_(l) + rows.row(l).squaredNorm();
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    // cost_[k][b]: best cost of rows[0..b) in k+1 segments; arg_[k][b]: start of the last one.
    cost_.assign(static_cast<std::size_t>(k_max), std::vector<double>(static_cast<std::size_t>(n + 1), inf));
    arg_.assign(static_cast<std::size_t>(k_max), std::vector<Index>(static_cast<std::size_t>(n + 1), 0));
    for (Index b = 1; b <= n; ++b) cost_[0][static_cast<std::size_t>(b)] = cost(0, b);
    for (Index k = 1; k < k_max; ++k) {
      auto& row = cost_[static_cast<std::size_t>(k)];
      const auto& prev = cost_[static_cast<std::size_t>(k - 1)];
      for (Index b = k + 1; b <= n; ++b) {
        double best = inf;
        Index best_a = k;
        for (Index a = k; a < b; ++a) {
          const double c = prev[static_cast<std::size_t>(a)] + cost(a, b);
          if (c < best) {
            best = c;
            best_a = a;
          }
        }
        row[static_cast<std::size_t>(b)] = best;
        arg_[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)] = best_a;
      }
    }
  }

  Index k_max() const { return k_max_; }

  /// Optimal segmentation into exactly k segments.
  OrderedPartitionResult best(Index k) const {
    if (k < 1 || k > k_max_) {
      throw ValueError("segment count " + std::to_string(k) + " outside [1, " +
                       std::to_string(k_max_) + "]");
    }
    OrderedPartitionResult res;
    Index b = rows_.rows();
    for (Index kk = k - 1; kk >= 0; --kk) {
      const Index a = kk == 0 ? 0 : arg_[static_cast<std::size_t>(kk)][static_cast<std::size_t>(b)];
      res.segments.push_back({a, b - 1});
      b = a;
    }
    std::reverse(res.segments.begin(), res.segments.end());
    for (const Segment& s : res.segments) {
      res.segment_loss.push_back(segment_sse(rows_, s.first, s.last));
      res.loss += res.segment_loss.back();
    }
    return res;
  }

 private:
  // Cost of rows [a, b), clamped at 0 against cancellation.
  double cost(Index a, Index b) const {
    const double len = static_cast<double>(b - a);
    const double sq = prefix_sq_(b) - prefix_sq_(a);
    const double lin = (prefix_.row(b) - prefix_.row(a)).squaredNorm() / len;
    return std::max(0.0, sq - lin);
  }

  Matrix rows_;
  Index k_max_;
  Matrix prefix_;
  Vector prefix_sq_;
  std::vector<std::vector<double>> cost_;
  std::vector<std::vector<Index>> arg_;
};

/// Exact minimizer over ordered partitions of the rows into k contiguous segments.
inline OrderedPartitionResult best_ordered_partition(const Matrix& rows, Index k) {
  if (k < 1 || k > rows.rows()) {
    throw ValueError("best_ordered_partition: k = " + std::to_string(k) + " outside [1, " +
                     std::to_string(rows.rows()) + "]");
  }
  return SegmentationPath(rows, k).best(k);
}

inline Index default_k_max(Index rows) {
  return std::min<Index>({rows, (rows + 1) / 2, 25});
}

/// Whether (n, T) is in the strong-intensity regime T >= n^2 / log(nT).
inline bool strong_intensity_regime(double n, double horizon) {
  return horizon * std::log(n * horizon) >= n * n;
}

/// Default segment penalty:
///   log^{1/4 + eps/2}(nT) / (n^{1/2} T^{1/4})   if T < n^2 / log(nT)
///   log^{3/4 + eps/2}(nT) / (n^{1/2} T^{1/4})   otherwise.
inline double default_nu(double n, double horizon, double epsilon = 0.1) {
  if (!(n >= 2.0) || !(horizon > 1.0)) throw ValueError("default_nu: need n >= 2 and T > 1");
  const double lg = std::log(n * horizon);
  const double power = (strong_intensity_regime(n, horizon) ? 0.75 : 0.25) + epsilon / 2.0;
  return std::pow(lg, power) / (std::sqrt(n) * std::pow(horizon, 0.25));
}

struct KSelection {
  Index k = 1;
  /// loss_S / L + nu * S for S = 1..k_max.
  std::vector<double> criterion;
};

/// argmin over S in [1, k_max] of loss_S / L + nu * S; ties go to the smaller S.
inline KSelection select_k_detail(const SegmentationPath& path, Index rows, double nu) {
  if (!(nu > 0.0)) throw ValueError("select_k: nu must be positive");
  KSelection out;
  double best = std::numeric_limits<double>::infinity();
  for (Index s = 1; s <= path.k_max(); ++s) {
    const double value = path.best(s).loss / static_cast<double>(rows) + nu * static_cast<double>(s);
    out.criterion.push_back(value);
    if (value < best) {
      best = value;
      out.k = s;
    }
  }
  return out;
}

inline Index select_k(const Matrix& rows, Index k_max, double nu) {
  const SegmentationPath path(rows, k_max);
  return select_k_detail(path, rows.rows(), nu).k;
}

/// eta_k = delta_width * (last index of segment k, 1-based); the final endpoint is T.
inline std::vector<double> endpoints_from_segments(const std::vector<Segment>& segments,
                                                   double delta_width, double horizon) {
  if (segments.empty()) throw ValueError("endpoints_from_segments: no segments");
  std::vector<double> out;
  Index expect = 0;
  for (const Segment& s : segments) {
    if (s.first != expect || s.last < s.first) {
      throw ValueError("endpoints_from_segments: segments must be contiguous from index 1");
    }
    out.push_back(delta_width * static_cast<double>(s.last + 1));
    expect = s.last + 1;
  }
  out.back() = horizon;
  return out;
}

/// Writes one row per segment: index, first and last small interval (1-based),
/// endpoint time, segment loss.
inline void write_segments_csv(const OrderedPartitionResult& r, std::ostream& out) {
  out << "segment,first,last,endpoint,loss\n";
  for (std::size_t s = 0; s < r.segments.size(); ++s) {
    out << (s + 1) << ',' << (r.segments[s].first + 1) << ',' << (r.segments[s].last + 1) << ','
        << (s < r.endpoints.size() ? text::format_double(r.endpoints[s]) : std::string())
        << ',' << text::format_double(s < r.segment_loss.size() ? r.segment_loss[s] : 0.0) << '\n';
  }
}

}  // namespace lnet
