// Synthetic longitudinal networks with a piecewise-constant temporal
// embedding, and the error metrics used to score estimates against them.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "lnet/error.hpp"
#include "lnet/estimator.hpp"
#include "lnet/events.hpp"
#include "lnet/tensor.hpp"

namespace lnet {

struct SyntheticConfig {
  Index n = 50;
  double horizon = 50.0;
  Dims3 ranks{3, 3, 3};
  Index k0 = 3;
  double diag_s = 0.5;
  double lambda0 = 1.0;
  std::uint64_t seed = 1;
  /// Upper bound on (longest true interval) / (shortest true interval).
  double max_length_ratio = 3.0;

  void validate() const {
    if (n < 1) throw ValueError("SyntheticConfig: n must be positive");
    if (!(horizon > 0.0)) throw ValueError("SyntheticConfig: horizon must be positive");
    if (k0 < 1) throw ValueError("SyntheticConfig: K0 must be at least 1");
    if (!(max_length_ratio >= 1.0)) throw ValueError("SyntheticConfig: max_length_ratio must be >= 1");
    if (!(lambda0 > 0.0)) throw ValueError("SyntheticConfig: lambda0 must be positive");
    if (ranks[0] < 1 || ranks[1] < 1 || ranks[2] < 1 || ranks[0] > n || ranks[1] > n) {
      throw ValueError("SyntheticConfig: ranks must lie in [1, n]");
    }
    if (k0 < ranks[2]) {
      throw ValueError("SyntheticConfig: K0 = " + std::to_string(k0) + " < r3 = " +
                       std::to_string(ranks[2]) +
                       " makes the weighted Gram condition on W unsatisfiable");
    }
  }
};

/// True model: theta_ij(t) = S x1 u_i x2 v_j x3 w(t) with w(t) constant on
/// each interval of `eta`.
struct GroundTruth {
  /// factors.w is K0 x r3: one temporal embedding row per true interval.
  TuckerFactors factors;
  Partition eta;
  /// n x n x K0 log-intensity on the true partition.
  Tensor3 theta;
};

/// Norm quantities of a ground truth that the theory bounds; reported, not enforced.
struct TruthDiagnostics {
  double core_frobenius = 0.0;
  double u_two_to_inf = 0.0;
  double v_two_to_inf = 0.0;
  double w_sup_norm = 0.0;
  /// Smallest jump |w_k - w_{k-1}| between adjacent true intervals (0 if K0 = 1).
  double min_jump = 0.0;
  double max_theta = 0.0;
};

namespace detail {

// Haar-distributed n x r matrix with orthonormal columns.
inline Matrix random_orthonormal(Index n, Index r, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix g(n, r);
  for (Index c = 0; c < r; ++c)
    for (Index i = 0; i < n; ++i) g(i, c) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, r);
  const Matrix rmat = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Index c = 0; c < r; ++c)
    if (rmat(c, c) < 0) q.col(c) *= -1.0;
  return q;
}

inline Matrix inverse_sqrt_spd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace detail

/// Random change points with the length-ratio bound enforced by rejection.
inline Partition random_change_points(double horizon, Index k0, double max_ratio,
                                      std::mt19937_64& rng) {
  if (k0 == 1) return Partition(horizon, {horizon});
  std::uniform_real_distribution<double> unif(0.0, horizon);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<double> b(static_cast<std::size_t>(k0 - 1));
    for (double& x : b) x = unif(rng);
    std::sort(b.begin(), b.end());
    b.push_back(horizon);
    double prev = 0.0, lo = horizon, hi = 0.0;
    for (double x : b) {
      lo = std::min(lo, x - prev);
      hi = std::max(hi, x - prev);
      prev = x;
    }
    if (lo > 0.0 && hi <= max_ratio * lo) return Partition(horizon, std::move(b));
  }
  throw ValueError("could not draw change points within the length-ratio bound after 10000 tries");
}

inline GroundTruth generate_truth(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const auto [r1, r2, r3] = cfg.ranks;

  Partition eta = random_change_points(cfg.horizon, cfg.k0, cfg.max_length_ratio, rng);

  TuckerFactors f;
  const double root_n = std::sqrt(static_cast<double>(cfg.n));
  f.u = detail::random_orthonormal(cfg.n, r1, rng) * root_n;
  f.v = detail::random_orthonormal(cfg.n, r2, rng) * root_n;

  // Whiten a Gaussian K0 x r3 draw under the width-weighted inner product so
  // that sum_k width_k w_k w_k^T = T I.
  std::normal_distribution<double> normal;
  Matrix a(cfg.k0, r3);
  for (Index c = 0; c < r3; ++c)
    for (Index k = 0; k < cfg.k0; ++k) a(k, c) = normal(rng);
  const Vector widths = eta.widths();
  const Matrix gram = a.transpose() * widths.asDiagonal() * a;
  f.w = std::sqrt(cfg.horizon) * a * detail::inverse_sqrt_spd(gram);

  f.core = Tensor3(r1, r2, r3);
  for (Index d = 0; d < std::min({r1, r2, r3}); ++d) f.core(d, d, d) = cfg.diag_s;

  Tensor3 theta = tucker_assemble(f);
  return GroundTruth{std::move(f), std::move(eta), std::move(theta)};
}

inline TruthDiagnostics diagnose(const GroundTruth& gt) {
  TruthDiagnostics d;
  d.core_frobenius = frobenius_norm(gt.factors.core);
  d.u_two_to_inf = two_to_inf_norm(gt.factors.u);
  d.v_two_to_inf = two_to_inf_norm(gt.factors.v);
  d.w_sup_norm = two_to_inf_norm(gt.factors.w);
  const Matrix& w = gt.factors.w;
  d.min_jump = w.rows() > 1 ? std::numeric_limits<double>::infinity() : 0.0;
  for (Index k = 1; k < w.rows(); ++k) d.min_jump = std::min(d.min_jump, (w.row(k) - w.row(k - 1)).norm());
  for (double x : gt.theta.data()) d.max_theta = std::max(d.max_theta, x);
  return d;
}

/// Independent Poisson processes with intensity lambda0 exp(theta_ij(t)):
/// per pair and true interval a Poisson count, then that many uniform times.
inline EdgeSet sample_edges(const GroundTruth& gt, double lambda0, std::uint64_t seed) {
  if (!(lambda0 > 0.0)) throw ValueError("sample_edges: lambda0 must be positive");
  const Tensor3& theta = gt.theta;
  for (double x : theta.data()) {
    if (x > kExpClamp) {
      throw NumericalError("sample_edges: log-intensity " + std::to_string(x) + " overflows");
    }
  }
  std::mt19937_64 rng(seed);
  const Index n1 = theta.dim(1), n2 = theta.dim(2), k0 = theta.dim(3);
  EdgeSet edges(n1, n2, gt.eta.horizon());
  for (Index k = 0; k < k0; ++k) {
    const double lo = gt.eta.left(k);
    const double hi = gt.eta.right(k);
    const double width = hi - lo;
    std::uniform_real_distribution<double> when(lo, hi);
    for (Index j = 0; j < n2; ++j) {
      for (Index i = 0; i < n1; ++i) {
        const double mean = lambda0 * std::exp(theta(i, j, k)) * width;
        std::poisson_distribution<long long> count(mean);
        const long long c = mean > 0.0 ? count(rng) : 0;
        for (long long e = 0; e < c; ++e) {
          double t = when(rng);
          if (t >= hi) t = std::nextafter(hi, lo);
          edges.add(i, j, t);
        }
      }
    }
  }
  return edges;
}

/// True log-intensity on an arbitrary partition: slice l uses w*(tau_{l-1}),
/// the embedding of the true interval containing the left endpoint.
inline Tensor3 expand_truth(const GroundTruth& gt, const Partition& p) {
  if (p.horizon() != gt.eta.horizon()) throw ValueError("expand_truth: horizon mismatch");
  Tensor3 out(gt.theta.dim(1), gt.theta.dim(2), p.count());
  for (Index l = 0; l < p.count(); ++l) out.slice(l) = gt.theta.slice(gt.eta.interval_of(p.left(l)));
  return out;
}

/// True log-intensity on an arbitrary partition where slice l uses the true
/// interval that overlaps [tau_{l-1}, tau_l) the most (earliest on ties).
/// With K = K0 intervals close to eta this is slice-by-slice M*_eta.
inline Tensor3 majority_truth(const GroundTruth& gt, const Partition& p) {
  if (p.horizon() != gt.eta.horizon()) throw ValueError("majority_truth: horizon mismatch");
  Tensor3 out(gt.theta.dim(1), gt.theta.dim(2), p.count());
  for (Index l = 0; l < p.count(); ++l) {
    Index best = 0;
    double best_overlap = -1.0;
    for (Index k = 0; k < gt.eta.count(); ++k) {
      const double overlap =
          std::min(p.right(l), gt.eta.right(k)) - std::max(p.left(l), gt.eta.left(k));
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = k;
      }
    }
    out.slice(l) = gt.theta.slice(best);
  }
  return out;
}

/// |m_hat - m_star|_F^2 / (n1 n2 n3).
inline double estimation_error(const Tensor3& m_hat, const Tensor3& m_star) {
  if (m_hat.dims() != m_star.dims()) {
    throw ShapeError("estimation_error: " + dims_string(m_hat.dims()) + " vs " +
                     dims_string(m_star.dims()));
  }
  return squared_norm(m_hat - m_star) / static_cast<double>(m_hat.size());
}

/// Predicted edge count per node pair: sum_l lambda0 exp(m_ijl) width_l.
inline Matrix expected_pair_counts(const Tensor3& m, const Partition& p, double lambda0) {
  if (m.dim(3) != p.count()) throw ShapeError("expected_pair_counts: partition size mismatch");
  Matrix out = Matrix::Zero(m.dim(1), m.dim(2));
  for (Index l = 0; l < m.dim(3); ++l) {
    out += (lambda0 * p.width(l)) * m.slice(l).array().exp().matrix();
  }
  return out;
}

/// Observed edge count per node pair.
inline Matrix pair_counts(const EdgeSet& edges) {
  Matrix out = Matrix::Zero(edges.n1(), edges.n2());
  for (const Edge& e : edges.edges()) out(e.out, e.in) += 1.0;
  return out;
}

/// |(truth - pred) o mask|_F / |truth o mask|_F.
inline double masked_prediction_error(const Matrix& counts_true, const Matrix& counts_pred,
                                      const Matrix& mask) {
  if (counts_true.rows() != counts_pred.rows() || counts_true.cols() != counts_pred.cols() ||
      counts_true.rows() != mask.rows() || counts_true.cols() != mask.cols()) {
    throw ShapeError("masked_prediction_error: operand shapes differ");
  }
  const double denom = counts_true.cwiseProduct(mask).norm();
  if (!(denom > 0.0)) throw ValueError("masked_prediction_error: held-out pairs carry no edges");
  return (counts_true - counts_pred).cwiseProduct(mask).norm() / denom;
}

}  // namespace lnet
