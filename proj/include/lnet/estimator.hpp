// Poisson log-likelihood over a partition, its gradients with respect to the
// Tucker factors, the orthogonality regularizer, the constraint-set
// projections, and the projected gradient descent loop.
//
// For a partition tau with widths w_l and counts Y, the log-likelihood of a
// log-intensity tensor M is
//
//   l(M) = sum_ijl  m_ijl * Y_ijl - lambda0 * exp(m_ijl) * w_l
//
// and the penalized objective minimized by pgd_fit is -l(M) + gamma * J with
//
//   J = 1/4 (|U^T U / n1 - I|_F^2 + |V^T V / n2 - I|_F^2 + |W^T W / n3 - I|_F^2).
//
// An optional n1 x n2 pair mask (entries 0 or 1) removes node pairs from the
// likelihood entirely: masked cells contribute neither counts nor exposure.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lnet/error.hpp"
#include "lnet/events.hpp"
#include "lnet/tensor.hpp"

namespace lnet {

/// Entries of M are clamped to [-kExpClamp, kExpClamp] inside exp().
inline constexpr double kExpClamp = 30.0;

using PairMask = std::optional<Matrix>;

/// Radii of the constraint sets: Frobenius ball for the core, 2->inf balls
/// for the factor matrices.
struct ConstraintRadii {
  double core = 0.0;
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;
};

struct PgdConfig {
  double lambda0 = 1.0;
  /// Regularization weight; defaults to n1 * n2 * n3 * H * lambda0.
  std::optional<double> gamma;
  /// Step-size constant c in zeta = c / (n1 n2 n3 H).
  double step_c = 0.1;
  int max_iters = 500;
  /// Stop when |M_{r+1} - M_r|_F / |M_r|_F falls below this.
  double tol = 1e-8;
  /// Defaults to radius_slack times the initializer's norms.
  std::optional<ConstraintRadii> radii;
  double radius_slack = 2.0;
  /// Number of times step_c is halved after a divergent run before giving up.
  int max_halvings = 10;
  /// Alternating Newton sweeps applied by initialize() after the spectral start.
  int init_sweeps = 30;
  /// Sweeps stop early once the relative log-likelihood gain drops below this.
  double init_tol = 1e-9;
  /// Candidate starts for initialize(): each entry g > 0 fits g merged
  /// intervals first and expands the temporal factor; 0 starts directly on the
  /// given partition. Entries with g >= the interval count are skipped.
  std::vector<Index> init_groups{0, 3, 4, 8, 16};
  /// Refinement sweeps spent on each candidate before the best is kept.
  int init_screen_sweeps = 8;

  void validate() const {
    if (!(lambda0 > 0.0)) throw ValueError("PgdConfig: lambda0 must be positive");
    if (!(step_c > 0.0)) throw ValueError("PgdConfig: step_c must be positive");
    if (max_iters < 1) throw ValueError("PgdConfig: max_iters must be at least 1");
    if (gamma && !(*gamma >= 0.0)) throw ValueError("PgdConfig: gamma must be non-negative");
    if (radii && !(radii->core > 0.0 && radii->u > 0.0 && radii->v > 0.0 && radii->w > 0.0)) {
      throw ValueError("PgdConfig: constraint radii must be positive");
    }
    if (!(radius_slack > 0.0)) throw ValueError("PgdConfig: radius_slack must be positive");
    if (max_halvings < 0) throw ValueError("PgdConfig: max_halvings must be non-negative");
    if (init_sweeps < 0) throw ValueError("PgdConfig: init_sweeps must be non-negative");
    if (init_screen_sweeps < 0) throw ValueError("PgdConfig: init_screen_sweeps must be non-negative");
    for (Index g : init_groups)
      if (g < 0) throw ValueError("PgdConfig: init_groups entries must be non-negative");
  }
};

struct FitResult {
  TuckerFactors factors;
  Tensor3 assembled;
  /// Penalized objective -l + gamma J; entry 0 is the initializer.
  std::vector<double> objective_trace;
  int iters_run = 0;
  double step_c = 0.0;
  double gamma = 0.0;
  ConstraintRadii radii;
};

struct FactorGradients {
  Tensor3 core;
  Matrix u;
  Matrix v;
  Matrix w;
};

namespace detail {

inline void check_problem(const Dims3& m_dims, const Tensor3& counts, const Partition& p,
                          const PairMask& mask) {
  if (m_dims != counts.dims()) {
    throw ShapeError("log-intensity is " + dims_string(m_dims) + " but counts are " +
                     dims_string(counts.dims()));
  }
  if (counts.dim(3) != p.count()) {
    throw ShapeError("counts have " + std::to_string(counts.dim(3)) +
                     " time slices, partition has " + std::to_string(p.count()) + " intervals");
  }
  if (mask && (mask->rows() != counts.dim(1) || mask->cols() != counts.dim(2))) {
    throw ShapeError("pair mask must be n1 x n2");
  }
}

inline double clamped_exp(double m) { return std::exp(std::clamp(m, -kExpClamp, kExpClamp)); }

struct Evaluation {
  double loglik = 0.0;
  Tensor3 grad;
};

// Log-likelihood and its entrywise gradient, one time slice at a time.
inline Evaluation evaluate(const Tensor3& m, const Tensor3& counts, const Partition& p,
                           double lambda0, const PairMask& mask) {
  const Dims3& d = m.dims();
  Evaluation ev{0.0, Tensor3(d)};
  for (Index l = 0; l < d[2]; ++l) {
    const double exposure = lambda0 * p.width(l);
    const auto x = m.slice(l).array();
    const auto y = counts.slice(l).array();
    const Eigen::ArrayXXd rate = exposure * x.max(-kExpClamp).min(kExpClamp).exp();
    if (mask) {
      const auto keep = mask->array();
      ev.loglik += (keep * (x * y - rate)).sum();
      ev.grad.slice(l).array() = keep * (y - rate);
    } else {
      ev.loglik += (x * y - rate).sum();
      ev.grad.slice(l).array() = y - rate;
    }
  }
  return ev;
}

inline double orthogonality_penalty(const Matrix& x) {
  const auto n = static_cast<double>(x.rows());
  const Matrix dev = x.transpose() * x / n - Matrix::Identity(x.cols(), x.cols());
  return dev.squaredNorm();
}

inline Matrix orthogonality_direction(const Matrix& x) {
  const auto n = static_cast<double>(x.rows());
  return x * (x.transpose() * x / n - Matrix::Identity(x.cols(), x.cols()));
}

// Norms within a few ulps of the radius count as inside, which keeps the
// projection exactly idempotent under rounding.
inline constexpr double kRadiusSlack = 1.0 + 8.0 * std::numeric_limits<double>::epsilon();

inline void scale_rows_into_ball(Matrix& x, double radius) {
  for (Index r = 0; r < x.rows(); ++r) {
    const double norm = x.row(r).norm();
    if (norm > radius * kRadiusSlack) x.row(r) *= radius / norm;
  }
}

}  // namespace detail

/// sum_ijl { m_ijl Y_ijl - lambda0 exp(m_ijl) (tau_l - tau_{l-1}) }.
inline double log_likelihood(const Tensor3& m, const Tensor3& counts, const Partition& p,
                             double lambda0, const PairMask& mask = {}) {
  detail::check_problem(m.dims(), counts, p, mask);
  return detail::evaluate(m, counts, p, lambda0, mask).loglik;
}

/// Entrywise gradient of log_likelihood: Y_ijl - lambda0 exp(m_ijl) width_l.
inline Tensor3 grad_m(const Tensor3& m, const Tensor3& counts, const Partition& p,
                      double lambda0, const PairMask& mask = {}) {
  detail::check_problem(m.dims(), counts, p, mask);
  return detail::evaluate(m, counts, p, lambda0, mask).grad;
}

/// Pulls an entrywise gradient G back through tucker_assemble.
inline FactorGradients grad_factors_from_m(const TuckerFactors& f, const Tensor3& g) {
  f.validate();
  if (g.dims() != f.dims()) {
    throw ShapeError("gradient is " + dims_string(g.dims()) + " but factors assemble to " +
                     dims_string(f.dims()));
  }
  FactorGradients out;
  const Tensor3 g3 = mode_product(g, f.w.transpose(), 3);        // n1 x n2 x r3
  const Tensor3 g23 = mode_product(g3, f.v.transpose(), 2);      // n1 x r2 x r3
  out.u = mode_unfold(g23, 1) * mode_unfold(f.core, 1).transpose();
  const Tensor3 g13 = mode_product(g3, f.u.transpose(), 1);      // r1 x n2 x r3
  out.v = mode_unfold(g13, 2) * mode_unfold(f.core, 2).transpose();
  out.core = mode_product(g13, f.v.transpose(), 2);              // r1 x r2 x r3
  const Tensor3 g12 = mode_product(mode_product(g, f.u.transpose(), 1), f.v.transpose(), 2);
  out.w = mode_unfold(g12, 3) * mode_unfold(f.core, 3).transpose();
  return out;
}

/// Gradients of log_likelihood(tucker_assemble(f)) with respect to S, U, V, W.
inline FactorGradients grad_factors(const TuckerFactors& f, const Tensor3& counts,
                                    const Partition& p, double lambda0,
                                    const PairMask& mask = {}) {
  return grad_factors_from_m(f, grad_m(tucker_assemble(f), counts, p, lambda0, mask));
}

/// J = 1/4 sum over U, V, W of |X^T X / n - I|_F^2.
inline double regularizer(const TuckerFactors& f) {
  return 0.25 * (detail::orthogonality_penalty(f.u) + detail::orthogonality_penalty(f.v) +
                 detail::orthogonality_penalty(f.w));
}

struct RegularizerDirections {
  Matrix u;
  Matrix v;
  Matrix w;
};

/// X (X^T X / n - I) for each factor. This is n times dJ/dX and is the term
/// the PGD update subtracts, scaled by zeta * gamma.
inline RegularizerDirections reg_grads(const TuckerFactors& f) {
  return {detail::orthogonality_direction(f.u), detail::orthogonality_direction(f.v),
          detail::orthogonality_direction(f.w)};
}

/// Radial projection onto C_S x C_U x C_V x C_W.
inline TuckerFactors project(TuckerFactors f, const ConstraintRadii& radii) {
  const double s_norm = frobenius_norm(f.core);
  if (s_norm > radii.core * detail::kRadiusSlack) f.core *= radii.core / s_norm;
  detail::scale_rows_into_ball(f.u, radii.u);
  detail::scale_rows_into_ball(f.v, radii.v);
  detail::scale_rows_into_ball(f.w, radii.w);
  return f;
}

inline ConstraintRadii default_radii(const TuckerFactors& f, double slack) {
  return {slack * frobenius_norm(f.core), slack * two_to_inf_norm(f.u),
          slack * two_to_inf_norm(f.v), slack * two_to_inf_norm(f.w)};
}

namespace detail {

// lambda0 * width_l per cell, zero on masked pairs.
inline Tensor3 exposure_tensor(const Dims3& d, const Partition& p, double lambda0,
                               const PairMask& mask) {
  Tensor3 e(d);
  for (Index l = 0; l < d[2]; ++l)
    for (Index j = 0; j < d[1]; ++j)
      for (Index i = 0; i < d[0]; ++i)
        e(i, j, l) = (mask ? (*mask)(i, j) : 1.0) * lambda0 * p.width(l);
  return e;
}

// Moves the scale of U, V, W into the core so that X^T X = n I; M is unchanged.
inline void orthonormalize_gauge(TuckerFactors& f) {
  Matrix* factors[3] = {&f.u, &f.v, &f.w};
  for (int s = 0; s < 3; ++s) {
    Matrix& x = *factors[s];
    const Index r = x.cols();
    const double root_n = std::sqrt(static_cast<double>(x.rows()));
    Eigen::HouseholderQR<Matrix> qr(x);
    Matrix q = qr.householderQ() * Matrix::Identity(x.rows(), r);
    Matrix rmat = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    for (Index c = 0; c < r; ++c) {
      if (rmat(c, c) < 0.0) {
        q.col(c) *= -1.0;
        rmat.row(c) *= -1.0;
      }
    }
    x = root_n * q;
    f.core = mode_product(f.core, rmat / root_n, s + 1);
  }
}

// Counts and exposures unfolded along one mode.
struct UnfoldedData {
  Matrix y;
  Matrix e;
};

inline Eigen::ArrayXXd clamped_exp(const Matrix& m) {
  return m.array().max(-kExpClamp).min(kExpClamp).exp();
}

// One damped Newton step on every row of the mode-s factor with the other
// factors held fixed. Rows are independent Poisson regressions, so each row
// halves its own step until its log-likelihood does not decrease.
inline void newton_rows(TuckerFactors& f, int mode, const UnfoldedData& data) {
  Matrix& x = mode == 1 ? f.u : mode == 2 ? f.v : f.w;
  Tensor3 rest = f.core;
  if (mode != 1) rest = mode_product(rest, f.u, 1);
  if (mode != 2) rest = mode_product(rest, f.v, 2);
  if (mode != 3) rest = mode_product(rest, f.w, 3);
  const Matrix bt = mode_unfold(rest, mode);  // r x (N / n_mode)
  const Matrix& y = data.y;
  const Matrix& e = data.e;
  const Index r = x.cols();
  const Index cells = bt.cols();

  const Matrix m = x * bt;
  const Matrix mu = (e.array() * clamped_exp(m)).matrix();
  const Matrix grad = (y - mu) * bt.transpose();
  const Vector before = (y.array() * m.array() - mu.array()).rowwise().sum();

  Matrix products(cells, r * (r + 1) / 2);
  for (Index a = 0, col = 0; a < r; ++a)
    for (Index b = a; b < r; ++b, ++col)
      products.col(col) = bt.row(a).cwiseProduct(bt.row(b)).transpose();
  const Matrix hess_entries = mu * products;

  Matrix steps = Matrix::Zero(x.rows(), r);
  for (Index i = 0; i < x.rows(); ++i) {
    Matrix h(r, r);
    for (Index a = 0, col = 0; a < r; ++a)
      for (Index b = a; b < r; ++b, ++col) h(a, b) = h(b, a) = hess_entries(i, col);
    h.diagonal().array() += 1e-8 * h.trace() / static_cast<double>(r) + 1e-12;
    const Vector step = h.ldlt().solve(grad.row(i).transpose());
    if (step.allFinite()) steps.row(i) = step.transpose();
  }

  // Full steps for every row at once; rows that lose likelihood backtrack alone.
  const Matrix dm = steps * bt;
  const Matrix trial = m + dm;
  const Vector after =
      (y.array() * trial.array() - e.array() * clamped_exp(trial)).rowwise().sum();
  for (Index i = 0; i < x.rows(); ++i) {
    if (after(i) >= before(i)) {
      x.row(i) += steps.row(i);
      continue;
    }
    double t = 0.5;
    for (int halving = 1; halving < 30; ++halving, t *= 0.5) {
      const Eigen::ArrayXd row_m = (m.row(i) + t * dm.row(i)).transpose().array();
      const Eigen::ArrayXd row_e = e.row(i).transpose().array();
      const double value = (y.row(i).transpose().array() * row_m -
                            row_e * row_m.max(-kExpClamp).min(kExpClamp).exp()).sum();
      if (value >= before(i)) {
        x.row(i) += t * steps.row(i);
        break;
      }
    }
  }
}

}  // namespace detail

/// Alternating Newton refinement of a Tucker fit of the log-intensity.
///
/// Each sweep updates the rows of U, then V, then W by damped Newton steps on
/// the log-likelihood and re-normalizes so that X^T X = n I. Stops after
/// `sweeps` sweeps or once the relative log-likelihood gain is below `tol`.
inline TuckerFactors refine_alternating(TuckerFactors f, const Tensor3& counts, const Partition& p,
                                        double lambda0, int sweeps, double tol = 1e-9,
                                        const PairMask& mask = {}) {
  f.validate();
  detail::check_problem(f.dims(), counts, p, mask);
  const Tensor3 exposure = detail::exposure_tensor(counts.dims(), p, lambda0, mask);
  Tensor3 y = counts;
  if (mask) {
    for (Index l = 0; l < y.dim(3); ++l) y.slice(l) = y.slice(l).cwiseProduct(*mask);
  }
  const detail::UnfoldedData data[3] = {{mode_unfold(y, 1), mode_unfold(exposure, 1)},
                                        {mode_unfold(y, 2), mode_unfold(exposure, 2)},
                                        {mode_unfold(y, 3), mode_unfold(exposure, 3)}};
  double prev = detail::evaluate(tucker_assemble(f), counts, p, lambda0, mask).loglik;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int mode = 1; mode <= 3; ++mode) detail::newton_rows(f, mode, data[mode - 1]);
    detail::orthonormalize_gauge(f);
    const double now = detail::evaluate(tucker_assemble(f), counts, p, lambda0, mask).loglik;
    const bool done = std::abs(now - prev) <= tol * std::max(1.0, std::abs(prev));
    prev = now;
    if (done) break;
  }
  return f;
}

namespace detail {

// Smoothed-log HOSVD with factors scaled to X^T X = n I.
inline TuckerFactors spectral_start(const Tensor3& counts, const Partition& p, const Dims3& ranks,
                                    const PgdConfig& cfg, double alpha, const PairMask& mask) {
  const Dims3& d = counts.dims();
  Tensor3 z(d);
  for (Index l = 0; l < d[2]; ++l) {
    const double exposure = cfg.lambda0 * p.width(l);
    double sum = 0.0;
    double observed = 0.0;
    for (Index j = 0; j < d[1]; ++j)
      for (Index i = 0; i < d[0]; ++i) {
        if (mask && (*mask)(i, j) == 0.0) continue;
        const double y = counts(i, j, l) + alpha;
        if (!(y > 0.0)) throw ValueError("initialize: zero count with alpha = 0");
        z(i, j, l) = std::log(y / exposure);
        sum += z(i, j, l);
        observed += 1.0;
      }
    if (mask) {
      if (observed == 0.0) throw ValueError("initialize: mask removes every node pair");
      const double fill = sum / observed;
      for (Index j = 0; j < d[1]; ++j)
        for (Index i = 0; i < d[0]; ++i)
          if ((*mask)(i, j) == 0.0) z(i, j, l) = fill;
    }
  }

  TuckerFactors f;
  f.u = leading_left_singular_vectors(mode_unfold(z, 1), ranks[0]);
  f.v = leading_left_singular_vectors(mode_unfold(z, 2), ranks[1]);
  f.w = leading_left_singular_vectors(mode_unfold(z, 3), ranks[2]);
  f.core = contract_all(z, f.u, f.v, f.w);

  const double s1 = std::sqrt(static_cast<double>(d[0]));
  const double s2 = std::sqrt(static_cast<double>(d[1]));
  const double s3 = std::sqrt(static_cast<double>(d[2]));
  f.u *= s1;
  f.v *= s2;
  f.w *= s3;
  f.core *= 1.0 / (s1 * s2 * s3);
  return f;
}

// Groups consecutive intervals into `groups` runs of near-equal length.
inline std::vector<Index> interval_groups(Index count, Index groups) {
  std::vector<Index> group_of(static_cast<std::size_t>(count));
  for (Index l = 0; l < count; ++l) group_of[static_cast<std::size_t>(l)] = l * groups / count;
  return group_of;
}

}  // namespace detail

namespace detail {

// Fits `groups` merged runs of consecutive intervals and gives every interval
// the temporal row of its run.
inline TuckerFactors coarse_start(const Tensor3& counts, const Partition& p, const Dims3& ranks,
                                  const PgdConfig& cfg, double alpha, const PairMask& mask,
                                  Index groups) {
  const Dims3& d = counts.dims();
  const std::vector<Index> group_of = interval_groups(d[2], groups);
  Tensor3 coarse(d[0], d[1], groups);
  std::vector<double> breaks(static_cast<std::size_t>(groups));
  for (Index l = 0; l < d[2]; ++l) {
    const Index g = group_of[static_cast<std::size_t>(l)];
    coarse.slice(g) += counts.slice(l);
    breaks[static_cast<std::size_t>(g)] = p.right(l);
  }
  const Partition coarse_p(p.horizon(), std::move(breaks));
  TuckerFactors fc = spectral_start(coarse, coarse_p, ranks, cfg, alpha, mask);
  fc = refine_alternating(std::move(fc), coarse, coarse_p, cfg.lambda0, cfg.init_sweeps,
                          cfg.init_tol, mask);
  TuckerFactors f = fc;
  f.w = Matrix(d[2], ranks[2]);
  for (Index l = 0; l < d[2]; ++l) f.w.row(l) = fc.w.row(group_of[static_cast<std::size_t>(l)]);
  orthonormalize_gauge(f);
  return f;
}

}  // namespace detail

/// Initial Tucker factors for pgd_fit.
///
/// The direct start takes Z = log((Y + alpha) / (lambda0 * width_l)) and
/// decomposes it by truncated HOSVD; factors are rescaled so that
/// U^T U = n1 I, V^T V = n2 I and W^T W = n3 I with the scale absorbed into
/// the core. Cells removed by the mask are filled with the mean of Z over
/// observed cells of the same slice.
///
/// With cfg.init_sweeps > 0 several starts are built (cfg.init_groups), each
/// is refined for cfg.init_screen_sweeps sweeps of refine_alternating, and the
/// one with the highest log-likelihood is refined for cfg.init_sweeps more.
/// The result is projected onto cfg.radii when set.
inline TuckerFactors initialize(const Tensor3& counts, const Partition& p, const Dims3& ranks,
                                const PgdConfig& cfg, double alpha = 0.5,
                                const PairMask& mask = {}) {
  cfg.validate();
  detail::check_problem(counts.dims(), counts, p, mask);
  const Dims3& d = counts.dims();
  for (int s = 0; s < 3; ++s) {
    if (ranks[static_cast<std::size_t>(s)] < 1 ||
        ranks[static_cast<std::size_t>(s)] > d[static_cast<std::size_t>(s)]) {
      throw ValueError("initialize: rank " + std::to_string(ranks[static_cast<std::size_t>(s)]) +
                       " invalid for dimension " + std::to_string(d[static_cast<std::size_t>(s)]) +
                       " in mode " + std::to_string(s + 1));
    }
  }
  if (!(alpha >= 0.0)) throw ValueError("initialize: alpha must be non-negative");

  TuckerFactors f;
  if (cfg.init_sweeps == 0) {
    f = detail::spectral_start(counts, p, ranks, cfg, alpha, mask);
  } else {
    std::vector<Index> tried;
    double best = -std::numeric_limits<double>::infinity();
    for (Index g : cfg.init_groups) {
      if (g > 0) g = std::max(g, ranks[2]);
      if (g >= d[2] || std::find(tried.begin(), tried.end(), g) != tried.end()) continue;
      tried.push_back(g);
      TuckerFactors cand = g == 0 ? detail::spectral_start(counts, p, ranks, cfg, alpha, mask)
                                  : detail::coarse_start(counts, p, ranks, cfg, alpha, mask, g);
      cand = refine_alternating(std::move(cand), counts, p, cfg.lambda0, cfg.init_screen_sweeps,
                                cfg.init_tol, mask);
      const double ll = detail::evaluate(tucker_assemble(cand), counts, p, cfg.lambda0, mask).loglik;
      if (tried.size() == 1 || ll > best) {
        best = ll;
        f = std::move(cand);
      }
    }
    if (tried.empty()) f = detail::spectral_start(counts, p, ranks, cfg, alpha, mask);
    f = refine_alternating(std::move(f), counts, p, cfg.lambda0, cfg.init_sweeps, cfg.init_tol, mask);
  }
  if (cfg.radii) f = project(std::move(f), *cfg.radii);
  return f;
}

namespace detail {

inline FitResult pgd_run(const Tensor3& counts, const Partition& p, const TuckerFactors& init,
                         const PgdConfig& cfg, double step_c, const ConstraintRadii& radii,
                         double gamma, const PairMask& mask) {
  const Dims3 d = init.dims();
  const double n1 = static_cast<double>(d[0]);
  const double n2 = static_cast<double>(d[1]);
  const double n3 = static_cast<double>(d[2]);
  const double zeta = step_c / (n1 * n2 * n3 * p.mean_width());

  FitResult res;
  res.step_c = step_c;
  res.gamma = gamma;
  res.radii = radii;
  res.factors = init;
  Tensor3 m = tucker_assemble(res.factors);
  Evaluation ev = evaluate(m, counts, p, cfg.lambda0, mask);
  res.objective_trace.push_back(-ev.loglik + gamma * regularizer(res.factors));
  if (!std::isfinite(res.objective_trace.back())) {
    throw DivergenceError(0, "non-finite objective at the initializer");
  }

  for (int r = 1; r <= cfg.max_iters; ++r) {
    const TuckerFactors& f = res.factors;
    const FactorGradients g = grad_factors_from_m(f, ev.grad);
    const RegularizerDirections reg = reg_grads(f);

    TuckerFactors next;
    next.u = f.u + zeta * (n1 * g.u - gamma * reg.u);
    next.v = f.v + zeta * (n2 * g.v - gamma * reg.v);
    next.w = f.w + zeta * (n3 * g.w - gamma * reg.w);
    next.core = f.core + zeta * g.core;
    next = project(std::move(next), radii);

    Tensor3 m_next = tucker_assemble(next);
    Evaluation ev_next = evaluate(m_next, counts, p, cfg.lambda0, mask);
    const double objective = -ev_next.loglik + gamma * regularizer(next);
    if (!std::isfinite(objective)) throw DivergenceError(r, "non-finite objective");
    const double last = res.objective_trace.back();
    if (objective > last + 1e-10 * std::max(1.0, std::abs(last))) {
      throw DivergenceError(r, "objective increased");
    }

    const double base = frobenius_norm(m);
    const double change = std::sqrt(squared_distance(m_next, m)) / (base > 0.0 ? base : 1.0);

    res.factors = std::move(next);
    m = std::move(m_next);
    ev = std::move(ev_next);
    res.objective_trace.push_back(objective);
    res.iters_run = r;
    if (change < cfg.tol) break;
  }

  for (double x : m.data()) {
    if (std::abs(x) > kExpClamp) {
      throw NumericalError("fitted log-intensity " + std::to_string(x) +
                           " exceeds the exp clamp of " + std::to_string(kExpClamp));
    }
  }
  res.assembled = std::move(m);
  return res;
}

}  // namespace detail

/// Projected gradient descent with per-factor step sizes.
///
/// Each iteration evaluates every gradient at the current iterate and then
/// updates simultaneously:
///
///   U <- P_U(U + zeta (n1 dl/dU - gamma U (U^T U / n1 - I)))
///   V <- P_V(V + zeta (n2 dl/dV - gamma V (V^T V / n2 - I)))
///   W <- P_W(W + zeta (n3 dl/dW - gamma W (W^T W / n3 - I)))
///   S <- P_S(S + zeta dl/dS)
///
/// with zeta = step_c / (n1 n2 n3 H) and H the mean interval width. A
/// non-finite or increasing objective restarts from `init` with step_c
/// halved, at most cfg.max_halvings times.
inline FitResult pgd_fit(const Tensor3& counts, const Partition& p, const TuckerFactors& init,
                         const PgdConfig& cfg, const PairMask& mask = {}) {
  cfg.validate();
  init.validate();
  detail::check_problem(init.dims(), counts, p, mask);
  const Dims3 d = init.dims();
  const double gamma = cfg.gamma.value_or(static_cast<double>(d[0] * d[1] * d[2]) *
                                          p.mean_width() * cfg.lambda0);
  const ConstraintRadii radii = cfg.radii.value_or(default_radii(init, cfg.radius_slack));
  const TuckerFactors start = project(init, radii);

  double step_c = cfg.step_c;
  for (int attempt = 0;; ++attempt) {
    try {
      return detail::pgd_run(counts, p, start, cfg, step_c, radii, gamma, mask);
    } catch (const DivergenceError&) {
      if (attempt >= cfg.max_halvings) throw;
      step_c *= 0.5;
    }
  }
}

}  // namespace lnet
