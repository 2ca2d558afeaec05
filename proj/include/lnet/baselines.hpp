// Truncated HOSVD and higher-order orthogonal iteration on raw tensors.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lnet/error.hpp"
#include "lnet/tensor.hpp"

namespace lnet {

namespace detail {

inline void check_ranks(const Tensor3& t, const Dims3& ranks, const char* who) {
  for (int s = 1; s <= 3; ++s) {
    const Index r = ranks[static_cast<std::size_t>(s - 1)];
    if (r < 1 || r > t.dim(s)) {
      throw ValueError(std::string(who) + ": rank " + std::to_string(r) + " invalid for mode " +
                       std::to_string(s) + " of size " + std::to_string(t.dim(s)));
    }
  }
}

}  // namespace detail

/// Leading left singular vectors of each unfolding; core = t x1 U^T x2 V^T x3 W^T.
/// Factors have orthonormal columns.
inline TuckerFactors hosvd(const Tensor3& t, const Dims3& ranks) {
  detail::check_ranks(t, ranks, "hosvd");
  TuckerFactors f;
  f.u = leading_left_singular_vectors(mode_unfold(t, 1), ranks[0]);
  f.v = leading_left_singular_vectors(mode_unfold(t, 2), ranks[1]);
  f.w = leading_left_singular_vectors(mode_unfold(t, 3), ranks[2]);
  f.core = contract_all(t, f.u, f.v, f.w);
  return f;
}

struct HooiResult {
  TuckerFactors factors;
  /// |t - assemble(factors)|_F after the HOSVD start (entry 0) and each sweep.
  std::vector<double> error_trace;
  int iters_run = 0;
};

/// HOOI started from HOSVD. Each sweep replaces U, V, W in turn by the leading
/// left singular vectors of t contracted with the other two factors. Stops
/// after `iters` sweeps or once the reconstruction error changes by less than
/// `tol` relative to the previous sweep.
inline HooiResult hooi_detail(const Tensor3& t, const Dims3& ranks, int iters = 50,
                              double tol = 1e-9) {
  if (iters < 1) throw ValueError("hooi: iters must be at least 1");
  HooiResult res;
  res.factors = hosvd(t, ranks);
  TuckerFactors& f = res.factors;
  res.error_trace.push_back(frobenius_norm(t - tucker_assemble(f)));
  for (int it = 1; it <= iters; ++it) {
    const Tensor3 tvw = mode_product(mode_product(t, f.v.transpose(), 2), f.w.transpose(), 3);
    f.u = leading_left_singular_vectors(mode_unfold(tvw, 1), ranks[0]);
    const Tensor3 tuw = mode_product(mode_product(t, f.u.transpose(), 1), f.w.transpose(), 3);
    f.v = leading_left_singular_vectors(mode_unfold(tuw, 2), ranks[1]);
    const Tensor3 tuv = mode_product(mode_product(t, f.u.transpose(), 1), f.v.transpose(), 2);
    f.w = leading_left_singular_vectors(mode_unfold(tuv, 3), ranks[2]);
    f.core = mode_product(tuv, f.w.transpose(), 3);

    const double err = frobenius_norm(t - tucker_assemble(f));
    const double prev = res.error_trace.back();
    res.error_trace.push_back(err);
    res.iters_run = it;
    if (std::abs(prev - err) <= tol * std::max(prev, 1e-300)) break;
  }
  return res;
}

inline TuckerFactors hooi(const Tensor3& t, const Dims3& ranks, int iters = 50) {
  return hooi_detail(t, ranks, iters).factors;
}

}  // namespace lnet
