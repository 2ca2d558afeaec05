// Small helpers shared by the unit tests.
#pragma once

#include <random>
#include <vector>

#include "lnet/tensor.hpp"

namespace lnet::testing {

// Tensor entries as a comparable vector.
inline std::vector<double> values(const Tensor3& t) { return {t.data().begin(), t.data().end()}; }

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = g(rng);
  return m;
}

inline Tensor3 random_tensor(const Dims3& d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Tensor3 t(d);
  for (double& x : t.data()) x = g(rng);
  return t;
}

inline TuckerFactors random_factors(const Dims3& n, const Dims3& r, std::mt19937_64& rng,
                                    double scale = 1.0) {
  TuckerFactors f;
  f.core = random_tensor(r, rng, scale);
  f.u = random_matrix(n[0], r[0], rng, scale);
  f.v = random_matrix(n[1], r[1], rng, scale);
  f.w = random_matrix(n[2], r[2], rng, scale);
  return f;
}

// m_ijk = sum_abc S_abc U_ia V_jb W_kc by explicit loops.
inline Tensor3 naive_assemble(const TuckerFactors& f) {
  Tensor3 m(f.dims());
  const Dims3 r = f.ranks();
  for (Index i = 0; i < f.u.rows(); ++i)
    for (Index j = 0; j < f.v.rows(); ++j)
      for (Index k = 0; k < f.w.rows(); ++k) {
        double s = 0.0;
        for (Index a = 0; a < r[0]; ++a)
          for (Index b = 0; b < r[1]; ++b)
            for (Index c = 0; c < r[2]; ++c) s += f.core(a, b, c) * f.u(i, a) * f.v(j, b) * f.w(k, c);
        m(i, j, k) = s;
      }
  return m;
}

}  // namespace lnet::testing
