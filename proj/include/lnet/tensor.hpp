// Dense order-3 tensors, Tucker factors and the handful of norms used by the
// estimator.
//
// Storage order: element (i, j, k) (0-based) lives at i + n1 * (j + n2 * k),
// so the first index varies fastest. Unfoldings never rely on this layout;
// they are built from the cyclic index law
//
//   mode 1: row i, column j + n2 * k
//   mode 2: row j, column k + n3 * i
//   mode 3: row k, column i + n1 * j
//
// which gives the Kronecker identities
//   unfold1(M) = U unfold1(S) (W (x) V)^T
//   unfold2(M) = V unfold2(S) (U (x) W)^T
//   unfold3(M) = W unfold3(S) (V (x) U)^T.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lnet/error.hpp"

namespace lnet {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Dims3 = std::array<Index, 3>;

inline std::string dims_string(const Dims3& d) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

class Tensor3 {
 public:
  Tensor3() = default;

  Tensor3(Index n1, Index n2, Index n3, double fill = 0.0) : dims_{n1, n2, n3} {
    if (n1 <= 0 || n2 <= 0 || n3 <= 0) {
      throw ShapeError("Tensor3: dimensions must be positive, got " + dims_string(dims_));
    }
    data_.assign(static_cast<std::size_t>(n1 * n2 * n3), fill);
  }

  explicit Tensor3(const Dims3& d, double fill = 0.0) : Tensor3(d[0], d[1], d[2], fill) {}

  Tensor3(const Dims3& d, std::vector<double> data) : Tensor3(d) {
    if (data.size() != data_.size()) {
      throw ShapeError("Tensor3: data length " + std::to_string(data.size()) +
                       " does not match " + dims_string(d));
    }
    data_ = std::move(data);
  }

  const Dims3& dims() const noexcept { return dims_; }
  /// Size along `mode` (1, 2 or 3).
  Index dim(int mode) const { return dims_.at(static_cast<std::size_t>(mode - 1)); }
  Index size() const noexcept { return static_cast<Index>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(Index i, Index j, Index k) noexcept { return data_[offset(i, j, k)]; }
  double operator()(Index i, Index j, Index k) const noexcept { return data_[offset(i, j, k)]; }

  /// Bounds-checked access (0-based).
  double at(Index i, Index j, Index k) const {
    check(i, j, k);
    return data_[offset(i, j, k)];
  }
  double& at(Index i, Index j, Index k) {
    check(i, j, k);
    return data_[offset(i, j, k)];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Column-major view as an (n1*n2) x n3 matrix; column k is frontal slice k.
  Eigen::Map<Matrix> as_slices() { return {data_.data(), dims_[0] * dims_[1], dims_[2]}; }
  Eigen::Map<const Matrix> as_slices() const {
    return {data_.data(), dims_[0] * dims_[1], dims_[2]};
  }
  /// Column-major view of frontal slice k as an n1 x n2 matrix.
  Eigen::Map<Matrix> slice(Index k) {
    return {data_.data() + k * dims_[0] * dims_[1], dims_[0], dims_[1]};
  }
  Eigen::Map<const Matrix> slice(Index k) const {
    return {data_.data() + k * dims_[0] * dims_[1], dims_[0], dims_[1]};
  }

  Tensor3& operator+=(const Tensor3& o) {
    require_same(o, "+=");
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
    return *this;
  }
  Tensor3& operator-=(const Tensor3& o) {
    require_same(o, "-=");
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= o.data_[n];
    return *this;
  }
  Tensor3& operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
  }
  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(Tensor3 a, double s) { return a *= s; }
  friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t offset(Index i, Index j, Index k) const noexcept {
    return static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k));
  }
  void check(Index i, Index j, Index k) const {
    if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2]) {
      throw std::out_of_range("Tensor3: index (" + std::to_string(i) + ", " + std::to_string(j) +
                              ", " + std::to_string(k) + ") outside " + dims_string(dims_));
    }
  }
  void require_same(const Tensor3& o, const char* op) const {
    if (o.dims_ != dims_) {
      throw ShapeError(std::string("Tensor3 ") + op + ": " + dims_string(dims_) + " vs " +
                       dims_string(o.dims_));
    }
  }

  Dims3 dims_{0, 0, 0};
  std::vector<double> data_;
};

/// Core tensor with one factor matrix per mode: M = S x1 U x2 V x3 W.
struct TuckerFactors {
  Tensor3 core;
  Matrix u;
  Matrix v;
  Matrix w;

  Dims3 dims() const { return {u.rows(), v.rows(), w.rows()}; }
  Dims3 ranks() const { return core.dims(); }

  /// Throws ShapeError unless the factor shapes agree with the core and r_s <= n_s.
  void validate() const {
    const Dims3 r = core.dims();
    const std::array<const Matrix*, 3> f{&u, &v, &w};
    for (std::size_t s = 0; s < 3; ++s) {
      if (f[s]->cols() != r[s]) {
        throw ShapeError("TuckerFactors: factor " + std::to_string(s + 1) + " has " +
                         std::to_string(f[s]->cols()) + " columns, core rank is " +
                         std::to_string(r[s]));
      }
      if (r[s] > f[s]->rows()) {
        throw ShapeError("TuckerFactors: rank " + std::to_string(r[s]) + " exceeds dimension " +
                         std::to_string(f[s]->rows()) + " in mode " + std::to_string(s + 1));
      }
    }
  }
};

namespace detail {

inline void check_mode(int mode) {
  if (mode < 1 || mode > 3) throw ValueError("mode must be 1, 2 or 3, got " + std::to_string(mode));
}

// (row, column) of element (i, j, k) in the mode-`mode` unfolding.
inline std::pair<Index, Index> unfold_position(const Dims3& d, int mode, Index i, Index j,
                                               Index k) {
  switch (mode) {
    case 1: return {i, j + d[1] * k};
    case 2: return {j, k + d[2] * i};
    default: return {k, i + d[0] * j};
  }
}

}  // namespace detail

/// Mode-k unfolding by the cyclic index law in the file header.
inline Matrix mode_unfold(const Tensor3& t, int mode) {
  detail::check_mode(mode);
  const Dims3& d = t.dims();
  const Index rows = t.dim(mode);
  Matrix out(rows, t.size() / rows);
  for (Index k = 0; k < d[2]; ++k)
    for (Index j = 0; j < d[1]; ++j)
      for (Index i = 0; i < d[0]; ++i) {
        const auto [r, c] = detail::unfold_position(d, mode, i, j, k);
        out(r, c) = t(i, j, k);
      }
  return out;
}

/// Inverse of mode_unfold.
inline Tensor3 mode_refold(const Matrix& m, int mode, const Dims3& dims) {
  detail::check_mode(mode);
  Tensor3 out(dims);
  const Index rows = out.dim(mode);
  if (m.rows() != rows || m.cols() * rows != out.size()) {
    throw ShapeError("mode_refold: " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " matrix cannot fold into " + dims_string(dims) + " along mode " +
                     std::to_string(mode));
  }
  for (Index k = 0; k < dims[2]; ++k)
    for (Index j = 0; j < dims[1]; ++j)
      for (Index i = 0; i < dims[0]; ++i) {
        const auto [r, c] = detail::unfold_position(dims, mode, i, j, k);
        out(i, j, k) = m(r, c);
      }
  return out;
}

/// t x_mode a, where a is p x n_mode. The result has n_mode replaced by p.
inline Tensor3 mode_product(const Tensor3& t, const Matrix& a, int mode) {
  detail::check_mode(mode);
  const Dims3& d = t.dims();
  if (a.cols() != t.dim(mode)) {
    throw ShapeError("mode_product: matrix has " + std::to_string(a.cols()) +
                     " columns, tensor mode " + std::to_string(mode) + " has size " +
                     std::to_string(t.dim(mode)));
  }
  const Index p = a.rows();
  Dims3 od = d;
  od[static_cast<std::size_t>(mode - 1)] = p;
  Tensor3 out(od);
  switch (mode) {
    case 1: {
      Eigen::Map<const Matrix> x(t.data().data(), d[0], d[1] * d[2]);
      Eigen::Map<Matrix> y(out.data().data(), p, d[1] * d[2]);
      y.noalias() = a * x;
      break;
    }
    case 2:
      for (Index k = 0; k < d[2]; ++k) out.slice(k).noalias() = t.slice(k) * a.transpose();
      break;
    default:
      out.as_slices().noalias() = t.as_slices() * a.transpose();
      break;
  }
  return out;
}

/// t x1 u^T x2 v^T x3 w^T, the projection of t onto the factor column spaces.
inline Tensor3 contract_all(const Tensor3& t, const Matrix& u, const Matrix& v, const Matrix& w) {
  return mode_product(mode_product(mode_product(t, w.transpose(), 3), v.transpose(), 2),
                      u.transpose(), 1);
}

/// m_ijk = sum_abc S_abc U_ia V_jb W_kc.
inline Tensor3 tucker_assemble(const TuckerFactors& f) {
  f.validate();
  return mode_product(mode_product(mode_product(f.core, f.u, 1), f.v, 2), f.w, 3);
}

inline double squared_norm(const Tensor3& t) {
  double s = 0.0;
  for (double x : t.data()) s += x * x;
  return s;
}

inline double frobenius_norm(const Tensor3& t) { return std::sqrt(squared_norm(t)); }

/// |a - b|_F^2 without a temporary.
inline double squared_distance(const Tensor3& a, const Tensor3& b) {
  if (a.dims() != b.dims()) {
    throw ShapeError("squared_distance: " + dims_string(a.dims()) + " vs " + dims_string(b.dims()));
  }
  return (a.as_slices() - b.as_slices()).squaredNorm();
}

/// r-th largest singular value, 1 <= r <= min(rows, cols).
inline double sigma_r(const Matrix& m, Index r) {
  const Index kmax = std::min(m.rows(), m.cols());
  if (r < 1 || r > kmax) {
    throw ValueError("sigma_r: r = " + std::to_string(r) + " outside [1, " +
                     std::to_string(kmax) + "]");
  }
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues()(r - 1);
}

/// Maximum Euclidean row norm.
inline double two_to_inf_norm(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  return m.rowwise().norm().maxCoeff();
}

/// Leading r left singular vectors of m, as orthonormal columns ordered by
/// decreasing singular value. Uses the eigendecomposition of m m^T, which is
/// cheap for the short-and-wide unfoldings this library produces.
inline Matrix leading_left_singular_vectors(const Matrix& m, Index r) {
  if (r < 1 || r > m.rows()) {
    throw ValueError("leading_left_singular_vectors: rank " + std::to_string(r) +
                     " outside [1, " + std::to_string(m.rows()) + "]");
  }
  const Matrix gram = m * m.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  // Eigenvalues come out ascending.
  Matrix out = es.eigenvectors().rightCols(r).rowwise().reverse();
  // Deterministic sign: the largest-magnitude entry of every column is positive.
  for (Index c = 0; c < r; ++c) {
    Index idx = 0;
    out.col(c).cwiseAbs().maxCoeff(&idx);
    if (out(idx, c) < 0) out.col(c) *= -1.0;
  }
  return out;
}

}  // namespace lnet
