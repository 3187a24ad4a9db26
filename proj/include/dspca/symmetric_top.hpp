#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dspca/error.hpp"

namespace dspca {

template <typename Scalar>
struct TopEigenpairs {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector values;    // k largest, descending
  Matrix vectors;   // n x k, orthonormal columns
  Vector spectrum;  // every eigenvalue, ascending
};

namespace detail {

/// LU factorization with partial pivoting of the tridiagonal T - shift*I,
/// producing an upper factor with two superdiagonals.
template <typename Scalar>
class ShiftedTridiagonalLu {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  ShiftedTridiagonalLu(const Vector& diag, const Vector& sub, Scalar shift, Scalar tiny) {
    const Eigen::Index n = diag.size();
    u0_.resize(n);
    u1_.setZero(n);
    u2_.setZero(n);
    mult_.setZero(n);
    swapped_.assign(static_cast<std::size_t>(n), false);

    Scalar cur_d = diag(0) - shift;
    Scalar cur_1 = n > 1 ? sub(0) : Scalar(0);
    Scalar cur_2 = 0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      const Scalar below = sub(i);
      const Scalar next_d = diag(i + 1) - shift;
      const Scalar next_1 = i + 2 < n ? sub(i + 1) : Scalar(0);
      if (std::abs(below) > std::abs(cur_d)) {
        swapped_[static_cast<std::size_t>(i)] = true;
        const Scalar l = cur_d / below;
        u0_(i) = below;
        u1_(i) = next_d;
        u2_(i) = next_1;
        mult_(i) = l;
        const Scalar nd = cur_1 - l * next_d;
        const Scalar n1 = cur_2 - l * next_1;
        cur_d = nd;
        cur_1 = n1;
      } else {
        const Scalar l = cur_d == Scalar(0) ? Scalar(0) : below / cur_d;
        u0_(i) = cur_d;
        u1_(i) = cur_1;
        u2_(i) = cur_2;
        mult_(i) = l;
        cur_d = next_d - l * cur_1;
        cur_1 = next_1 - l * cur_2;
      }
      cur_2 = 0;
    }
    u0_(n - 1) = cur_d;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(u0_(i)) < tiny) u0_(i) = u0_(i) < Scalar(0) ? -tiny : tiny;
    }
  }

  void solve_in_place(Vector& b) const {
    const Eigen::Index n = b.size();
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if (swapped_[static_cast<std::size_t>(i)]) std::swap(b(i), b(i + 1));
      b(i + 1) -= mult_(i) * b(i);
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      Scalar s = b(i);
      if (i + 1 < n) s -= u1_(i) * b(i + 1);
      if (i + 2 < n) s -= u2_(i) * b(i + 2);
      b(i) = s / u0_(i);
    }
  }

 private:
  Vector u0_, u1_, u2_, mult_;
  std::vector<bool> swapped_;
};

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> start_vector(Eigen::Index n, Eigen::Index seed) {
  // Deterministic, well spread, and distinct per requested eigenpair.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x(n);
  std::uint64_t state = 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(seed + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    state ^= state >> 12;
    state ^= state << 25;
    state ^= state >> 27;
    const auto bits = state * 0x2545F4914F6CDD1DULL;
    x(i) = Scalar(0.5) + static_cast<Scalar>(bits >> 11) * Scalar(1.0 / 9007199254740992.0);
  }
  return x.normalized();
}

template <typename Matrix>
bool eigenpairs_accurate(const Matrix& a, const typename Matrix::Scalar norm,
                         const Eigen::Matrix<typename Matrix::Scalar, Eigen::Dynamic, 1>& values,
                         const Matrix& vectors) {
  using Scalar = typename Matrix::Scalar;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar scale = std::max(norm, std::numeric_limits<Scalar>::min());
  const Matrix gram = vectors.transpose() * vectors;
  if ((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > Scalar(1e3) * eps * std::sqrt(Scalar(a.rows())))
    return false;
  const Matrix resid = a.template selfadjointView<Eigen::Lower>() * vectors - vectors * values.asDiagonal();
  return resid.colwise().norm().maxCoeff() <= Scalar(1e3) * eps * scale * std::sqrt(Scalar(a.rows()));
}

}  // namespace detail

/// The k largest eigenpairs of a dense symmetric matrix (lower triangle is
/// read). Householder tridiagonalization, implicit QL for the spectrum,
/// inverse iteration with cluster reorthogonalization for the k vectors,
/// then back-transformation. Small problems, large k, and any result
/// failing the residual check go through the full solver instead.
template <typename Derived>
TopEigenpairs<typename Derived::Scalar> top_symmetric_eigenpairs(const Eigen::MatrixBase<Derived>& input,
                                                                 Eigen::Index k) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  const Eigen::Index n = input.rows();
  if (input.cols() != n) throw Error(ErrorKind::shape, "eigensolver: matrix is not square");
  if (k < 1 || k > n) throw Error(ErrorKind::domain, "eigensolver: k must lie in [1, n]");
  const Matrix a = input;

  TopEigenpairs<Scalar> out;
  auto full = [&] {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::internal, "eigensolver did not converge");
    out.spectrum = es.eigenvalues();
    out.values = es.eigenvalues().tail(k).reverse();
    out.vectors = es.eigenvectors().rightCols(k).rowwise().reverse();
  };

  if (n <= 48 || 4 * k > n) {
    full();
    return out;
  }

  Eigen::Tridiagonalization<Matrix> tri(a);
  const Vector diag = tri.diagonal();
  const Vector sub = tri.subDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::internal, "eigensolver did not converge");
  out.spectrum = es.eigenvalues();
  out.values = out.spectrum.tail(k).reverse();

  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar norm = std::max(std::abs(out.spectrum(0)), std::abs(out.spectrum(n - 1)));
  const Scalar tiny = std::max(eps * norm, std::numeric_limits<Scalar>::min());
  const Scalar cluster_tol = Scalar(1e-3) * norm;

  Matrix y(n, k);
  Scalar prev_shift = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    Scalar shift = out.values(j);
    if (j > 0) {
      const Scalar pert = Scalar(10) * eps * std::max(std::abs(shift), norm);
      if (prev_shift - shift < pert) shift = prev_shift - pert;
    }
    prev_shift = shift;
    Eigen::Index cluster_begin = j;
    while (cluster_begin > 0 && out.values(cluster_begin - 1) - out.values(j) <= cluster_tol) --cluster_begin;

    const detail::ShiftedTridiagonalLu<Scalar> lu(diag, sub, shift, tiny);
    Vector x = detail::start_vector<Scalar>(n, j);
    for (int iter = 0; iter < 6; ++iter) {
      lu.solve_in_place(x);
      for (Eigen::Index c = cluster_begin; c < j; ++c) x -= y.col(c).dot(x) * y.col(c);
      const Scalar len = x.norm();
      if (!(len > 0) || !std::isfinite(len)) {
        x = detail::start_vector<Scalar>(n, j + 7919 * (iter + 1));
        continue;
      }
      x /= len;
    }
    y.col(j) = x;
  }
  out.vectors = tri.matrixQ() * y;

  if (!detail::eigenpairs_accurate(a, norm, out.values, out.vectors)) full();
  return out;
}

}  // namespace dspca
