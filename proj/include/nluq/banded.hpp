#pragma once

// Symmetric band storage (lower triangle, LAPACK "L" layout) and an
// in-place band Cholesky. data(d, j) holds A(j + d, j) for 0 <= d <= kd.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace nluq {

template <typename Scalar>
class SymmetricBandMatrix {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  SymmetricBandMatrix() = default;
  SymmetricBandMatrix(Eigen::Index n, Eigen::Index kd)
      : n_(n), kd_(std::min(kd, std::max<Eigen::Index>(n - 1, 0))), data_(Matrix::Zero(kd_ + 1, n)) {}

  Eigen::Index rows() const { return n_; }
  Eigen::Index bandwidth() const { return kd_; }

  bool in_band(Eigen::Index i, Eigen::Index j) const { return std::abs(i - j) <= kd_; }

  Scalar operator()(Eigen::Index i, Eigen::Index j) const {
    if (i < j) {
      std::swap(i, j);
    }
    return i - j <= kd_ ? data_(i - j, j) : Scalar(0);
  }

  // Lower-triangle access; requires i >= j and i - j <= bandwidth().
  Scalar& lower(Eigen::Index i, Eigen::Index j) { return data_(i - j, j); }

  const Matrix& data() const { return data_; }
  Matrix& data() { return data_; }

  Matrix to_dense() const {
    Matrix out = Matrix::Zero(n_, n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      const Eigen::Index m = std::min(kd_, n_ - 1 - j);
      for (Eigen::Index d = 0; d <= m; ++d) {
        out(j + d, j) = data_(d, j);
        out(j, j + d) = data_(d, j);
      }
    }
    return out;
  }

  Vector operator*(const Vector& x) const {
    Vector y = Vector::Zero(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      const Eigen::Index m = std::min(kd_, n_ - 1 - j);
      y(j) += data_(0, j) * x(j);
      for (Eigen::Index d = 1; d <= m; ++d) {
        y(j + d) += data_(d, j) * x(j);
        y(j) += data_(d, j) * x(j + d);
      }
    }
    return y;
  }

  SymmetricBandMatrix& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

  friend SymmetricBandMatrix operator-(SymmetricBandMatrix a) {
    a.data_ = -a.data_;
    return a;
  }

 private:
  Eigen::Index n_ = 0;
  Eigen::Index kd_ = 0;
  Matrix data_;
};

// L L^T factorization of a symmetric positive definite band matrix.
template <typename Scalar>
class BandCholesky {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BandCholesky() = default;
  explicit BandCholesky(const SymmetricBandMatrix<Scalar>& a) { compute(a); }

  // Returns false (and leaves info() at the failing pivot) if A is not
  // numerically positive definite.
  bool compute(const SymmetricBandMatrix<Scalar>& a) {
    factor_ = a;
    auto& l = factor_.data();
    const Eigen::Index n = a.rows();
    const Eigen::Index kd = a.bandwidth();
    info_ = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Scalar pivot = l(0, j);
      if (!(pivot > Scalar(0))) {
        info_ = j;
        return false;
      }
      const Scalar d = std::sqrt(pivot);
      const Eigen::Index m = std::min(kd, n - 1 - j);
      l(0, j) = d;
      l.col(j).segment(1, m) /= d;
      // Right-looking rank-1 update of the trailing band.
      for (Eigen::Index p = 1; p <= m; ++p) {
        const Eigen::Index c = j + p;
        const Eigen::Index len = m - p + 1;
        l.col(c).head(len).noalias() -= l(p, j) * l.col(j).segment(p, len);
      }
    }
    return true;
  }

  Eigen::Index info() const { return info_; }

  Vector solve(const Vector& b) const {
    const auto& l = factor_.data();
    const Eigen::Index n = factor_.rows();
    const Eigen::Index kd = factor_.bandwidth();
    Vector x = b;
    for (Eigen::Index j = 0; j < n; ++j) {
      x(j) /= l(0, j);
      const Eigen::Index m = std::min(kd, n - 1 - j);
      x.segment(j + 1, m).noalias() -= x(j) * l.col(j).segment(1, m);
    }
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      const Eigen::Index m = std::min(kd, n - 1 - j);
      x(j) -= l.col(j).segment(1, m).dot(x.segment(j + 1, m));
      x(j) /= l(0, j);
    }
    return x;
  }

 private:
  SymmetricBandMatrix<Scalar> factor_;
  Eigen::Index info_ = -1;
};

}  // namespace nluq
