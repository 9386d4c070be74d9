#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "whdg/mesh.hpp"

namespace whdg {

namespace detail {
inline void check_reference_point(const Point& p, int dim) {
  constexpr double eps = 1e-12;
  for (int a = 0; a < dim; ++a) {
    if (!(p[a] >= -eps && p[a] <= 1.0 + eps))
      throw std::domain_error("polyspace: point outside the reference cell");
  }
}
}  // namespace detail

/// L^2(0,1)-orthonormal Legendre polynomials sqrt(2n+1) P_n(2x-1), n = 0..degree,
/// and their first derivatives.
inline void legendre(int degree, double x, double* values, double* derivs = nullptr) {
  const double t = 2.0 * x - 1.0;
  // Unnormalised P_n(t) and dP_n/dt by the three-term recurrence.
  double p_prev = 1.0, p = t, d_prev = 0.0, d = 1.0;
  for (int n = 0; n <= degree; ++n) {
    double pn, dn;
    if (n == 0) {
      pn = 1.0;
      dn = 0.0;
    } else if (n == 1) {
      pn = t;
      dn = 1.0;
    } else {
      pn = ((2.0 * n - 1.0) * t * p - (n - 1.0) * p_prev) / n;
      dn = d_prev + (2.0 * n - 1.0) * p;
      p_prev = p;
      p = pn;
      d_prev = d;
      d = dn;
    }
    const double scale = std::sqrt(2.0 * n + 1.0);
    values[n] = scale * pn;
    if (derivs) derivs[n] = 2.0 * scale * dn;
  }
}

/// Tensor products of orthonormal Legendre polynomials spanning Q_k on [0,1]^d.
/// Entry (i0, i1) sits at index i0 * (k+1) + i1 (lexicographic in the per-axis degree).
class TensorBasis {
 public:
  TensorBasis(int degree, int dim) : degree_(degree), dim_(dim) {
    if (degree < 0) throw std::invalid_argument("TensorBasis: degree must be >= 0");
    if (dim < 1 || dim > 2) throw std::invalid_argument("TensorBasis: dimension must be 1 or 2");
  }

  int degree() const { return degree_; }
  int dim() const { return dim_; }
  int size() const { return dim_ == 1 ? degree_ + 1 : (degree_ + 1) * (degree_ + 1); }

  Eigen::VectorXd values(const Point& p) const {
    detail::check_reference_point(p, dim_);
    Eigen::VectorXd out(size());
    std::vector<double> vx(degree_ + 1), vy(degree_ + 1, 1.0);
    legendre(degree_, p[0], vx.data());
    if (dim_ == 1) {
      for (int i = 0; i <= degree_; ++i) out[i] = vx[i];
      return out;
    }
    legendre(degree_, p[1], vy.data());
    for (int i = 0; i <= degree_; ++i)
      for (int j = 0; j <= degree_; ++j) out[i * (degree_ + 1) + j] = vx[i] * vy[j];
    return out;
  }

  /// Reference gradients, one row per basis function.
  Eigen::MatrixXd gradients(const Point& p) const {
    detail::check_reference_point(p, dim_);
    Eigen::MatrixXd out(size(), dim_);
    std::vector<double> vx(degree_ + 1), dx(degree_ + 1), vy(degree_ + 1), dy(degree_ + 1);
    legendre(degree_, p[0], vx.data(), dx.data());
    if (dim_ == 1) {
      for (int i = 0; i <= degree_; ++i) out(i, 0) = dx[i];
      return out;
    }
    legendre(degree_, p[1], vy.data(), dy.data());
    for (int i = 0; i <= degree_; ++i) {
      for (int j = 0; j <= degree_; ++j) {
        out(i * (degree_ + 1) + j, 0) = dx[i] * vy[j];
        out(i * (degree_ + 1) + j, 1) = vx[i] * dy[j];
      }
    }
    return out;
  }

 private:
  int degree_;
  int dim_;
};

/// Orthonormal Legendre basis of the face space (degree k in the face
/// coordinate); in 1D a face is a point and the space is the constants.
class FaceBasis {
 public:
  FaceBasis(int degree, int dim) : degree_(degree), dim_(dim) {
    if (degree < 0) throw std::invalid_argument("FaceBasis: degree must be >= 0");
  }
  int size() const { return dim_ == 1 ? 1 : degree_ + 1; }
  Eigen::VectorXd values(double s) const {
    Eigen::VectorXd out(size());
    if (dim_ == 1) {
      out[0] = 1.0;
      return out;
    }
    if (!(s >= -1e-12 && s <= 1.0 + 1e-12)) throw std::domain_error("FaceBasis: point outside the face");
    legendre(degree_, s, out.data());
    return out;
  }

 private:
  int degree_;
  int dim_;
};

/// Raviart-Thomas space of index k on the reference cell:
/// P_{k+1} in 1D, Q_{k+1,k} x Q_{k,k+1} in 2D.
///
/// The first block of functions has only an x-component, L_i(x)L_j(y) with
/// i <= k+1, j <= k (index i*(k+1)+j); the second block only a y-component,
/// L_i(x)L_j(y) with i <= k, j <= k+1 (index i*(k+2)+j).
class RTBasis {
 public:
  RTBasis(int degree, int dim) : degree_(degree), dim_(dim) {
    if (degree < 0) throw std::invalid_argument("RTBasis: degree must be >= 0");
    if (dim < 1 || dim > 2) throw std::invalid_argument("RTBasis: dimension must be 1 or 2");
  }

  int degree() const { return degree_; }
  int dim() const { return dim_; }
  int block_size() const { return (degree_ + 1) * (degree_ + 2); }
  int size() const { return dim_ == 1 ? degree_ + 2 : 2 * block_size(); }

  /// Reference values, one row (d components) per basis function.
  Eigen::MatrixXd values(const Point& p) const {
    Eigen::MatrixXd out;
    Eigen::VectorXd unused;
    evaluate(p, out, unused);
    return out;
  }

  /// Reference divergence of each basis function.
  Eigen::VectorXd divergence(const Point& p) const {
    Eigen::MatrixXd unused;
    Eigen::VectorXd div;
    evaluate(p, unused, div);
    return div;
  }

  /// Physical divergence on a box with the given extents (affine, diagonal map).
  Eigen::VectorXd divergence(const Point& p, const Point& extent) const {
    Eigen::MatrixXd unused;
    Eigen::VectorXd div;
    evaluate(p, unused, div, extent);
    return div;
  }

  void evaluate(const Point& p, Eigen::MatrixXd& vals, Eigen::VectorXd& div,
                const Point& extent = {1.0, 1.0}) const {
    detail::check_reference_point(p, dim_);
    const int k = degree_;
    vals.setZero(size(), dim_);
    div.setZero(size());
    std::vector<double> vx(k + 2), dx(k + 2), vy(k + 2), dy(k + 2);
    legendre(k + 1, p[0], vx.data(), dx.data());
    if (dim_ == 1) {
      for (int i = 0; i <= k + 1; ++i) {
        vals(i, 0) = vx[i];
        div[i] = dx[i] / extent[0];
      }
      return;
    }
    legendre(k + 1, p[1], vy.data(), dy.data());
    const int offset = block_size();
    for (int i = 0; i <= k + 1; ++i) {
      for (int j = 0; j <= k; ++j) {
        const int idx = i * (k + 1) + j;
        vals(idx, 0) = vx[i] * vy[j];
        div[idx] = dx[i] * vy[j] / extent[0];
      }
    }
    for (int i = 0; i <= k; ++i) {
      for (int j = 0; j <= k + 1; ++j) {
        const int idx = offset + i * (k + 2) + j;
        vals(idx, 1) = vx[i] * vy[j];
        div[idx] = vx[i] * dy[j] / extent[1];
      }
    }
  }

 private:
  int degree_;
  int dim_;
};

}  // namespace whdg
