#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "whdg/mesh.hpp"

namespace whdg {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One-dimensional rule on (0,1).
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
  double exponent = 0.0;  // b of the weight exp(-b (x - 1/2)); 0 for plain rules
  int exact_degree = 0;
};

enum class RuleKind { Plain, Weighted };

/// Tensor rule on a cell or face. `reference` holds coordinates in the
/// owning cell's reference box; `weights` already include the Jacobian and,
/// for weighted rules, the exponential weight.
struct QuadratureRule {
  int dim = 1;
  std::vector<Point> reference;
  std::vector<Point> points;
  std::vector<double> weights;
  RuleKind kind = RuleKind::Plain;
  Point exponents{0.0, 0.0};
  int exact_degree = 0;

  std::size_t size() const { return weights.size(); }
};

/// n-point Gauss-Legendre rule on (0,1), 1 <= n <= 20.
inline Rule1D gauss_legendre(int n) {
  if (n < 1 || n > 20) throw std::invalid_argument("gauss_legendre: point count must be in [1, 20]");
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  rule.exact_degree = 2 * n - 1;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton on P_n from the Chebyshev-like initial guess; roots ordered descending in t.
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 1 ? t : p1;
      const double pn1 = n == 1 ? 1.0 : p0;
      dp = n * (t * pn - pn1) / (t * t - 1.0);
      const double step = pn / dp;
      t -= step;
      if (std::abs(step) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 1 ? t : p1;
      const double pn1 = n == 1 ? 1.0 : p0;
      dp = n * (t * pn - pn1) / (t * t - 1.0);
    }
    const double w = 1.0 / ((1.0 - t * t) * dp * dp);  // half of the (-1,1) weight
    rule.nodes[i] = 0.5 * (1.0 - t);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + t);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.5;
  return rule;
}

/// m_n(b) = \int_0^1 x^n exp(-b (x - 1/2)) dx.
///
/// Uses the recurrence m_n = (n m_{n-1} - e^{-b/2}) / b upwards when |b| >= n
/// and downwards (Miller) otherwise, which keeps both branches stable; the
/// downward branch covers |b| < 1e-3 as well. m_0 uses a series for small |b|.
inline double analytic_moment(int n, double b) {
  if (n < 0) throw std::invalid_argument("analytic_moment: degree must be >= 0");
  const double ab = std::abs(b);
  double m0;
  if (ab < 1e-3) {
    const double b2 = b * b;
    m0 = 1.0 + b2 / 24.0 + b2 * b2 / 1920.0 + b2 * b2 * b2 / 322560.0;
  } else {
    m0 = 2.0 * std::sinh(0.5 * b) / b;
  }
  if (n == 0) return m0;
  const double tail = std::exp(-0.5 * b);
  if (ab >= n) {
    double m = m0;
    for (int j = 1; j <= n; ++j) m = (j * m - tail) / b;
    return m;
  }
  const int top = n + 60;
  double m = tail / (top + 1.0);
  for (int j = top; j > n; --j) m = (b * m + tail) / j;
  return m;
}

namespace detail {

/// Discretised inner product for the weight exp(-b (x - 1/2) - shift):
/// composite Gauss-Legendre with 20-point panels of width <= 4/|b|.
inline void weighted_samples(double b, double shift, std::vector<double>& x, std::vector<double>& w) {
  static const Rule1D panel = gauss_legendre(20);
  const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(b) / 4.0)));
  x.clear();
  w.clear();
  for (int p = 0; p < panels; ++p) {
    const double a = static_cast<double>(p) / panels;
    const double h = 1.0 / panels;
    for (std::size_t q = 0; q < panel.nodes.size(); ++q) {
      const double xq = a + h * panel.nodes[q];
      x.push_back(xq);
      w.push_back(h * panel.weights[q] * std::exp(-b * (xq - 0.5) - shift));
    }
  }
}

}  // namespace detail

/// n-point Gauss rule on (0,1) for the weight exp(-b (x - 1/2)),
/// 1 <= n <= 12 and |b| <= 200.
///
/// Recurrence coefficients come from the discretised Stieltjes procedure;
/// nodes are the eigenvalues of the Jacobi matrix and weights are evaluated
/// with the Christoffel function, which keeps tiny weights relatively exact.
/// For |b| > 50 the factor e^{|b|/2} is removed during the inner products and
/// re-applied to the weights.
inline Rule1D weighted_gauss(double b, int n) {
  if (n < 1 || n > 12) throw std::invalid_argument("weighted_gauss: point count must be in [1, 12]");
  if (!(std::abs(b) <= 200.0)) throw std::invalid_argument("weighted_gauss: |b| must be <= 200");
  if (b == 0.0) {
    Rule1D plain = gauss_legendre(n);
    return plain;
  }

  const double shift = std::abs(b) > 50.0 ? 0.5 * std::abs(b) : 0.0;
  std::vector<double> xs, ws;
  detail::weighted_samples(b, shift, xs, ws);
  const std::size_t m = xs.size();

  // Orthonormal Stieltjes (Lanczos form).
  Eigen::VectorXd diag(n), offdiag(std::max(n - 1, 1));
  std::vector<double> q_prev(m, 0.0), q(m), r(m);
  double mass = 0.0;
  for (std::size_t i = 0; i < m; ++i) mass += ws[i];
  for (std::size_t i = 0; i < m; ++i) q[i] = 1.0 / std::sqrt(mass);
  double beta_prev = 0.0;
  for (int j = 0; j < n; ++j) {
    double a = 0.0;
    for (std::size_t i = 0; i < m; ++i) a += ws[i] * xs[i] * q[i] * q[i];
    diag[j] = a;
    if (j == n - 1) break;
    double norm2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      r[i] = (xs[i] - a) * q[i] - beta_prev * q_prev[i];
      norm2 += ws[i] * r[i] * r[i];
    }
    const double beta = std::sqrt(norm2);
    if (!(beta > 1e-300) || !std::isfinite(beta))
      throw QuadratureError("weighted_gauss: Jacobi matrix lost positivity (b=" + std::to_string(b) +
                            ", n=" + std::to_string(n) + ")");
    offdiag[j] = beta;
    for (std::size_t i = 0; i < m; ++i) {
      q_prev[i] = q[i];
      q[i] = r[i] / beta;
    }
    beta_prev = beta;
  }

  Eigen::VectorXd nodes;
  if (n == 1) {
    nodes = diag;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    eig.computeFromTridiagonal(diag, offdiag.head(n - 1), Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw QuadratureError("weighted_gauss: Jacobi eigenproblem failed");
    nodes = eig.eigenvalues();
  }

  Rule1D rule;
  rule.exponent = b;
  rule.exact_degree = 2 * n - 1;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double scale = std::exp(shift);
  for (int i = 0; i < n; ++i) {
    const double x = nodes[i];
    // Christoffel function: 1 / sum_j p_j(x)^2 with orthonormal p_j.
    double p_prev = 0.0, p = 1.0 / std::sqrt(mass), sum = p * p;
    for (int j = 0; j + 1 < n; ++j) {
      const double next = ((x - diag[j]) * p - (j > 0 ? offdiag[j - 1] : 0.0) * p_prev) / offdiag[j];
      p_prev = p;
      p = next;
      sum += p * p;
    }
    rule.nodes[i] = x;
    rule.weights[i] = scale / sum;
  }
  for (int i = 0; i < n; ++i) {
    const bool inside = rule.nodes[i] > 0.0 && rule.nodes[i] < 1.0;
    const bool ordered = i == 0 || rule.nodes[i] > rule.nodes[i - 1];
    if (!inside || !ordered || !(rule.weights[i] > 0.0) || !std::isfinite(rule.weights[i]))
      throw QuadratureError("weighted_gauss: ill-conditioned rule (b=" + std::to_string(b) +
                            ", n=" + std::to_string(n) + ")");
  }
  return rule;
}

/// Drift and diffusion data that define the exponential weight
/// mu(x) = exp(-drift.(x - center)/alpha + log_scale) on one cell.
struct CellWeight {
  Point drift{0.0, 0.0};
  double alpha = 1.0;
  Point center{0.0, 0.0};
  double log_scale = 0.0;

  double operator()(const Point& x) const {
    return std::exp(-(drift[0] * (x[0] - center[0]) + drift[1] * (x[1] - center[1])) / alpha + log_scale);
  }
  bool trivial() const { return drift[0] == 0.0 && drift[1] == 0.0 && log_scale == 0.0; }
};

/// Tensor rule on `cell` integrating mu(x) p(x) exactly for per-axis degree
/// <= 2n-1. Per-axis exponents are b = drift_axis * h_axis / alpha.
inline QuadratureRule cell_rule(const Cell& cell, int dim, const CellWeight& weight, int n) {
  if (!(weight.alpha > 0.0)) throw std::invalid_argument("cell_rule: alpha must be positive");
  QuadratureRule rule;
  rule.dim = dim;
  rule.kind = weight.trivial() ? RuleKind::Plain : RuleKind::Weighted;
  std::vector<Rule1D> axes;
  for (int a = 0; a < dim; ++a) {
    const double b = weight.drift[a] * cell.extent[a] / weight.alpha;
    rule.exponents[a] = b;
    axes.push_back(b == 0.0 ? gauss_legendre(n) : weighted_gauss(b, n));
  }
  rule.exact_degree = 2 * n - 1;
  const double factor = std::exp(weight.log_scale);
  const Point ctr = cell.center();
  const double shift = -(weight.drift[0] * (ctr[0] - weight.center[0]) +
                         weight.drift[1] * (ctr[1] - weight.center[1])) / weight.alpha;
  const double offset = std::exp(shift) * factor;
  if (dim == 1) {
    for (int i = 0; i < n; ++i) {
      const Point ref{axes[0].nodes[i], 0.0};
      rule.reference.push_back(ref);
      rule.points.push_back(cell.map(ref));
      rule.weights.push_back(offset * cell.extent[0] * axes[0].weights[i]);
    }
    return rule;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Point ref{axes[0].nodes[i], axes[1].nodes[j]};
      rule.reference.push_back(ref);
      rule.points.push_back(cell.map(ref));
      rule.weights.push_back(offset * cell.extent[0] * cell.extent[1] * axes[0].weights[i] *
                             axes[1].weights[j]);
    }
  }
  return rule;
}

/// Rule on local face `local` of `cell`: the (d-1)-dimensional weighted rule
/// in the tangential direction times mu at the face center. Reference points
/// are expressed in the cell's reference box; in 1D the face is a single
/// point with unit measure.
inline QuadratureRule face_rule(const Cell& cell, int dim, int local, const CellWeight& weight, int n) {
  QuadratureRule rule;
  rule.dim = dim;
  rule.kind = weight.trivial() ? RuleKind::Plain : RuleKind::Weighted;
  const int axis = Mesh::local_face_axis(local);
  const double side = local % 2 == 0 ? 0.0 : 1.0;
  Point ref_center{0.5, 0.5};
  ref_center[axis] = side;
  if (dim == 1) ref_center[1] = 0.0;
  const Point face_center = cell.map(ref_center);
  const double mu_center = weight(face_center);
  if (dim == 1) {
    rule.reference.push_back(ref_center);
    rule.points.push_back(face_center);
    rule.weights.push_back(mu_center);
    rule.exact_degree = 1000;
    return rule;
  }
  const int t = 1 - axis;
  const double b = weight.drift[t] * cell.extent[t] / weight.alpha;
  rule.exponents[t] = b;
  const Rule1D line = b == 0.0 ? gauss_legendre(n) : weighted_gauss(b, n);
  rule.exact_degree = 2 * n - 1;
  for (int i = 0; i < n; ++i) {
    Point ref = ref_center;
    ref[t] = line.nodes[i];
    rule.reference.push_back(ref);
    rule.points.push_back(cell.map(ref));
    rule.weights.push_back(mu_center * cell.extent[t] * line.weights[i]);
  }
  return rule;
}

/// Plain Gauss rule on a cell (mu = 1).
inline QuadratureRule plain_cell_rule(const Cell& cell, int dim, int n) {
  return cell_rule(cell, dim, CellWeight{}, n);
}

inline QuadratureRule plain_face_rule(const Cell& cell, int dim, int local, int n) {
  return face_rule(cell, dim, local, CellWeight{}, n);
}

}  // namespace whdg
