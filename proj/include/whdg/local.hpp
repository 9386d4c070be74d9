#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "whdg/mesh.hpp"
#include "whdg/polyspace.hpp"
#include "whdg/problem.hpp"
#include "whdg/quadrature.hpp"

namespace whdg {

class LocalSolveError : public std::runtime_error {
 public:
  LocalSolveError(const std::string& what, int cell, double condition)
      : std::runtime_error(what), cell(cell), condition(condition) {}
  int cell;
  double condition;
};

/// Dense blocks of the weighted local problem on one cell.
///
/// Unknowns x = (J_0, .., J_{d-1}, U), each block of `basis_size` coefficients.
/// Face data Lambda stacks the local faces in local order, `face_size`
/// coefficients each. The local problem reads  L x = R Lambda + F  and the
/// moments of the outward numerical flux against the face basis are
/// C x + E Lambda.
struct LocalSystem {
  int cell = -1;
  int dim = 1;
  int degree = 0;
  int basis_size = 1;
  int face_size = 1;
  CellWeight weight;
  std::array<double, 4> tau{1.0, 1.0, 1.0, 1.0};

  Eigen::MatrixXd L, R, C, E;
  Eigen::VectorXd F;
  Eigen::VectorXd row_scale;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;  // of diag(row_scale) L
  double condition = 1.0;

  int unknowns() const { return (dim + 1) * basis_size; }
  int face_unknowns() const { return 2 * dim * face_size; }

  /// (J, U) for the given face data; the source term is included when requested.
  Eigen::VectorXd solve(const Eigen::VectorXd& trace, bool with_source = true) const {
    Eigen::VectorXd rhs = R * trace;
    if (with_source) rhs += F;
    return lu.solve(row_scale.asDiagonal() * rhs);
  }

  Eigen::MatrixXd solve_matrix(const Eigen::MatrixXd& rhs) const { return lu.solve(row_scale.asDiagonal() * rhs); }

  Eigen::VectorXd flux_moments(const Eigen::VectorXd& x, const Eigen::VectorXd& trace) const {
    return C * x + E * trace;
  }
};

/// Low-level assembly with explicit weight and source. The weight drift plays
/// the role of gamma: gamma = beta gives the weighted scheme, gamma = 0 (mu = 1)
/// the standard one.
inline LocalSystem assemble_local_system(const Mesh& mesh, int c, double alpha, const Point& beta,
                                         const CellWeight& weight, int degree, const std::array<double, 4>& tau,
                                         const ScalarField& source, TransmissionWeighting transmission,
                                         double max_condition = 1e14) {
  const int d = mesh.dim();
  const Cell& cell = mesh.cell(c);
  const TensorBasis basis(degree, d);
  const FaceBasis fbasis(degree, d);
  const int N = basis.size();
  const int M = fbasis.size();
  const int nfaces = 2 * d;

  LocalSystem sys;
  sys.cell = c;
  sys.dim = d;
  sys.degree = degree;
  sys.basis_size = N;
  sys.face_size = M;
  sys.weight = weight;
  sys.tau = tau;

  const int n = (d + 1) * N;
  const int U = d * N;
  sys.L.setZero(n, n);
  sys.R.setZero(n, nfaces * M);
  sys.C.setZero(nfaces * M, n);
  sys.E.setZero(nfaces * M, nfaces * M);
  sys.F.setZero(n);

  const Point& gamma = weight.drift;
  const int points = degree + 2;

  // Volume terms.
  const QuadratureRule vol = cell_rule(cell, d, weight, points);
  for (std::size_t q = 0; q < vol.size(); ++q) {
    const Eigen::VectorXd phi = basis.values(vol.reference[q]);
    Eigen::MatrixXd grad = basis.gradients(vol.reference[q]);
    for (int a = 0; a < d; ++a) grad.col(a) /= cell.extent[a];
    const double w = vol.weights[q];
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        const double mass = w * phi[j] * phi[i];
        for (int a = 0; a < d; ++a) {
          sys.L(a * N + i, a * N + j) += mass;
          sys.L(a * N + i, U + j) += -alpha * w * phi[j] * grad(i, a) + (gamma[a] - beta[a]) * mass;
          sys.L(U + i, a * N + j) += -w * phi[j] * grad(i, a) + (gamma[a] / alpha) * mass;
        }
      }
    }
  }

  // Source with one extra point per axis.
  if (source) {
    const QuadratureRule rhs = cell_rule(cell, d, weight, degree + 3);
    for (std::size_t q = 0; q < rhs.size(); ++q) {
      const Eigen::VectorXd phi = basis.values(rhs.reference[q]);
      sys.F.segment(U, N) += rhs.weights[q] * source(rhs.points[q]) * phi;
    }
  }

  // Face terms.
  for (int local = 0; local < nfaces; ++local) {
    const int axis = Mesh::local_face_axis(local);
    const double s = Mesh::outward_sign(local);
    const double t = tau[local];
    const QuadratureRule face = face_rule(cell, d, local, weight, points);
    const CellWeight plain{{0.0, 0.0}, alpha, cell.center(), 0.0};
    const QuadratureRule moment =
        transmission == TransmissionWeighting::Weighted ? face : face_rule(cell, d, local, plain, points);
    const int off = local * M;
    for (std::size_t q = 0; q < face.size(); ++q) {
      const Eigen::VectorXd phi = basis.values(face.reference[q]);
      const Eigen::VectorXd psi = fbasis.values(d == 1 ? 0.0 : face.reference[q][1 - axis]);
      const double w = face.weights[q];
      for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
          sys.L(U + i, axis * N + j) += s * w * phi[j] * phi[i];
          sys.L(U + i, U + j) += t * w * phi[j] * phi[i];
        }
        for (int m = 0; m < M; ++m) {
          sys.R(axis * N + i, off + m) += -alpha * s * w * psi[m] * phi[i];
          sys.R(U + i, off + m) += t * w * psi[m] * phi[i];
        }
      }
    }
    for (std::size_t q = 0; q < moment.size(); ++q) {
      const Eigen::VectorXd phi = basis.values(moment.reference[q]);
      const Eigen::VectorXd psi = fbasis.values(d == 1 ? 0.0 : moment.reference[q][1 - axis]);
      const double w = moment.weights[q];
      for (int m = 0; m < M; ++m) {
        for (int j = 0; j < N; ++j) {
          sys.C(off + m, axis * N + j) += s * w * phi[j] * psi[m];
          sys.C(off + m, U + j) += t * w * phi[j] * psi[m];
        }
        for (int mm = 0; mm < M; ++mm) sys.E(off + m, off + mm) += -t * w * psi[mm] * psi[m];
      }
    }
  }

  // Row equilibration keeps the weighted rows comparable before factorizing.
  sys.row_scale.resize(n);
  for (int r = 0; r < n; ++r) {
    const double norm = sys.L.row(r).cwiseAbs().maxCoeff();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw LocalSolveError("local problem on cell " + std::to_string(c) + " has a degenerate row", c,
                            std::numeric_limits<double>::infinity());
    sys.row_scale[r] = 1.0 / norm;
  }
  sys.lu.compute(sys.row_scale.asDiagonal() * sys.L);
  const double rcond = sys.lu.rcond();
  sys.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(sys.condition <= max_condition))
    throw LocalSolveError("local problem on cell " + std::to_string(c) + " is ill-conditioned (condition estimate " +
                              std::to_string(sys.condition) + ")",
                          c, sys.condition);
  return sys;
}

inline std::array<double, 4> local_taus(const Mesh& mesh, int c, const SolverConfig& config) {
  std::array<double, 4> tau{0.0, 0.0, 0.0, 0.0};
  for (int local = 0; local < mesh.faces_per_cell(); ++local) tau[local] = config.tau_on(mesh.cell_face(c, local));
  return tau;
}

/// Local system of cell `c` for the configured method.
inline LocalSystem assemble_local(const Mesh& mesh, int c, const ProblemSpec& spec, const SolverConfig& config,
                                  const CellWeight& weight) {
  return assemble_local_system(mesh, c, spec.alpha, spec.drift.at(c), weight, config.degree,
                               local_taus(mesh, c, config), spec.source, config.transmission,
                               config.max_local_condition);
}

inline LocalSystem assemble_local(const Mesh& mesh, int c, const ProblemSpec& spec, const SolverConfig& config) {
  spec.validate(mesh);
  config.validate(mesh);
  return assemble_local(mesh, c, spec, config, cell_weights(mesh, spec, config).at(c));
}

/// Coefficients of the L^2(e) projection of g onto the face basis.
inline Eigen::VectorXd dirichlet_project(const Mesh& mesh, int f, int degree, const ScalarField& g) {
  const Face& face = mesh.face(f);
  const int d = mesh.dim();
  const FaceBasis fbasis(degree, d);
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(fbasis.size());
  if (d == 1) {
    coeffs[0] = g ? g(face.center(1)) : 0.0;
    return coeffs;
  }
  if (!g) return coeffs;
  // Orthonormal face basis: the projection is a plain moment divided by |e|.
  const Rule1D line = gauss_legendre(std::max(degree + 4, 6));
  const int t = face.tangent_axis();
  for (std::size_t q = 0; q < line.nodes.size(); ++q) {
    Point x{0.0, 0.0};
    x[face.axis] = face.position;
    x[t] = face.tangent_lower + line.nodes[q] * face.tangent_extent;
    coeffs += line.weights[q] * g(x) * fbasis.values(line.nodes[q]);
  }
  return coeffs;
}

}  // namespace whdg
