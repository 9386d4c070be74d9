#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "whdg/mesh.hpp"
#include "whdg/problem.hpp"
#include "whdg/quadrature.hpp"

namespace whdg {

/// B(t) = t / (e^t - 1), B(0) = 1.
inline double bernoulli(double t) {
  if (std::abs(t) < 1e-4) {
    const double t2 = t * t;
    return 1.0 - 0.5 * t + t2 / 12.0 - t2 * t2 / 720.0;
  }
  if (t < -500.0) return -t;
  if (t > 500.0) return t * std::exp(-t);
  return t / std::expm1(t);
}

/// Two-point SG flux on [x_{i-1}, x_i] for  j = beta u - alpha u'.
inline double sg_flux(double alpha, double beta, double h, double left, double right) {
  const double t = beta * h / alpha;
  return alpha / h * (bernoulli(-t) * left - bernoulli(t) * right);
}

/// Tridiagonal system over the interior nodes 1..N-1. Row i is the flux
/// balance J_i - J_{i+1} = rhs_i written in the nodal values.
struct SGSystem {
  std::vector<double> nodes;
  std::vector<double> beta;  // per cell
  double alpha = 1.0;
  double left = 0.0, right = 0.0;  // Dirichlet values at the end nodes
  std::vector<double> lower, diag, upper, rhs;

  int size() const { return static_cast<int>(diag.size()); }
};

struct FVSolution {
  std::vector<double> nodes;
  std::vector<double> values;  // Lambda_0..Lambda_N
  std::vector<double> fluxes;  // J_1..J_N, one per cell
};

/// Assemble the SG scheme on a 1D mesh with Dirichlet data at both ends.
inline SGSystem assemble_sg(const Mesh& mesh, double alpha, const std::vector<double>& beta, const ScalarField& f,
                            const ScalarField& g_dirichlet) {
  if (mesh.dim() != 1) throw std::invalid_argument("assemble_sg: 1D meshes only");
  if (!(alpha > 0.0)) throw std::invalid_argument("assemble_sg: alpha must be positive");
  if (static_cast<int>(beta.size()) != mesh.num_cells()) throw std::invalid_argument("assemble_sg: one beta per cell");
  for (const Face& face : mesh.faces())
    if (face.is_boundary() && face.label != BoundaryLabel::Dirichlet)
      throw std::invalid_argument("assemble_sg: both end points must be Dirichlet");

  SGSystem sys;
  sys.nodes = mesh.breakpoints()[0];
  sys.beta = beta;
  sys.alpha = alpha;
  const int N = mesh.num_cells();
  sys.left = g_dirichlet ? g_dirichlet({sys.nodes.front(), 0.0}) : 0.0;
  sys.right = g_dirichlet ? g_dirichlet({sys.nodes.back(), 0.0}) : 0.0;

  // Per-cell source contribution F_i / (e_i + e_{-i}) with F_i = (f, 1)_{mu_i}.
  std::vector<double> src(N, 0.0);
  if (f) {
    for (int i = 0; i < N; ++i) {
      const Cell& cell = mesh.cell(i);
      const CellWeight w{{beta[i], 0.0}, alpha, cell.center(), 0.0};
      const QuadratureRule rule = cell_rule(cell, 1, w, 6);
      double F = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q) F += rule.weights[q] * f(rule.points[q]);
      const double half = 0.5 * beta[i] * cell.extent[0] / alpha;
      src[i] = F / (2.0 * std::cosh(half));
    }
  }

  const int n = N - 1;
  sys.lower.assign(n, 0.0);
  sys.diag.assign(n, 0.0);
  sys.upper.assign(n, 0.0);
  sys.rhs.assign(n, 0.0);
  for (int r = 0; r < n; ++r) {
    // Node r+1 sits between cells r and r+1.
    const double hl = sys.nodes[r + 1] - sys.nodes[r];
    const double hr = sys.nodes[r + 2] - sys.nodes[r + 1];
    const double tl = beta[r] * hl / alpha;
    const double tr = beta[r + 1] * hr / alpha;
    sys.lower[r] = alpha / hl * bernoulli(-tl);
    sys.diag[r] = -(alpha / hl * bernoulli(tl) + alpha / hr * bernoulli(-tr));
    sys.upper[r] = alpha / hr * bernoulli(tr);
    sys.rhs[r] = -(src[r] + src[r + 1]);
  }
  if (n > 0) {
    sys.rhs[0] -= sys.lower[0] * sys.left;
    sys.rhs[n - 1] -= sys.upper[n - 1] * sys.right;
  }
  return sys;
}

inline SGSystem assemble_sg(const Mesh& mesh, const ProblemSpec& spec) {
  std::vector<double> beta(mesh.num_cells());
  for (int i = 0; i < mesh.num_cells(); ++i) beta[i] = spec.drift.at(i)[0];
  return assemble_sg(mesh, spec.alpha, beta, spec.source, spec.dirichlet);
}

/// Thomas algorithm; the SG sign pattern makes it safe without pivoting.
inline FVSolution solve_sg(const SGSystem& sys) {
  const int n = sys.size();
  std::vector<double> c(n), d(n);
  for (int i = 0; i < n; ++i) {
    const double denom = sys.diag[i] - (i > 0 ? sys.lower[i] * c[i - 1] : 0.0);
    if (!(std::abs(denom) > 0.0) || !std::isfinite(denom))
      throw std::runtime_error("solve_sg: singular tridiagonal system at row " + std::to_string(i));
    c[i] = sys.upper[i] / denom;
    d[i] = (sys.rhs[i] - (i > 0 ? sys.lower[i] * d[i - 1] : 0.0)) / denom;
  }
  FVSolution sol;
  sol.nodes = sys.nodes;
  sol.values.assign(n + 2, 0.0);
  sol.values.front() = sys.left;
  sol.values.back() = sys.right;
  for (int i = n - 1; i >= 0; --i) sol.values[i + 1] = d[i] - (i + 1 < n ? c[i] * sol.values[i + 2] : 0.0);
  const int cells = n + 1;
  sol.fluxes.resize(cells);
  for (int i = 0; i < cells; ++i)
    sol.fluxes[i] = sg_flux(sys.alpha, sys.beta[i], sys.nodes[i + 1] - sys.nodes[i], sol.values[i], sol.values[i + 1]);
  return sol;
}

}  // namespace whdg
