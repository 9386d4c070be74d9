#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "whdg/hdg.hpp"
#include "whdg/local.hpp"
#include "whdg/mesh.hpp"
#include "whdg/polyspace.hpp"
#include "whdg/problem.hpp"
#include "whdg/quadrature.hpp"

namespace whdg {

enum class Provenance { L2Min, FluxRecon, LocalResolve, TraceLinear };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::L2Min: return "L2Min";
    case Provenance::FluxRecon: return "FluxRecon";
    case Provenance::LocalResolve: return "LocalResolve";
    case Provenance::TraceLinear: return "TraceLinear";
  }
  return "?";
}

class PostprocessError : public std::runtime_error {
 public:
  PostprocessError(const std::string& what, int cell, double condition)
      : std::runtime_error(what), cell(cell), condition(condition) {}
  int cell;
  double condition;
};

/// Per-cell coefficients of a postprocessed field: degree-(k+1) tensor basis
/// for scalar fields, RT_k for the reconstructed flux.
struct PostField {
  Provenance tag = Provenance::L2Min;
  int dim = 1;
  int degree = 1;  // polynomial degree (scalar) or RT index (flux)
  std::vector<Eigen::VectorXd> coeffs;

  bool is_flux() const { return tag == Provenance::FluxRecon; }

  double value(int c, const Point& ref) const { return TensorBasis(degree, dim).values(ref).dot(coeffs[c]); }

  Point vector(int c, const Point& ref) const {
    const Eigen::MatrixXd v = RTBasis(degree, dim).values(ref);
    const Eigen::VectorXd w = v.transpose() * coeffs[c];
    Point out{0.0, 0.0};
    for (int a = 0; a < dim; ++a) out[a] = w[a];
    return out;
  }

  double divergence(const Mesh& mesh, int c, const Point& ref) const {
    return RTBasis(degree, dim).divergence(ref, mesh.cell(c).extent).dot(coeffs[c]);
  }
};

namespace detail {
inline Point to_reference(const Cell& cell, const Point& x, int dim) {
  Point r{0.0, 0.0};
  for (int a = 0; a < dim; ++a) r[a] = std::clamp((x[a] - cell.lower[a]) / cell.extent[a], 0.0, 1.0);
  return r;
}
}  // namespace detail

/// U*: degree k+1 with (alpha grad U*, grad W) = (beta U - J, grad W) and the
/// cell mean of U.
inline Eigen::VectorXd l2min_postprocess(const Mesh& mesh, int c, const Solution& sol, const ProblemSpec& spec) {
  const int d = mesh.dim();
  const Cell& cell = mesh.cell(c);
  const int k = sol.degree;
  const TensorBasis basis(k + 1, d);
  const TensorBasis low(k, d);
  const int N = basis.size();
  const int n = low.size();
  const Point beta = spec.drift.at(c);

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N + 1, N + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + 1);
  const QuadratureRule rule = plain_cell_rule(cell, d, k + 3);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const Point& ref = rule.reference[q];
    Eigen::MatrixXd grad = basis.gradients(ref);
    for (int a = 0; a < d; ++a) grad.col(a) /= cell.extent[a];
    const Eigen::VectorXd phi = basis.values(ref);
    const Eigen::VectorXd plo = low.values(ref);
    const double u = plo.dot(sol.scalar[c]);
    const double w = rule.weights[q];
    for (int a = 0; a < d; ++a) {
      const double target = beta[a] * u - plo.dot(sol.flux[c].segment(a * n, n));
      A.topLeftCorner(N, N) += w * spec.alpha * grad.col(a) * grad.col(a).transpose();
      rhs.head(N) += w * target * grad.col(a);
    }
    A.block(0, N, N, 1) += w * phi;
    A.block(N, 0, 1, N) += w * phi.transpose();
    rhs[N] += w * u;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw PostprocessError("l2min_postprocess: singular system on cell " + std::to_string(c), c, 1.0 / lu.rcond());
  return lu.solve(rhs).head(N);
}

/// Single-valued normal flux moments on local face `local` of cell `c`
/// (outward from c), sampled at face coordinate s.
inline double single_valued_flux(const Mesh& mesh, const Solution& sol, int c, int local, double s) {
  const int f = mesh.cell_face(c, local);
  const Face& face = mesh.face(f);
  const double own = sol.numerical_flux(mesh, c, local, s);
  if (face.is_boundary()) return own;
  const int other = face.cells[0] == c ? face.cells[1] : face.cells[0];
  const int other_local = local % 2 == 0 ? local + 1 : local - 1;
  return 0.5 * (own - sol.numerical_flux(mesh, other, other_local, s));
}

/// J_div in RT_k: normal moments against the degree-k face basis match the
/// numerical flux, interior moments against Q_{k-1,k} x Q_{k,k-1} match J.
inline Eigen::VectorXd rtn_project(const Mesh& mesh, int c, const Solution& sol) {
  const int d = mesh.dim();
  const int k = sol.degree;
  const Cell& cell = mesh.cell(c);
  const RTBasis rt(k, d);
  const int size = rt.size();
  const TensorBasis low(k, d);
  const int n = low.size();
  const FaceBasis fbasis(k, d);
  const int M = fbasis.size();

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(size, size);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);
  int row = 0;
  const Rule1D line = gauss_legendre(k + 2);
  for (int local = 0; local < 2 * d; ++local) {
    const int axis = Mesh::local_face_axis(local);
    const double sign = Mesh::outward_sign(local);
    const int npts = d == 1 ? 1 : static_cast<int>(line.nodes.size());
    for (int q = 0; q < npts; ++q) {
      const double s = d == 1 ? 0.0 : line.nodes[q];
      const double w = d == 1 ? 1.0 : line.weights[q];
      Point ref{0.5, 0.5};
      ref[axis] = local % 2 == 0 ? 0.0 : 1.0;
      if (d == 1) ref[1] = 0.0;
      else ref[1 - axis] = s;
      const Eigen::MatrixXd v = rt.values(ref);
      const Eigen::VectorXd psi = fbasis.values(s);
      const double flux = single_valued_flux(mesh, sol, c, local, s);
      for (int m = 0; m < M; ++m) {
        A.row(row + m) += w * psi[m] * sign * v.col(axis).transpose();
        rhs[row + m] += w * psi[m] * flux;
      }
    }
    row += M;
  }
  if (k >= 1) {
    // Interior tests: component a varies with degree k-1 along axis a, k across.
    const Rule1D r1 = gauss_legendre(k + 2);
    std::vector<double> lx(k + 1), ly(k + 1, 1.0);
    const int ny = d == 1 ? 1 : static_cast<int>(r1.nodes.size());
    for (std::size_t qx = 0; qx < r1.nodes.size(); ++qx) {
      for (int qy = 0; qy < ny; ++qy) {
        const Point ref{r1.nodes[qx], d == 1 ? 0.0 : r1.nodes[qy]};
        const double w = r1.weights[qx] * (d == 1 ? 1.0 : r1.weights[qy]);
        const Eigen::MatrixXd v = rt.values(ref);
        const Eigen::VectorXd plo = low.values(ref);
        legendre(k, ref[0], lx.data());
        if (d == 2) legendre(k, ref[1], ly.data());
        int r = row;
        for (int a = 0; a < d; ++a) {
          const double ja = plo.dot(sol.flux[c].segment(a * n, n));
          const int na = a == 0 ? k : k + 1;        // test degrees along x
          const int nb = d == 1 ? 1 : (a == 0 ? k + 1 : k);  // along y
          for (int i = 0; i < na; ++i) {
            for (int j = 0; j < nb; ++j) {
              const double test = lx[i] * (d == 1 ? 1.0 : ly[j]);
              A.row(r) += w * test * v.col(a).transpose();
              rhs[r] += w * test * ja;
              ++r;
            }
          }
        }
      }
    }
    row += d == 1 ? k : 2 * k * (k + 1);
  }
  if (row != size) throw std::logic_error("rtn_project: DOF count mismatch");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw PostprocessError("rtn_project: singular RT system on cell " + std::to_string(c), c, 1.0 / lu.rcond());
  (void)cell;
  return lu.solve(rhs);
}

/// U^*: degree k+1 local re-solve whose flux trace matches J_div.n, with
/// source div J_div and the cell mean of U. Returns the scalar coefficients.
inline Eigen::VectorXd local_hdg_postprocess(const Mesh& mesh, int c, const PostField& jdiv, const Solution& sol,
                                             const ProblemSpec& spec, const SolverConfig& config,
                                             const CellWeight& weight) {
  const int d = mesh.dim();
  const Cell& cell = mesh.cell(c);
  const int k1 = sol.degree + 1;
  const ScalarField source = [&](const Point& x) { return jdiv.divergence(mesh, c, detail::to_reference(cell, x, d)); };
  const LocalSystem loc = assemble_local_system(mesh, c, spec.alpha, spec.drift.at(c), weight, k1,
                                                local_taus(mesh, c, config), source, config.transmission,
                                                config.max_local_condition);
  const int nx = loc.unknowns();
  const int nt = loc.face_unknowns();
  const int N = loc.basis_size;
  const int M = loc.face_size;
  const int U = d * N;
  const int total = nx + nt + 1;

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(total, total);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(total);
  A.topLeftCorner(nx, nx) = loc.L;
  A.block(0, nx, nx, nt) = -loc.R;
  A(U, nx + nt) = 1.0;  // multiplier on the constant test of the balance equation
  rhs.head(nx) = loc.F;
  A.block(nx, 0, nt, nx) = loc.C;
  A.block(nx, nx, nt, nt) = loc.E;

  // Normal moments of J_div with the same face measure as C.
  const FaceBasis fbasis(k1, d);
  const CellWeight plain{{0.0, 0.0}, spec.alpha, cell.center(), 0.0};
  for (int local = 0; local < 2 * d; ++local) {
    const int axis = Mesh::local_face_axis(local);
    const double sign = Mesh::outward_sign(local);
    const QuadratureRule rule = face_rule(
        cell, d, local, config.transmission == TransmissionWeighting::Weighted ? weight : plain, k1 + 2);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point& ref = rule.reference[q];
      const double jn = sign * jdiv.vector(c, ref)[axis];
      rhs.segment(nx + local * M, M) += rule.weights[q] * jn * fbasis.values(d == 1 ? 0.0 : ref[1 - axis]);
    }
  }
  // Mean constraint: orthonormal basis, so only the constant mode carries the mean.
  A(nx + nt, U) = 1.0;
  rhs[nx + nt] = sol.scalar[c][0];

  // Equilibrate rows before the pivoted solve.
  for (int r = 0; r < total; ++r) {
    const double s = A.row(r).cwiseAbs().maxCoeff();
    if (s > 0.0) {
      A.row(r) /= s;
      rhs[r] /= s;
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  const double cond = lu.rcond() > 0.0 ? 1.0 / lu.rcond() : std::numeric_limits<double>::infinity();
  if (!lu.isInvertible() || cond > config.max_local_condition)
    throw PostprocessError("local_hdg_postprocess: singular augmented system on cell " + std::to_string(c) +
                               " (condition estimate " + std::to_string(cond) + ")",
                           c, cond);
  const Eigen::VectorXd x = lu.solve(rhs);
  return x.segment(U, N);
}

struct PostProcessed {
  PostField l2min;
  PostField flux;
  PostField resolve;
};

/// All three procedures on every cell.
inline PostProcessed postprocess(const Mesh& mesh, const ProblemSpec& spec, const SolverConfig& config,
                                 const Solution& sol) {
  const int d = mesh.dim();
  PostProcessed out;
  out.l2min = PostField{Provenance::L2Min, d, sol.degree + 1, {}};
  out.flux = PostField{Provenance::FluxRecon, d, sol.degree, {}};
  out.resolve = PostField{Provenance::LocalResolve, d, sol.degree + 1, {}};
  const int nc = mesh.num_cells();
  out.l2min.coeffs.resize(nc);
  out.flux.coeffs.resize(nc);
  out.resolve.coeffs.resize(nc);
  for (int c = 0; c < nc; ++c) {
    out.l2min.coeffs[c] = l2min_postprocess(mesh, c, sol, spec);
    out.flux.coeffs[c] = rtn_project(mesh, c, sol);
  }
  const std::vector<CellWeight> weights = cell_weights(mesh, spec, config);
  for (int c = 0; c < nc; ++c)
    out.resolve.coeffs[c] = local_hdg_postprocess(mesh, c, out.flux, sol, spec, config, weights[c]);
  return out;
}

/// Continuous piecewise-linear interpolant through (x, value) samples,
/// extended by constants beyond the first and last sample.
class PiecewiseLinear {
 public:
  PiecewiseLinear(std::vector<double> xs, std::vector<double> values) : xs_(std::move(xs)), vs_(std::move(values)) {
    if (xs_.size() != vs_.size()) throw std::invalid_argument("trace_linear_1d: size mismatch");
    if (xs_.size() < 2) throw std::invalid_argument("trace_linear_1d: need at least two samples");
    for (std::size_t i = 1; i < xs_.size(); ++i)
      if (!(xs_[i] > xs_[i - 1])) throw std::invalid_argument("trace_linear_1d: sample positions must increase");
  }

  double operator()(double x) const {
    if (x <= xs_.front()) return vs_.front();
    if (x >= xs_.back()) return vs_.back();
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
    const double t = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
    return (1.0 - t) * vs_[i - 1] + t * vs_[i];
  }

  const std::vector<double>& nodes() const { return xs_; }
  const std::vector<double>& values() const { return vs_; }

 private:
  std::vector<double> xs_;
  std::vector<double> vs_;
};

inline PiecewiseLinear trace_linear_1d(std::vector<double> xs, std::vector<double> values) {
  return PiecewiseLinear(std::move(xs), std::move(values));
}

/// FVM variant: samples at the cell midpoints.
inline PiecewiseLinear trace_linear_midpoints(const Mesh& mesh, const std::vector<double>& cell_values) {
  if (mesh.dim() != 1) throw std::invalid_argument("trace_linear_1d: 1D meshes only");
  std::vector<double> xs(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) xs[c] = mesh.cell(c).center()[0];
  return PiecewiseLinear(std::move(xs), cell_values);
}

/// HDG variant: samples at the face positions with the Û values.
inline PiecewiseLinear trace_linear_faces(const Mesh& mesh, const Solution& sol) {
  if (mesh.dim() != 1) throw std::invalid_argument("trace_linear_1d: 1D meshes only");
  std::vector<double> xs(mesh.num_faces()), vs(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    xs[f] = mesh.face(f).position;
    vs[f] = sol.trace[f][0];
  }
  return PiecewiseLinear(std::move(xs), std::move(vs));
}

/// Same layout as the solution dump, with the provenance in the tag column.
inline void write_postfield_csv(std::ostream& os, const PostField& field, bool header = true) {
  if (header) os << "tag,kind,id,field,index,value\n";
  os << std::setprecision(16);
  const char* name = field.is_flux() ? "Jdiv" : "U";
  for (std::size_t c = 0; c < field.coeffs.size(); ++c)
    for (int i = 0; i < field.coeffs[c].size(); ++i)
      os << to_string(field.tag) << ",cell," << c << ',' << name << ',' << i << ',' << field.coeffs[c][i] << '\n';
}

}  // namespace whdg
