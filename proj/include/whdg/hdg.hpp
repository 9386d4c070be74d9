#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <chrono>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "whdg/local.hpp"
#include "whdg/mesh.hpp"
#include "whdg/polyspace.hpp"
#include "whdg/problem.hpp"

namespace whdg {

class TraceSolveError : public std::runtime_error {
 public:
  TraceSolveError(const std::string& what, double residual) : std::runtime_error(what), residual(residual) {}
  double residual;
};

/// Condensed system on the skeleton. Rows/columns enumerate the face basis on
/// every non-Dirichlet face, faces in mesh order.
///
/// The matrix is stored with the sign of a(.,.): it is minus the assembled
/// derivative of the flux jump, so its diagonal is positive.
struct TraceSystem {
  int face_size = 1;
  std::vector<int> offset;                 // per face, -1 on Dirichlet faces
  std::vector<Eigen::VectorXd> dirichlet;  // per face, projected g_D (empty elsewhere)
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
  std::vector<LocalSystem> locals;
  double max_local_condition = 0.0;

  int size() const { return static_cast<int>(rhs.size()); }

  /// Face data of cell `c` in local face order, drawing unknown faces from `trace`.
  Eigen::VectorXd gather(const Mesh& mesh, int c, const Eigen::VectorXd& trace) const {
    const int nf = mesh.faces_per_cell();
    Eigen::VectorXd out(nf * face_size);
    for (int local = 0; local < nf; ++local) {
      const int f = mesh.cell_face(c, local);
      out.segment(local * face_size, face_size) =
          offset[f] < 0 ? dirichlet[f] : Eigen::VectorXd(trace.segment(offset[f], face_size));
    }
    return out;
  }
};

/// Statically condense every cell onto the skeleton.
inline TraceSystem condense(const Mesh& mesh, const ProblemSpec& spec, const SolverConfig& config) {
  spec.validate(mesh);
  config.validate(mesh);
  const int d = mesh.dim();
  const int M = FaceBasis(config.degree, d).size();
  const int nf = mesh.faces_per_cell();

  TraceSystem sys;
  sys.face_size = M;
  sys.offset.assign(mesh.num_faces(), -1);
  sys.dirichlet.assign(mesh.num_faces(), Eigen::VectorXd());
  int next = 0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (mesh.face(f).label == BoundaryLabel::Dirichlet) {
      sys.dirichlet[f] = dirichlet_project(mesh, f, config.degree, spec.dirichlet);
    } else {
      sys.offset[f] = next;
      next += M;
    }
  }
  sys.rhs = Eigen::VectorXd::Zero(next);

  // Neumann data: <g_N, xi>_e with the domain's outward normal.
  if (spec.neumann) {
    const FaceBasis fbasis(config.degree, d);
    const Rule1D line = gauss_legendre(std::max(config.degree + 4, 6));
    for (int f = 0; f < mesh.num_faces(); ++f) {
      const Face& face = mesh.face(f);
      if (face.label != BoundaryLabel::Neumann) continue;
      Point normal{0.0, 0.0};
      normal[face.axis] = face.cells[1] < 0 ? 1.0 : -1.0;
      if (d == 1) {
        sys.rhs[sys.offset[f]] -= spec.g_neumann(face.center(1), normal);
        continue;
      }
      const int t = face.tangent_axis();
      for (std::size_t q = 0; q < line.nodes.size(); ++q) {
        Point x{0.0, 0.0};
        x[face.axis] = face.position;
        x[t] = face.tangent_lower + line.nodes[q] * face.tangent_extent;
        sys.rhs.segment(sys.offset[f], M) -=
            face.tangent_extent * line.weights[q] * spec.g_neumann(x, normal) * fbasis.values(line.nodes[q]);
      }
    }
  }

  const std::vector<CellWeight> weights = cell_weights(mesh, spec, config);
  std::vector<Eigen::Triplet<double>> triplets;
  sys.locals.reserve(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    LocalSystem local = assemble_local(mesh, c, spec, config, weights[c]);
    sys.max_local_condition = std::max(sys.max_local_condition, local.condition);
    const Eigen::MatrixXd S = local.C * local.solve_matrix(local.R) + local.E;
    const Eigen::VectorXd g = local.C * local.solve_matrix(local.F);
    for (int a = 0; a < nf; ++a) {
      const int fa = mesh.cell_face(c, a);
      if (sys.offset[fa] < 0) continue;
      sys.rhs.segment(sys.offset[fa], M) += g.segment(a * M, M);
      for (int b = 0; b < nf; ++b) {
        const int fb = mesh.cell_face(c, b);
        const Eigen::MatrixXd block = S.block(a * M, b * M, M, M);
        if (sys.offset[fb] < 0) {
          sys.rhs.segment(sys.offset[fa], M) += block * sys.dirichlet[fb];
          continue;
        }
        for (int i = 0; i < M; ++i)
          for (int j = 0; j < M; ++j) triplets.emplace_back(sys.offset[fa] + i, sys.offset[fb] + j, -block(i, j));
      }
    }
    sys.locals.push_back(std::move(local));
  }
  sys.matrix.resize(next, next);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  return sys;
}

struct SolveDiagnostics {
  std::string method;
  int degree = 0;
  int cells = 0;
  int trace_dofs = 0;
  double max_local_condition = 0.0;
  double residual = 0.0;  // normwise relative residual of the trace solve
  double seconds = 0.0;

  /// One key=value log line.
  std::string log_line() const {
    std::ostringstream os;
    os << std::setprecision(6) << "solve method=" << method << " degree=" << degree << " cells=" << cells
       << " trace_dofs=" << trace_dofs << " max_local_cond=" << max_local_condition << " residual=" << residual
       << " seconds=" << seconds;
    return os.str();
  }
};

/// Discrete solution: (J, U) per cell in the tensor basis, Û per face.
struct Solution {
  int dim = 1;
  int degree = 0;
  double alpha = 1.0;
  std::vector<Eigen::VectorXd> flux;    // d * basis_size per cell, component-major
  std::vector<Eigen::VectorXd> scalar;  // basis_size per cell
  std::vector<Eigen::VectorXd> trace;   // face_size per face
  std::vector<double> face_tau;         // per face
  SolveDiagnostics diagnostics;

  int basis_size() const { return TensorBasis(degree, dim).size(); }

  double u(const Mesh& mesh, int c, const Point& ref) const {
    (void)mesh;
    return TensorBasis(degree, dim).values(ref).dot(scalar[c]);
  }

  Point j(const Mesh& mesh, int c, const Point& ref) const {
    (void)mesh;
    const Eigen::VectorXd phi = TensorBasis(degree, dim).values(ref);
    const int N = static_cast<int>(phi.size());
    Point out{0.0, 0.0};
    for (int a = 0; a < dim; ++a) out[a] = phi.dot(flux[c].segment(a * N, N));
    return out;
  }

  /// Û on face f at face coordinate s in [0,1] (ignored in 1D).
  double u_hat(int f, double s) const { return FaceBasis(degree, dim).values(s).dot(trace[f]); }

  /// Outward numerical flux J.n + tau (U - Û) of cell c on its local face,
  /// at the face coordinate s.
  double numerical_flux(const Mesh& mesh, int c, int local, double s) const {
    const int axis = Mesh::local_face_axis(local);
    Point ref{0.5, 0.5};
    ref[axis] = local % 2 == 0 ? 0.0 : 1.0;
    if (dim == 1) ref[1] = 0.0;
    else ref[1 - axis] = s;
    const int f = mesh.cell_face(c, local);
    const double n = Mesh::outward_sign(local);
    return n * j(mesh, c, ref)[axis] + face_tau[f] * (u(mesh, c, ref) - u_hat(f, s));
  }
};

/// Condense, solve the trace system, and recover (J, U) cell by cell.
inline Solution solve(const Mesh& mesh, const ProblemSpec& spec, const SolverConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  TraceSystem sys = condense(mesh, spec, config);

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(sys.size());
  double residual = 0.0;
  if (sys.size() > 0) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(sys.matrix);
    lu.factorize(sys.matrix);
    if (lu.info() != Eigen::Success) throw TraceSolveError("trace matrix is singular: " + lu.lastErrorMessage(), -1.0);
    lambda = lu.solve(sys.rhs);
    // One step of iterative refinement.
    Eigen::VectorXd r = sys.rhs - sys.matrix * lambda;
    lambda += lu.solve(r);
    r = sys.rhs - sys.matrix * lambda;
    double anorm = 0.0;
    for (int k = 0; k < sys.matrix.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, k); it; ++it)
        anorm = std::max(anorm, std::abs(it.value()));
    const double scale = anorm * lambda.cwiseAbs().sum() + sys.rhs.cwiseAbs().maxCoeff();
    residual = scale > 0.0 ? r.cwiseAbs().maxCoeff() / scale : 0.0;
    if (!std::isfinite(residual) || residual > config.linear_tolerance)
      throw TraceSolveError("trace solve missed the tolerance: relative residual " + std::to_string(residual),
                            residual);
  }

  Solution sol;
  sol.dim = mesh.dim();
  sol.degree = config.degree;
  sol.alpha = spec.alpha;
  const int N = TensorBasis(config.degree, sol.dim).size();
  sol.face_tau.resize(mesh.num_faces());
  sol.trace.resize(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    sol.face_tau[f] = config.tau_on(f);
    sol.trace[f] = sys.offset[f] < 0 ? sys.dirichlet[f] : Eigen::VectorXd(lambda.segment(sys.offset[f], sys.face_size));
  }
  sol.flux.resize(mesh.num_cells());
  sol.scalar.resize(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Eigen::VectorXd x = sys.locals[c].solve(sys.gather(mesh, c, lambda));
    sol.flux[c] = x.head(sol.dim * N);
    sol.scalar[c] = x.tail(N);
  }

  auto& diag = sol.diagnostics;
  diag.method = to_string(config.weight_mode);
  diag.degree = config.degree;
  diag.cells = mesh.num_cells();
  diag.trace_dofs = sys.size();
  diag.max_local_condition = sys.max_local_condition;
  diag.residual = residual;
  diag.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

/// Solution dump: one row per cell coefficient and one per face coefficient.
/// `tag` fills the provenance column.
inline void write_solution_csv(std::ostream& os, const Mesh& mesh, const Solution& sol,
                               const std::string& tag = "solution") {
  os << "tag,kind,id,field,index,value\n";
  os << std::setprecision(16);
  const int N = sol.basis_size();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    for (int a = 0; a < sol.dim; ++a)
      for (int i = 0; i < N; ++i)
        os << tag << ",cell," << c << ",J" << a << ',' << i << ',' << sol.flux[c][a * N + i] << '\n';
    for (int i = 0; i < N; ++i) os << tag << ",cell," << c << ",U," << i << ',' << sol.scalar[c][i] << '\n';
  }
  for (int f = 0; f < mesh.num_faces(); ++f)
    for (int m = 0; m < sol.trace[f].size(); ++m)
      os << tag << ",face," << f << ",Uhat," << m << ',' << sol.trace[f][m] << '\n';
}

}  // namespace whdg
