#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

#include "whdg/hdg.hpp"
#include "whdg/postproc.hpp"
#include "whdg/sgfv.hpp"

using namespace whdg;

namespace {

SolverConfig config_for(int k, WeightMode mode, double tau = 1.0) {
  SolverConfig c;
  c.degree = k;
  c.tau = tau;
  c.weight_mode = mode;
  return c;
}

// Interior-face flux balance <J.n + tau (U - Û), xi> summed over both sides.
double max_flux_jump(const Mesh& mesh, const Solution& sol) {
  const Rule1D line = gauss_legendre(6);
  const FaceBasis fb(sol.degree, mesh.dim());
  double worst = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.face(f);
    if (face.is_boundary()) continue;
    const int lo = 2 * face.axis + 1, hi = 2 * face.axis;  // local index in cells[0], cells[1]
    const int npts = mesh.dim() == 1 ? 1 : static_cast<int>(line.nodes.size());
    Eigen::VectorXd jump = Eigen::VectorXd::Zero(fb.size());
    for (int q = 0; q < npts; ++q) {
      const double s = mesh.dim() == 1 ? 0.0 : line.nodes[q];
      const double w = mesh.dim() == 1 ? 1.0 : line.weights[q] * face.measure();
      const double total = sol.numerical_flux(mesh, face.cells[0], lo, s) + sol.numerical_flux(mesh, face.cells[1], hi, s);
      jump += w * total * fb.values(s);
    }
    worst = std::max(worst, jump.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

// ---- weights ---------------------------------------------------------------

TEST(Weight, PointValues) {
  const Mesh mesh = build_uniform_cartesian(2, 1, {{0.0, 0.0}, {2.0, 2.0}});
  const ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {2.0, 0.0});
  const SolverConfig cfg = config_for(0, WeightMode::WeightedCentered);
  EXPECT_DOUBLE_EQ(local_weight(mesh, 0, {1.0, 1.0}, spec, cfg), 1.0);
  EXPECT_NEAR(local_weight(mesh, 0, {1.5, 1.0}, spec, cfg), 0.36787944117144233, 1e-15);
  EXPECT_DOUBLE_EQ(local_weight(mesh, 0, {1.5, 1.0}, spec, config_for(0, WeightMode::Unweighted)), 1.0);
  EXPECT_THROW(local_weight(mesh, 0, {2.5, 1.0}, spec, cfg), std::domain_error);
}

TEST(Weight, DerivativeAlongDrift) {
  const Mesh mesh = build_uniform_cartesian(2, 1);
  const Point beta{1.5, -0.7};
  const double alpha = 0.8;
  const ProblemSpec spec = ProblemSpec::constant(mesh, alpha, beta);
  const SolverConfig cfg = config_for(0, WeightMode::WeightedCentered);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  const double h = 1e-6;
  for (int t = 0; t < 5; ++t) {
    const Point x{u(rng), u(rng)};
    const Point xp{x[0] + h * beta[0], x[1] + h * beta[1]}, xm{x[0] - h * beta[0], x[1] - h * beta[1]};
    const double fd = (local_weight(mesh, 0, xp, spec, cfg) - local_weight(mesh, 0, xm, spec, cfg)) / (2 * h);
    const double exact = -(beta[0] * beta[0] + beta[1] * beta[1]) / alpha * local_weight(mesh, 0, x, spec, cfg);
    EXPECT_NEAR(fd / exact, 1.0, 1e-6);
  }
}

TEST(Weight, ChainExamples) {
  const WeightChain two = chain_xk_1d({0.0, 0.5, 1.0}, {1.0, 2.0}, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(two.shift[0], 0.0);
  EXPECT_NEAR(two.shift[1], 0.25, 1e-15);
  const WeightChain flat = chain_xk_1d({0.0, 0.2, 0.5, 1.0}, {3.0, 3.0, 3.0}, 1.0, 0.1);
  for (double s : flat.shift) EXPECT_NEAR(s, 0.1, 1e-15);
}

TEST(Weight, ChainIsContinuous) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> b(-20.0, 20.0);
  const Mesh mesh = build_uniform_cartesian(1, 12);
  ProblemSpec spec;
  spec.alpha = 0.7;
  for (int c = 0; c < 12; ++c) spec.drift.push_back({c == 5 ? 0.0 : b(rng), 0.0});
  SolverConfig cfg = config_for(0, WeightMode::WeightedCentered);
  cfg.chain_1d = true;
  const auto w = cell_weights(mesh, spec, cfg);
  for (int c = 0; c + 1 < 12; ++c) {
    const double x = mesh.cell(c).upper()[0];
    const double left = w[c]({x, 0.0}), right = w[c + 1]({x, 0.0});
    EXPECT_LE(std::abs(left - right), 1e-12 * left);
  }
}

TEST(Weight, GlobalOverflowGuard) {
  const Mesh mesh = build_uniform_cartesian(1, 4, {{0.0, 0.0}, {100.0, 1.0}});
  const ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {10.0, 0.0});
  EXPECT_THROW(cell_weights(mesh, spec, config_for(0, WeightMode::WeightedGlobal)), WeightOverflow);
  EXPECT_NO_THROW(cell_weights(mesh, spec, config_for(0, WeightMode::WeightedCentered)));
}

// ---- local problem ---------------------------------------------------------

TEST(Local, SelfConsistency) {
  // Substitute the local solution back into L x = R Lambda + F.
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  const Mesh mesh = build_uniform_cartesian(2, 3);
  ProblemSpec spec = ProblemSpec::constant(mesh, 0.3, {4.0, -9.0});
  spec.source = [](const Point& x) { return std::sin(3 * x[0]) + x[1]; };
  for (int k = 0; k <= 3; ++k) {
    const LocalSystem sys = assemble_local(mesh, 4, spec, config_for(k, WeightMode::WeightedCentered));
    Eigen::VectorXd lambda(sys.face_unknowns());
    for (int i = 0; i < lambda.size(); ++i) lambda[i] = g(rng);
    const Eigen::VectorXd x = sys.solve(lambda);
    const Eigen::VectorXd rhs = sys.R * lambda + sys.F;
    EXPECT_LE((sys.L * x - rhs).norm(), 1e-10 * rhs.norm()) << "k=" << k;
  }
}

TEST(Local, UnweightedEqualsCenteredAtZeroDrift) {
  const Mesh mesh = build_uniform_cartesian(2, 2);
  const ProblemSpec spec = ProblemSpec::constant(mesh, 1.3, {0.0, 0.0});
  for (int k = 0; k <= 2; ++k) {
    const LocalSystem a = assemble_local(mesh, 1, spec, config_for(k, WeightMode::Unweighted));
    const LocalSystem b = assemble_local(mesh, 1, spec, config_for(k, WeightMode::WeightedCentered));
    EXPECT_EQ(a.L, b.L);
    EXPECT_EQ(a.R, b.R);
    EXPECT_EQ(a.C, b.C);
    EXPECT_EQ(a.E, b.E);
  }
}

TEST(Local, SolvableForPositiveTau) {
  const Mesh mesh = build_uniform_cartesian(2, 2);
  const ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {10.0, 10.0});
  for (double tau : {1e-6, 1.0, 1e4})
    for (int k = 0; k <= 3; ++k) {
      const LocalSystem sys = assemble_local(mesh, 0, spec, config_for(k, WeightMode::WeightedCentered, tau));
      EXPECT_LT(sys.condition, 1e14);
    }
  SolverConfig bad = config_for(1, WeightMode::WeightedCentered, 0.0);
  EXPECT_THROW(assemble_local(mesh, 0, spec, bad), std::invalid_argument);
}

TEST(Local, ConditionGuard) {
  // Cell Peclet number 150 per axis: the weighted blocks span e^300.
  const Mesh mesh = build_uniform_cartesian(2, 2);
  const ProblemSpec spec = ProblemSpec::constant(mesh, 0.1, {30.0, 30.0});
  EXPECT_THROW(assemble_local(mesh, 0, spec, config_for(2, WeightMode::WeightedCentered)), LocalSolveError);
  EXPECT_NO_THROW(assemble_local(mesh, 0, spec, config_for(0, WeightMode::WeightedCentered)));
}

TEST(Local, EnergyIdentity) {
  // (1/alpha)(J,J)_mu + <tau (U - L), U - L>_mu = -<Ĵ.n, L>_mu for f = 0,
  // evaluated with independent quadrature.
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = trial % 2 + 1, k = trial % 3;
    const Mesh mesh = build_uniform_cartesian(d, 1, {{0.0, 0.0}, {0.5 + 0.5 * std::abs(u(rng)), 0.7}});
    const double alpha = 0.2 + std::abs(u(rng));
    const ProblemSpec spec = ProblemSpec::constant(mesh, alpha, {8 * u(rng), 8 * u(rng)});
    const SolverConfig cfg = config_for(k, WeightMode::WeightedCentered, 0.1 + 3 * std::abs(u(rng)));
    const LocalSystem sys = assemble_local(mesh, 0, spec, cfg);
    Eigen::VectorXd lambda(sys.face_unknowns());
    for (int i = 0; i < lambda.size(); ++i) lambda[i] = u(rng);
    const Eigen::VectorXd x = sys.solve(lambda, false);
    const TensorBasis basis(k, d);
    const FaceBasis fb(k, d);
    const int N = basis.size();
    const Cell& cell = mesh.cell(0);

    double lhs = 0.0, rhs = 0.0;
    const QuadratureRule vol = cell_rule(cell, d, sys.weight, k + 4);
    for (std::size_t q = 0; q < vol.size(); ++q) {
      const Eigen::VectorXd phi = basis.values(vol.reference[q]);
      for (int a = 0; a < d; ++a) lhs += vol.weights[q] * std::pow(phi.dot(x.segment(a * N, N)), 2) / alpha;
    }
    for (int local = 0; local < 2 * d; ++local) {
      const int axis = Mesh::local_face_axis(local);
      const QuadratureRule face = face_rule(cell, d, local, sys.weight, k + 4);
      for (std::size_t q = 0; q < face.size(); ++q) {
        const Eigen::VectorXd phi = basis.values(face.reference[q]);
        const double lam = fb.values(d == 1 ? 0.0 : face.reference[q][1 - axis]).dot(lambda.segment(local * fb.size(), fb.size()));
        const double U = phi.dot(x.tail(N));
        const double jn = Mesh::outward_sign(local) * phi.dot(x.segment(axis * N, N));
        const double tau = sys.tau[local];
        lhs += face.weights[q] * tau * (U - lam) * (U - lam);
        rhs -= face.weights[q] * (jn + tau * (U - lam)) * lam;
      }
    }
    EXPECT_GE(lhs, 0.0);
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

// ---- condense / solve ------------------------------------------------------

TEST(Dirichlet, Projection) {
  const Mesh mesh = build_uniform_cartesian(2, 1);
  int bottom = -1;
  for (int f = 0; f < mesh.num_faces(); ++f)
    if (mesh.face(f).axis == 1 && mesh.face(f).position == 0.0) bottom = f;
  ASSERT_GE(bottom, 0);
  const Eigen::VectorXd c = dirichlet_project(mesh, bottom, 2, [](const Point&) { return 3.0; });
  EXPECT_NEAR(c[0], 3.0, 1e-14);
  EXPECT_NEAR(c.tail(2).norm(), 0.0, 1e-14);
  const Eigen::VectorXd m = dirichlet_project(mesh, bottom, 0, [](const Point& x) { return x[0]; });
  EXPECT_NEAR(m[0], 0.5, 1e-15);
  // g - projection is orthogonal to the face space.
  const auto g = [](const Point& x) { return std::pow(x[0], 5) - x[0]; };
  const Eigen::VectorXd p = dirichlet_project(mesh, bottom, 2, g);
  const Rule1D line = gauss_legendre(10);
  const FaceBasis fb(2, 2);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(3);
  for (std::size_t q = 0; q < line.nodes.size(); ++q)
    r += line.weights[q] * (g({line.nodes[q], 0.0}) - fb.values(line.nodes[q]).dot(p)) * fb.values(line.nodes[q]);
  EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Condense, SymmetricForContinuousGlobalWeight) {
  const Mesh mesh = build_uniform_cartesian(2, 4);
  const ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {1.0, 1.0});  // psi = -x - y
  for (int k = 0; k <= 2; ++k) {
    SolverConfig cfg = config_for(k, WeightMode::WeightedGlobal);
    cfg.transmission = TransmissionWeighting::Weighted;
    const Eigen::MatrixXd A = Eigen::MatrixXd(condense(mesh, spec, cfg).matrix);
    const double scale = A.cwiseAbs().maxCoeff();
    EXPECT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-12 * scale);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (A + A.transpose())).eigenvalues();
    EXPECT_GE(ev.minCoeff(), -1e-10 * ev.maxCoeff());
  }
}

TEST(Condense, AllDirichletGivesEmptySystem) {
  const Mesh mesh = build_uniform_cartesian(1, 1);
  ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {2.0, 0.0});
  spec.dirichlet = [](const Point& x) { return 1.0 + x[0]; };
  const Solution sol = solve(mesh, spec, config_for(0, WeightMode::WeightedCentered));
  EXPECT_EQ(sol.diagnostics.trace_dofs, 0);
  EXPECT_EQ(sol.scalar.size(), 1u);
  EXPECT_TRUE(std::isfinite(sol.scalar[0][0]));
}

TEST(Solve, ReproducesLinearSolution) {
  const auto u = [](const Point& x) { return 1.0 + 2.0 * x[0] - 3.0 * x[1]; };
  const double alpha = 0.7;
  const Mesh mesh = build_uniform_cartesian(2, 3);
  ProblemSpec spec = ProblemSpec::constant(mesh, alpha, {0.0, 0.0});
  spec.dirichlet = u;
  for (int k = 1; k <= 3; ++k)
    for (auto mode : {WeightMode::WeightedCentered, WeightMode::Unweighted}) {
      const Solution sol = solve(mesh, spec, config_for(k, mode));
      for (int c = 0; c < mesh.num_cells(); ++c)
        for (const Point ref : {Point{0.1, 0.2}, Point{0.9, 0.5}}) {
          const Point x = mesh.cell(c).map(ref);
          EXPECT_NEAR(sol.u(mesh, c, ref), u(x), 1e-10);
          const Point j = sol.j(mesh, c, ref);
          EXPECT_NEAR(j[0], -alpha * 2.0, 1e-10);
          EXPECT_NEAR(j[1], alpha * 3.0, 1e-10);
        }
    }
}

TEST(Solve, DiscreteConservation) {
  const Mesh mesh = build_uniform_cartesian(2, 4);
  ProblemSpec spec = ProblemSpec::constant(mesh, 0.5, {6.0, -2.0});
  spec.source = [](const Point& x) { return 1.0 + x[0] * x[1]; };
  spec.dirichlet = [](const Point& x) { return x[0]; };
  for (int k = 0; k <= 2; ++k) {
    const Solution sol = solve(mesh, spec, config_for(k, WeightMode::WeightedCentered));
    EXPECT_LT(max_flux_jump(mesh, sol), 1e-10) << "k=" << k;
  }
}

TEST(Solve, CenterShiftInvariance) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Mesh mesh = build_uniform_cartesian(2, 4);
  ProblemSpec spec = ProblemSpec::constant(mesh, 0.2, {3.0, 5.0});
  spec.source = [](const Point& x) { return std::cos(x[0] + 2 * x[1]); };
  const SolverConfig base = config_for(1, WeightMode::WeightedCentered);
  SolverConfig moved = base;
  for (int c = 0; c < mesh.num_cells(); ++c) moved.centers.push_back(mesh.cell(c).map({u(rng), u(rng)}));
  const Solution a = solve(mesh, spec, base), b = solve(mesh, spec, moved);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    EXPECT_LE((a.scalar[c] - b.scalar[c]).norm(), 1e-9 * a.scalar[c].norm());
    EXPECT_LE((a.flux[c] - b.flux[c]).norm(), 1e-9 * a.flux[c].norm());
  }
  for (int f = 0; f < mesh.num_faces(); ++f) EXPECT_LE((a.trace[f] - b.trace[f]).norm(), 1e-9 * (1.0 + a.trace[f].norm()));
}

TEST(Solve, NeumannBoundary) {
  // u = exp(x) with beta = 0: j = -alpha e^x, Neumann on the right side.
  const double alpha = 1.0;
  const Mesh mesh = build_uniform_cartesian(1, 16).relabel([](const Face&, const Point& c) {
    return c[0] > 0.5 ? BoundaryLabel::Neumann : BoundaryLabel::Dirichlet;
  });
  ProblemSpec spec = ProblemSpec::constant(mesh, alpha, {0.0, 0.0});
  spec.source = [](const Point& x) { return -std::exp(x[0]); };
  spec.dirichlet = [](const Point& x) { return std::exp(x[0]); };
  spec.neumann = [](const Point& x, const Point& n) { return -std::exp(x[0]) * n[0]; };
  const Solution sol = solve(mesh, spec, config_for(1, WeightMode::WeightedCentered));
  EXPECT_NEAR(sol.trace[mesh.num_faces() - 1][0], std::exp(1.0), 1e-4);
}

TEST(Solve, DiagnosticsAndDump) {
  const Mesh mesh = build_uniform_cartesian(2, 2);
  const ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {1.0, 1.0});
  const Solution sol = solve(mesh, spec, config_for(1, WeightMode::WeightedCentered));
  const std::string line = sol.diagnostics.log_line();
  EXPECT_EQ(line.rfind("solve method=whdg-centered degree=1 cells=4 trace_dofs=8", 0), 0u);
  EXPECT_LE(sol.diagnostics.residual, 1e-12);
  std::ostringstream os;
  write_solution_csv(os, mesh, sol, "run");
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "tag,kind,id,field,index,value");
  EXPECT_NE(s.find("run,face,0,Uhat,1,"), std::string::npos);
}

// ---- sgfv ------------------------------------------------------------------

TEST(Bernoulli, Values) {
  EXPECT_DOUBLE_EQ(bernoulli(0.0), 1.0);
  EXPECT_NEAR(bernoulli(1.0), 0.581976706869326424, 1e-15);
  for (double t : {0.1, 1.0, 10.0, 1e-5, 700.0}) EXPECT_NEAR(bernoulli(-t) - bernoulli(t), t, 1e-12 * std::max(1.0, t));
  for (double t : {-1000.0, -1e-6, 1e-6, 1000.0}) {
    EXPECT_TRUE(std::isfinite(bernoulli(t)));
    EXPECT_GE(bernoulli(t), 0.0);
  }
}

TEST(SG, ZeroDriftStencil) {
  const Mesh mesh = build_uniform_cartesian(1, 4);
  const SGSystem s = assemble_sg(mesh, 2.0, std::vector<double>(4, 0.0), nullptr, nullptr);
  for (int i = 0; i < s.size(); ++i) {
    EXPECT_DOUBLE_EQ(s.diag[i], -16.0);
    EXPECT_DOUBLE_EQ(s.lower[i], 8.0);
    EXPECT_DOUBLE_EQ(s.upper[i], 8.0);
  }
}

TEST(SG, SignPattern) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> b(-300.0, 300.0);
  const Mesh mesh = build_uniform_cartesian(1, 20);
  std::vector<double> beta(20);
  for (double& x : beta) x = b(rng);
  const SGSystem s = assemble_sg(mesh, 1.0, beta, nullptr, nullptr);
  for (int i = 0; i < s.size(); ++i) {
    EXPECT_GT(s.lower[i], 0.0);
    EXPECT_GT(s.upper[i], 0.0);
    EXPECT_LT(s.diag[i], 0.0);
  }
}

TEST(SG, MatchesSmallTauTraceMatrix) {
  const Mesh mesh = build_uniform_cartesian(1, 8);
  std::vector<double> beta{5.0, -3.0, 12.0, 0.0, 1.0, -40.0, 2.0, 7.0};
  ProblemSpec spec;
  spec.alpha = 0.5;
  for (double b : beta) spec.drift.push_back({b, 0.0});
  const Eigen::MatrixXd A = Eigen::MatrixXd(condense(mesh, spec, config_for(0, WeightMode::WeightedCentered, 1e-10)).matrix);
  const SGSystem s = assemble_sg(mesh, spec);
  for (int i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(A(i, i) / -s.diag[i], 1.0, 1e-6);
    if (i > 0) {
      EXPECT_NEAR(A(i, i - 1) / -s.lower[i], 1.0, 1e-6);
    }
    if (i + 1 < s.size()) {
      EXPECT_NEAR(A(i, i + 1) / -s.upper[i], 1.0, 1e-6);
    }
  }
}

TEST(SG, SourceMatchesSmallTauLimit) {
  const Mesh mesh = build_uniform_cartesian(1, 10);
  ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {15.0, 0.0});
  spec.source = [](const Point& x) { return 1.0 + std::sin(4 * x[0]); };
  spec.dirichlet = [](const Point& x) { return 2.0 - x[0]; };
  const Solution w = solve(mesh, spec, config_for(0, WeightMode::WeightedCentered, 1e-9));
  const FVSolution fv = solve_sg(assemble_sg(mesh, spec));
  for (int f = 0; f < mesh.num_faces(); ++f) EXPECT_NEAR(w.trace[f][0], fv.values[f], 1e-7 * std::abs(fv.values[f]));
}

TEST(SG, NodalExactness) {
  for (double beta : {1.0, 10.0, 100.0, -60.0}) {
    const Mesh mesh = build_uniform_cartesian(1, 13);
    ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {beta, 0.0});
    spec.dirichlet = [](const Point& x) { return x[0] < 0.5 ? 2.0 : 5.0; };
    const FVSolution fv = solve_sg(assemble_sg(mesh, spec));
    for (std::size_t i = 0; i < fv.nodes.size(); ++i) {
      const double x = fv.nodes[i];
      const double exact = 2.0 + 3.0 * std::expm1(beta * x) / std::expm1(beta);
      EXPECT_NEAR(fv.values[i] / exact, 1.0, 1e-10);
    }
    for (double j : fv.fluxes) EXPECT_NEAR(j / fv.fluxes[0], 1.0, 1e-10);
  }
}

TEST(SG, LinearWithoutDriftAndMaximumPrinciple) {
  const Mesh mesh = Mesh::tensor({{0.0, 0.1, 0.35, 0.4, 0.8, 1.0}});
  ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {0.0, 0.0});
  spec.dirichlet = [](const Point& x) { return x[0]; };
  const FVSolution lin = solve_sg(assemble_sg(mesh, spec));
  for (std::size_t i = 0; i < lin.nodes.size(); ++i) EXPECT_NEAR(lin.values[i], lin.nodes[i], 1e-14);

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> b(-80.0, 80.0);
  for (auto& d : spec.drift) d[0] = b(rng);
  const FVSolution fv = solve_sg(assemble_sg(mesh, spec));
  for (double v : fv.values) {
    EXPECT_GE(v, -1e-14);
    EXPECT_LE(v, 1.0 + 1e-14);
  }
}

TEST(SG, ReversalSymmetry) {
  const std::vector<double> pts{0.0, 0.2, 0.25, 0.6, 0.9, 1.0};
  std::vector<double> mirrored;
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) mirrored.push_back(1.0 - *it);
  const std::vector<double> beta{3.0, -7.0, 20.0, 1.0, -2.0};
  std::vector<double> beta_m(beta.rbegin(), beta.rend());
  for (double& b : beta_m) b = -b;
  const auto g = [](const Point& x) { return x[0] < 0.5 ? 1.0 : 4.0; };
  const auto gm = [](const Point& x) { return x[0] < 0.5 ? 4.0 : 1.0; };
  const FVSolution a = solve_sg(assemble_sg(Mesh::tensor({pts}), 1.0, beta, nullptr, g));
  const FVSolution b = solve_sg(assemble_sg(Mesh::tensor({mirrored}), 1.0, beta_m, nullptr, gm));
  for (std::size_t i = 0; i < a.values.size(); ++i)
    EXPECT_NEAR(a.values[i], b.values[a.values.size() - 1 - i], 1e-12 * a.values[i]);
}

TEST(SG, RejectsNeumannEnds) {
  const Mesh mesh = build_uniform_cartesian(1, 3).relabel([](const Face&, const Point&) { return BoundaryLabel::Neumann; });
  EXPECT_THROW(assemble_sg(mesh, 1.0, {1.0, 1.0, 1.0}, nullptr, nullptr), std::invalid_argument);
}

// ---- postproc --------------------------------------------------------------

namespace {
struct Fixture {
  Mesh mesh = build_uniform_cartesian(2, 3);
  ProblemSpec spec;
  SolverConfig cfg;
  Solution sol;
  PostProcessed post;

  Fixture(int k, Point beta, ScalarField u_exact, ScalarField f) {
    spec = ProblemSpec::constant(mesh, 0.9, beta);
    spec.dirichlet = std::move(u_exact);
    spec.source = std::move(f);
    cfg = config_for(k, WeightMode::WeightedCentered);
    sol = solve(mesh, spec, cfg);
    post = postprocess(mesh, spec, cfg, sol);
  }
};

double cell_mean(const Cell& cell, const std::function<double(const Point&)>& v) {
  const QuadratureRule r = plain_cell_rule(cell, 2, 6);
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) s += r.weights[q] * v(r.reference[q]);
  return s;
}
}  // namespace

TEST(Postprocess, MeanPreservation) {
  for (int k = 0; k <= 2; ++k) {
    Fixture fx(k, {4.0, -1.0}, [](const Point& x) { return std::sin(x[0] + x[1]); },
               [](const Point& x) { return 1.0 + x[0]; });
    for (int c = 0; c < fx.mesh.num_cells(); ++c) {
      const Cell& cell = fx.mesh.cell(c);
      const double u = cell_mean(cell, [&](const Point& r) { return fx.sol.u(fx.mesh, c, r); });
      EXPECT_NEAR(cell_mean(cell, [&](const Point& r) { return fx.post.l2min.value(c, r); }), u, 1e-12);
      EXPECT_NEAR(cell_mean(cell, [&](const Point& r) { return fx.post.resolve.value(c, r); }), u, 1e-12);
    }
  }
}

TEST(Postprocess, LinearReproduction) {
  const auto u = [](const Point& x) { return 0.5 - x[0] + 4.0 * x[1]; };
  for (int k = 0; k <= 2; ++k) {
    Fixture fx(k, {0.0, 0.0}, u, nullptr);
    for (int c = 0; c < fx.mesh.num_cells(); ++c)
      for (const Point r : {Point{0.2, 0.3}, Point{0.7, 0.9}}) {
        const Point x = fx.mesh.cell(c).map(r);
        EXPECT_NEAR(fx.post.l2min.value(c, r), u(x), 1e-10) << "k=" << k;
        if (k >= 1) {
          EXPECT_NEAR(fx.post.resolve.value(c, r), u(x), 1e-10) << "k=" << k;
        }
        if (k == 0) continue;  // J itself is only first order for k = 0
        const Point jd = fx.post.flux.vector(c, r);
        EXPECT_NEAR(jd[0], 0.9, 1e-10);
        EXPECT_NEAR(jd[1], -3.6, 1e-10);
      }
  }
}

TEST(Postprocess, FluxIsDivConforming) {
  Fixture fx(1, {3.0, 2.0}, [](const Point& x) { return x[0] * x[1]; }, [](const Point& x) { return std::exp(x[0]); });
  const Rule1D line = gauss_legendre(5);
  for (int f = 0; f < fx.mesh.num_faces(); ++f) {
    const Face& face = fx.mesh.face(f);
    if (face.is_boundary()) continue;
    double jump2 = 0.0;
    for (std::size_t q = 0; q < line.nodes.size(); ++q) {
      Point a{0.0, 0.0}, b{0.0, 0.0};
      a[face.axis] = 1.0;
      a[1 - face.axis] = line.nodes[q];
      b[face.axis] = 0.0;
      b[1 - face.axis] = line.nodes[q];
      const double jump = fx.post.flux.vector(face.cells[0], a)[face.axis] - fx.post.flux.vector(face.cells[1], b)[face.axis];
      jump2 += line.weights[q] * face.measure() * jump * jump;
    }
    EXPECT_LT(std::sqrt(jump2), 1e-10);
  }
}

TEST(Postprocess, Locality) {
  Fixture fx(1, {2.0, 2.0}, [](const Point& x) { return x[0]; }, [](const Point&) { return 1.0; });
  Solution perturbed = fx.sol;
  perturbed.scalar[8] *= 3.0;
  perturbed.flux[8] *= -2.0;
  const int c = 0;  // far from cell 8 on the 3x3 grid
  EXPECT_EQ(l2min_postprocess(fx.mesh, c, fx.sol, fx.spec), l2min_postprocess(fx.mesh, c, perturbed, fx.spec));
  EXPECT_EQ(rtn_project(fx.mesh, c, fx.sol), rtn_project(fx.mesh, c, perturbed));
}

TEST(Postprocess, RtnReproducesMembers) {
  // A global RT_1 field (j = (x^2, xy)) with consistent traces is returned unchanged.
  const Mesh mesh = build_uniform_cartesian(2, 2);
  Solution sol;
  sol.dim = 2;
  sol.degree = 1;
  const TensorBasis basis(1, 2);
  const QuadratureRule r = plain_cell_rule(Cell{}, 2, 4);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(8);
    for (std::size_t q = 0; q < r.size(); ++q) {
      const Point x = mesh.cell(c).map(r.reference[q]);
      const Eigen::VectorXd phi = basis.values(r.reference[q]);
      coeff.head(4) += r.weights[q] * x[0] * phi;
      coeff.tail(4) += r.weights[q] * x[1] * phi;
    }
    sol.flux.push_back(coeff);  // j = (x, y) lies in Q_1 and RT_1
    sol.scalar.push_back(Eigen::VectorXd::Zero(4));
  }
  sol.trace.assign(mesh.num_faces(), Eigen::VectorXd::Zero(2));
  sol.face_tau.assign(mesh.num_faces(), 1.0);
  PostField field{Provenance::FluxRecon, 2, 1, {}};
  for (int c = 0; c < mesh.num_cells(); ++c) field.coeffs.push_back(rtn_project(mesh, c, sol));
  for (int c = 0; c < mesh.num_cells(); ++c)
    for (const Point p : {Point{0.3, 0.6}, Point{1.0, 0.1}}) {
      const Point x = mesh.cell(c).map(p);
      EXPECT_NEAR(field.vector(c, p)[0], x[0], 1e-12);
      EXPECT_NEAR(field.vector(c, p)[1], x[1], 1e-12);
      EXPECT_NEAR(field.divergence(mesh, c, p), 2.0, 1e-12);
    }
}

TEST(Postprocess, TraceLinear) {
  const Mesh mesh = build_uniform_cartesian(1, 2);
  const PiecewiseLinear mid = trace_linear_midpoints(mesh, {1.0, 3.0});
  EXPECT_DOUBLE_EQ(mid(0.5), 2.0);
  const PiecewiseLinear lin = trace_linear_1d({0.0, 0.3, 1.0}, {1.0, 1.6, 3.0});
  for (double x : {0.0, 0.1, 0.5, 0.99}) EXPECT_NEAR(lin(x), 1.0 + 2.0 * x, 1e-15);
  const PiecewiseLinear flat = trace_linear_1d({0.0, 0.5, 1.0}, {4.0, 4.0, 4.0});
  EXPECT_DOUBLE_EQ(flat(0.77), 4.0);
  EXPECT_THROW(trace_linear_1d({0.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(trace_linear_1d({0.0, 0.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(Postprocess, CsvCarriesProvenance) {
  Fixture fx(1, {1.0, 0.0}, [](const Point& x) { return x[1]; }, nullptr);
  std::ostringstream os;
  write_postfield_csv(os, fx.post.l2min);
  write_postfield_csv(os, fx.post.flux, false);
  const std::string s = os.str();
  EXPECT_NE(s.find("\nL2Min,cell,0,U,0,"), std::string::npos);
  EXPECT_NE(s.find("\nFluxRecon,cell,8,Jdiv,11,"), std::string::npos);
}
