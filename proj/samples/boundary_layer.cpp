// 1D problem with a boundary layer at x = 0: compares W-HDG, standard HDG and
// Scharfetter-Gummel on a coarse grid against the exact exponential profile.
#include <cmath>
#include <cstdio>

#include "whdg/whdg.hpp"

int main() {
  const double alpha = 1.0, beta = -200.0;
  const int cells = 16;
  const whdg::Mesh mesh = whdg::build_uniform_cartesian(1, cells);
  whdg::ProblemSpec spec = whdg::ProblemSpec::constant(mesh, alpha, {beta, 0.0});
  spec.dirichlet = [](const whdg::Point& x) { return x[0] < 0.5 ? 0.0 : 1.0; };

  // j = beta u - alpha u' constant  =>  u = (e^{beta x/alpha} - 1) / (e^{beta/alpha} - 1).
  const auto exact = [&](double x) { return std::expm1(beta * x / alpha) / std::expm1(beta / alpha); };

  whdg::SolverConfig config;
  config.degree = 0;
  config.weight_mode = whdg::WeightMode::WeightedCentered;
  const whdg::Solution w = whdg::solve(mesh, spec, config);
  config.weight_mode = whdg::WeightMode::Unweighted;
  const whdg::Solution h = whdg::solve(mesh, spec, config);
  const whdg::FVSolution sg = whdg::solve_sg(whdg::assemble_sg(mesh, spec));

  std::printf("%10s %14s %14s %14s %14s\n", "x", "exact", "whdg", "hdg", "sg");
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const double x = mesh.face(f).position;
    std::printf("%10.4f %14.6e %14.6e %14.6e %14.6e\n", x, exact(x), w.trace[f][0], h.trace[f][0], sg.values[f]);
  }
  std::printf("%s\n%s\n", w.diagnostics.log_line().c_str(), h.diagnostics.log_line().c_str());
  return 0;
}
