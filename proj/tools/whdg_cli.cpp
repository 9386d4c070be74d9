#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "whdg/whdg.hpp"

namespace {

// Writes to the file if a path is given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

whdg::Point parse_beta(const std::vector<double>& v) {
  if (v.size() == 1) return {v[0], v[0]};
  if (v.size() == 2) return {v[0], v[1]};
  throw std::invalid_argument("--beta takes one or two values");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted HDG drift-diffusion solver and benchmarks"};
  app.require_subcommand(1);

  // converge
  int degree = 1, levels = 5;
  std::vector<double> beta{10.0, 10.0};
  double tau = 1.0;
  std::string method = "whdg", out;
  auto* converge = app.add_subcommand("converge", "Convergence study on the unit square");
  converge->add_option("--degree", degree, "Polynomial degree k")->check(CLI::Range(0, 5));
  converge->add_option("--levels", levels, "Number of grid levels (16 cells upward)")->check(CLI::Range(1, 6));
  converge->add_option("--beta", beta, "Constant drift (one or two values)")->delimiter(',');
  converge->add_option("--tau", tau, "Stabilization parameter")->check(CLI::PositiveNumber);
  converge->add_option("--method", method, "whdg or hdg")->check(CLI::IsMember({"whdg", "hdg"}));
  converge->add_option("--out", out, "CSV output (default stdout)");

  // pin
  int pin_levels = 5;
  std::string config_path;
  std::string pin_out;
  double pin_tau = 1.0;
  auto* pin = app.add_subcommand("pin", "p-i-n hole density benchmark");
  pin->add_option("--levels", pin_levels, "Finest grid level")->check(CLI::Range(2, 7));
  pin->add_option("--config", config_path, "JSON device constants (SI units)")->check(CLI::ExistingFile);
  pin->add_option("--tau", pin_tau, "Stabilization in SI units")->check(CLI::PositiveNumber);
  pin->add_option("--out", pin_out, "CSV output (default stdout)");

  // sg-compare
  int cells = 8;
  double sg_beta = 5.0, sg_tau = 1e-10, sg_alpha = 1.0;
  auto* sg = app.add_subcommand("sg-compare", "SG matrix versus the small-tau W-HDG trace matrix");
  sg->add_option("--cells", cells, "Uniform cells on (0,1)")->check(CLI::Range(2, 100000));
  sg->add_option("--beta", sg_beta, "Drift");
  sg->add_option("--alpha", sg_alpha, "Diffusion")->check(CLI::PositiveNumber);
  sg->add_option("--tau", sg_tau, "Stabilization")->check(CLI::PositiveNumber);

  // quad-check
  int max_points = 6;
  std::vector<double> bs{0.0, 1.0, -1.0, 10.0, -10.0, 50.0, -50.0};
  std::string quad_out;
  auto* quad = app.add_subcommand("quad-check", "Weighted Gauss moments against closed forms");
  quad->add_option("--points", max_points, "Largest rule size")->check(CLI::Range(1, 12));
  quad->add_option("--b", bs, "Exponent values")->delimiter(',');
  quad->add_option("--out", quad_out, "CSV output (default stdout)");

  // solve: single solve with mesh/solution/postprocessing dumps
  int n = 8;
  std::string mesh_out, solution_out, post_out;
  auto* single = app.add_subcommand("solve", "One solve of the unit-square problem with CSV dumps");
  single->add_option("--cells", n, "Cells per axis")->check(CLI::Range(1, 512));
  single->add_option("--degree", degree, "Polynomial degree k")->check(CLI::Range(0, 5));
  single->add_option("--beta", beta, "Constant drift (one or two values)")->delimiter(',');
  single->add_option("--tau", tau, "Stabilization parameter")->check(CLI::PositiveNumber);
  single->add_option("--method", method, "whdg or hdg")->check(CLI::IsMember({"whdg", "hdg"}));
  single->add_option("--mesh-out", mesh_out, "Mesh CSV");
  single->add_option("--solution-out", solution_out, "Solution CSV");
  single->add_option("--post-out", post_out, "Postprocessed fields CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*converge) {
      const auto report = whdg::run_convergence(degree, levels, parse_beta(beta), tau, whdg::parse_method(method));
      for (const auto& line : report.log) std::cerr << line << '\n';
      Output o(out);
      whdg::write_convergence_csv(o.stream(), report);
    } else if (*pin) {
      const whdg::PinConfig config = config_path.empty() ? whdg::PinConfig{} : whdg::load_pin_config(config_path);
      const auto report = whdg::run_pin_benchmark(pin_levels, config, pin_tau);
      std::cerr << "poisson newton_steps=" << report.newton_iterations << " reference_cells=" << report.reference_cells
                << '\n';
      for (const auto& line : report.log) std::cerr << line << '\n';
      Output o(pin_out);
      whdg::write_pin_csv(o.stream(), report);
    } else if (*sg) {
      const double diff = whdg::sg_trace_difference(cells, sg_alpha, sg_beta, sg_tau);
      std::cout << "cells=" << cells << " beta=" << sg_beta << " tau=" << sg_tau
                << " max_relative_difference=" << whdg::format_number(diff) << '\n';
    } else if (*quad) {
      Output o(quad_out);
      whdg::write_quadrature_csv(o.stream(), whdg::quadrature_check(bs, max_points));
    } else if (*single) {
      const whdg::Point b = parse_beta(beta);
      const whdg::Manufactured m = whdg::manufactured_2d(b);
      const whdg::Mesh mesh = whdg::build_uniform_cartesian(2, n);
      whdg::ProblemSpec spec = whdg::ProblemSpec::constant(mesh, m.alpha, b);
      spec.source = m.f;
      whdg::SolverConfig config;
      config.degree = degree;
      config.tau = tau;
      config.weight_mode =
          whdg::parse_method(method) == whdg::Method::WHDG ? whdg::WeightMode::WeightedCentered : whdg::WeightMode::Unweighted;
      const whdg::Solution sol = whdg::solve(mesh, spec, config);
      std::cerr << sol.diagnostics.log_line() << '\n';
      const whdg::PostProcessed post = whdg::postprocess(mesh, spec, config, sol);
      const auto errors = whdg::compute_errors(mesh, sol, {m.u, m.j, m.f}, &post);
      for (const auto& [name, value] : errors) std::cout << name << ' ' << whdg::format_number(value) << '\n';
      if (!mesh_out.empty()) {
        Output o(mesh_out);
        whdg::write_mesh_csv(o.stream(), mesh);
      }
      if (!solution_out.empty()) {
        Output o(solution_out);
        whdg::write_solution_csv(o.stream(), mesh, sol, method);
      }
      if (!post_out.empty()) {
        Output o(post_out);
        whdg::write_postfield_csv(o.stream(), post.l2min);
        whdg::write_postfield_csv(o.stream(), post.flux, false);
        whdg::write_postfield_csv(o.stream(), post.resolve, false);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
