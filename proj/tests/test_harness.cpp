#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "whdg/harness.hpp"
#include "whdg/pin.hpp"

using namespace whdg;

// ---- manufactured solution -------------------------------------------------

TEST(Manufactured, VanishesOnBoundary) {
  const Manufactured m = manufactured_2d({10.0, -3.0});
  for (double s : {0.0, 0.17, 0.5, 0.93, 1.0}) {
    EXPECT_NEAR(m.u({s, 0.0}), 0.0, 1e-15);
    EXPECT_NEAR(m.u({s, 1.0}), 0.0, 1e-15);
    EXPECT_NEAR(m.u({0.0, s}), 0.0, 1e-15);
    EXPECT_NEAR(m.u({1.0, s}), 0.0, 1e-15);
  }
}

TEST(Manufactured, SourceIsDivergenceOfFlux) {
  const Manufactured m = manufactured_2d({10.0, 10.0}, 0.7);
  const double h = 1e-5;
  for (const Point p : {Point{0.3, 0.4}, Point{0.9, 0.2}, Point{0.95, 0.97}}) {
    const double div = (m.j({p[0] + h, p[1]})[0] - m.j({p[0] - h, p[1]})[0]) / (2 * h) +
                       (m.j({p[0], p[1] + h})[1] - m.j({p[0], p[1] - h})[1]) / (2 * h);
    EXPECT_NEAR(div, m.f(p), 1e-5 * std::max(1.0, std::abs(m.f(p))));
    const double gx = (m.u({p[0] + h, p[1]}) - m.u({p[0] - h, p[1]})) / (2 * h);
    EXPECT_NEAR(gx, m.grad_u(p)[0], 1e-7 * std::max(1.0, std::abs(gx)));
  }
}

TEST(Manufactured, SmallDriftLimit) {
  const Manufactured a = manufactured_2d({0.0, 0.0});
  const Manufactured b = manufactured_2d({1e-6, 1e-6});
  for (const Point p : {Point{0.2, 0.7}, Point{0.5, 0.5}}) {
    EXPECT_NEAR(a.u(p), p[0] * (1 - p[0]) * p[1] * (1 - p[1]), 1e-15);
    EXPECT_NEAR(b.u(p), a.u(p), 1e-6);
    EXPECT_NEAR(a.f(p), 2 * p[1] * (1 - p[1]) + 2 * p[0] * (1 - p[0]), 1e-14);
  }
}

// ---- rates and errors ------------------------------------------------------

TEST(Rates, Examples) {
  const auto r = compute_rates({1.0, 0.25, 0.0625}, {1.0, 0.5, 0.25});
  EXPECT_FALSE(r[0].has_value());
  EXPECT_NEAR(*r[1], 2.0, 1e-15);
  EXPECT_NEAR(*r[2], 2.0, 1e-15);
  const auto z = compute_rates({1.0, 0.0}, {1.0, 0.5});
  EXPECT_FALSE(z[1].has_value());
  EXPECT_THROW(compute_rates({1.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(compute_rates({1.0, 2.0}, {1.0}), std::invalid_argument);
}

TEST(Errors, ExactForLinearData) {
  const auto u = [](const Point& x) { return 2.0 - x[0] + 0.5 * x[1]; };
  const Mesh mesh = build_uniform_cartesian(2, 4);
  ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {0.0, 0.0});
  spec.dirichlet = u;
  SolverConfig cfg;
  cfg.degree = 1;
  const Solution sol = solve(mesh, spec, cfg);
  const PostProcessed post = postprocess(mesh, spec, cfg, sol);
  const MetricSet e = compute_errors(mesh, sol, {u, [](const Point&) { return Point{1.0, -0.5}; },
                                                 [](const Point&) { return 0.0; }}, &post);
  EXPECT_EQ(e.size(), 10u);
  for (const auto& [name, v] : e) EXPECT_LT(v, 1e-10) << name;
}

TEST(Errors, DetectsConstantOffset) {
  const Mesh mesh = build_uniform_cartesian(2, 2);
  ProblemSpec spec = ProblemSpec::constant(mesh, 1.0, {0.0, 0.0});
  spec.dirichlet = [](const Point&) { return 1.0; };
  SolverConfig cfg;
  cfg.degree = 0;
  const Solution sol = solve(mesh, spec, cfg);
  const MetricSet e = compute_errors(mesh, sol, {[](const Point&) { return 1.25; }, [](const Point&) { return Point{}; }, {}});
  EXPECT_NEAR(e.at("U_L2"), 0.25, 1e-12);
  EXPECT_NEAR(e.at("U_Linf"), 0.25, 1e-12);
  EXPECT_NEAR(e.at("U_avg"), 0.25 * 0.25, 1e-12);  // cell measure 1/4
  EXPECT_EQ(e.count("Ustar_L2"), 0u);
}

TEST(Convergence, ReportLayout) {
  const ConvergenceReport r = run_convergence(1, 2, {10.0, 10.0}, 1.0, Method::WHDG);
  EXPECT_EQ(r.rows.size(), 20u);
  EXPECT_EQ(r.log.size(), 2u);
  EXPECT_TRUE(r.final_rate("U_L2").has_value());
  EXPECT_FALSE(r.metric("U_L2").front().rate.has_value());
  EXPECT_EQ(r.metric("J_L2").back().cells, 64);
  std::ostringstream os;
  write_convergence_csv(os, r);
  std::string first;
  std::istringstream in(os.str());
  std::getline(in, first);
  EXPECT_EQ(first, "method,degree,level,cells,dofs,h,metric,error,rate");
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 20);
  EXPECT_THROW(run_convergence(1, 7, {1.0, 1.0}, 1.0, Method::HDG), std::invalid_argument);
  EXPECT_THROW(parse_method("fvm"), std::invalid_argument);
}

TEST(Convergence, FormatNumberHasSixteenDigits) {
  EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(format_number(2.0), "2");
}

TEST(Harness, SgTraceDifference) {
  EXPECT_LT(sg_trace_difference(8, 1.0, 5.0, 1e-10), 1e-6);
  EXPECT_GT(sg_trace_difference(8, 1.0, 5.0, 1.0), 1e-3);  // tau = 1 is visibly different
  EXPECT_THROW(sg_trace_difference(1, 1.0, 5.0, 1e-10), std::invalid_argument);
}

TEST(Harness, QuadratureCsv) {
  const auto rows = quadrature_check({0.0, 3.0}, 2);
  EXPECT_EQ(rows.size(), 2u * (2 + 4));
  for (const auto& r : rows) EXPECT_LT(r.error, 1e-12);
  std::ostringstream os;
  write_quadrature_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, 21), "b,n,m,relative_error\n");
}

// ---- p-i-n ---------------------------------------------------------------

TEST(Pin, ThermalVoltageAndScaling) {
  const PinConfig c;
  EXPECT_NEAR(c.thermal_voltage(), 0.025851999786435535, 1e-15);
  const PinScaling s(c);
  EXPECT_NEAR(s.from_potential(s.to_potential(0.37)), 0.37, 1e-16);
  EXPECT_NEAR(s.from_density(s.to_density(3.1e22)) / 3.1e22, 1.0, 1e-15);
  EXPECT_NEAR(s.electrons(s.conduction_level), 1.0, 1e-15);
  EXPECT_NEAR(s.holes(s.valence_level), s.valence, 1e-15 * s.valence);
}

TEST(Pin, DopingProfile) {
  const PinConfig c;
  EXPECT_EQ(c.doping(0.0), c.donor_density);
  EXPECT_EQ(c.doping(0.5 * c.length), 0.0);
  EXPECT_EQ(c.doping(c.length), -c.acceptor_density);
}

TEST(Pin, NeutralPotential) {
  const PinScaling s{PinConfig{}};
  const double intrinsic = 0.5 * (std::log(s.valence) + s.valence_level + s.conduction_level);
  EXPECT_NEAR(neutral_potential(s, 0.0), intrinsic, 1e-10);
  for (double c : {1.0, -9.66, 1e-3}) {
    const double psi = neutral_potential(s, c);
    EXPECT_NEAR((s.holes(psi) - s.electrons(psi) + c) / std::abs(c), 0.0, 1e-10);
  }
}

TEST(Pin, JacobianMatchesDifferences) {
  const PinConfig pin;
  const PoissonDiscretization disc = poisson_discretization(pin_grid_breakpoints(1, pin.length), pin);
  const std::size_t n = disc.nodes.size();
  std::vector<double> psi(n);
  for (std::size_t i = 0; i < n; ++i) psi[i] = disc.left + (disc.right - disc.left) * disc.nodes[i] + 0.3 * std::sin(7.0 * i);
  std::vector<double> sub, diag, sup;
  const std::vector<double> r = disc.residual(psi, &sub, &diag, &sup);
  const double h = 1e-6;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> p = psi, m = psi;
    p[j] += h;
    m[j] -= h;
    const std::vector<double> rp = disc.residual(p), rm = disc.residual(m);
    for (std::size_t i = 0; i < n; ++i) {
      const double fd = (rp[i] - rm[i]) / (2 * h);
      double exact = 0.0;
      if (i == j) exact = diag[i];
      else if (j + 1 == i) exact = sub[i];
      else if (j == i + 1) exact = sup[i];
      EXPECT_NEAR(fd, exact, 1e-6 * std::max(1.0, std::abs(exact))) << i << "," << j;
    }
  }
}

TEST(Pin, PoissonConverges) {
  const PinConfig pin;
  const std::vector<double> nodes = pin_grid_breakpoints(3, pin.length);
  const PoissonResult res = solve_nonlinear_poisson(nodes, pin);
  EXPECT_LE(res.iterations, 30);
  const PoissonDiscretization disc = poisson_discretization(nodes, pin);
  const std::vector<double> r = disc.residual(res.scaled);
  EXPECT_LE(std::abs(r.front()), 1e-13);
  EXPECT_LE(std::abs(r.back()), 1e-13);
  EXPECT_LE(res.history.back(), 1e-10 * res.history.front());
  // The n side sits above the p side.
  EXPECT_GT(res.potential.front(), res.potential.back());
}

TEST(Pin, JsonRoundTrip) {
  PinConfig c;
  c.temperature = 310.0;
  const nlohmann::json j = c;
  const PinConfig back = j.get<PinConfig>();
  EXPECT_EQ(back.temperature, 310.0);
  EXPECT_EQ(back.acceptor_density, c.acceptor_density);
  const PinConfig partial = nlohmann::json::parse(R"({"length": 1e-5})").get<PinConfig>();
  EXPECT_EQ(partial.length, 1e-5);
  EXPECT_EQ(partial.hole_mobility, PinConfig{}.hole_mobility);
  EXPECT_THROW(nlohmann::json::parse(R"({"lenght": 1e-5})").get<PinConfig>(), std::invalid_argument);
}

TEST(Pin, ShippedConfigMatchesDefaults) {
  const PinConfig file = load_pin_config(WHDG_DATA_DIR "/pin_default.json");
  const nlohmann::json a = file, b = PinConfig{};
  EXPECT_EQ(a, b);
  EXPECT_THROW(load_pin_config(WHDG_DATA_DIR "/missing.json"), std::runtime_error);
}

TEST(Pin, BenchmarkIsDeterministic) {
  const PinConfig pin;
  const PinReport a = run_pin_benchmark(2, pin), b = run_pin_benchmark(2, pin);
  std::ostringstream sa, sb;
  write_pin_csv(sa, a);
  write_pin_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.reference_cells, 18432);
  EXPECT_EQ(a.rows.size(), 2u * 3 * 3);
  EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')), "method,level,cells,h,metric,value,rate");
  for (const auto& r : a.series("whdg", "L2")) EXPECT_GT(r.value, 0.0);
  EXPECT_THROW(run_pin_benchmark(1, pin), std::invalid_argument);
}
