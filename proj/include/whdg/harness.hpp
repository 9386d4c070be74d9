#pragma once

#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "whdg/hdg.hpp"
#include "whdg/mesh.hpp"
#include "whdg/postproc.hpp"
#include "whdg/problem.hpp"
#include "whdg/quadrature.hpp"
#include "whdg/sgfv.hpp"

namespace whdg {

using VectorField = std::function<Point(const Point&)>;

/// Exact data of the unit-square study: u vanishes on the boundary and has
/// exponential layers at x_i = 1 for beta_i > 0.
struct Manufactured {
  double alpha = 1.0;
  Point beta{0.0, 0.0};
  ScalarField u;
  VectorField grad_u;
  VectorField j;  // beta u - alpha grad u
  ScalarField f;  // div j
};

namespace detail {
/// x (1 - e^{(x-1)b}) / (1 - e^{-b}) and its first two derivatives;
/// x (1 - x) for |b| < 1e-8.
struct Profile {
  double b = 0.0;
  double value(double x) const {
    if (std::abs(b) < 1e-8) return x * (1.0 - x);
    return x * -std::expm1((x - 1.0) * b) / -std::expm1(-b);
  }
  double d1(double x) const {
    if (std::abs(b) < 1e-8) return 1.0 - 2.0 * x;
    const double e = std::exp((x - 1.0) * b);
    return (-std::expm1((x - 1.0) * b) - x * b * e) / -std::expm1(-b);
  }
  double d2(double x) const {
    if (std::abs(b) < 1e-8) return -2.0;
    const double e = std::exp((x - 1.0) * b);
    return -b * e * (2.0 + x * b) / -std::expm1(-b);
  }
};
}  // namespace detail

inline Manufactured manufactured_2d(Point beta, double alpha = 1.0) {
  Manufactured m;
  m.alpha = alpha;
  m.beta = beta;
  const detail::Profile X{beta[0]}, Y{beta[1]};
  m.u = [X, Y](const Point& p) { return X.value(p[0]) * Y.value(p[1]); };
  m.grad_u = [X, Y](const Point& p) { return Point{X.d1(p[0]) * Y.value(p[1]), X.value(p[0]) * Y.d1(p[1])}; };
  m.j = [X, Y, beta, alpha](const Point& p) {
    const double u = X.value(p[0]) * Y.value(p[1]);
    return Point{beta[0] * u - alpha * X.d1(p[0]) * Y.value(p[1]), beta[1] * u - alpha * X.value(p[0]) * Y.d1(p[1])};
  };
  m.f = [X, Y, beta, alpha](const Point& p) {
    const double x = p[0], y = p[1];
    const double lap = X.d2(x) * Y.value(y) + X.value(x) * Y.d2(y);
    return -alpha * lap + beta[0] * X.d1(x) * Y.value(y) + beta[1] * X.value(x) * Y.d1(y);
  };
  return m;
}

/// Error metrics of one solve; absent entries are simply not computed.
using MetricSet = std::map<std::string, double>;

struct ExactSolution {
  ScalarField u;
  VectorField j;
  ScalarField div_j;  // optional
};

/// L^2 and L^inf errors of U and J, the worst cell average, and the same
/// norms for whatever postprocessed fields are supplied.
inline MetricSet compute_errors(const Mesh& mesh, const Solution& sol, const ExactSolution& exact,
                                const PostProcessed* post = nullptr) {
  const int d = mesh.dim();
  const int k = sol.degree;
  const int l2_points = std::max(k + 3, 6);
  MetricSet out;
  double eu = 0.0, ej = 0.0, einf = 0.0, avg = 0.0;
  double es = 0.0, es_inf = 0.0, eh = 0.0, eh_inf = 0.0, ed = 0.0, edd = 0.0;
  const Rule1D sample = gauss_legendre(6);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Cell& cell = mesh.cell(c);
    const QuadratureRule rule = plain_cell_rule(cell, d, l2_points);
    double mean = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point& ref = rule.reference[q];
      const Point& x = rule.points[q];
      const double w = rule.weights[q];
      const double u = exact.u(x);
      const double du = u - sol.u(mesh, c, ref);
      eu += w * du * du;
      mean += w * du;
      const Point jx = exact.j(x);
      const Point jh = sol.j(mesh, c, ref);
      for (int a = 0; a < d; ++a) ej += w * (jx[a] - jh[a]) * (jx[a] - jh[a]);
      if (post) {
        const double a1 = u - post->l2min.value(c, ref);
        const double a2 = u - post->resolve.value(c, ref);
        es += w * a1 * a1;
        eh += w * a2 * a2;
        const Point jd = post->flux.vector(c, ref);
        for (int a = 0; a < d; ++a) ed += w * (jx[a] - jd[a]) * (jx[a] - jd[a]);
        if (exact.div_j) {
          const double dd = exact.div_j(x) - post->flux.divergence(mesh, c, ref);
          edd += w * dd * dd;
        }
      }
    }
    avg = std::max(avg, std::abs(mean));
    const int ny = d == 1 ? 1 : 6;
    for (int i = 0; i < 6; ++i) {
      for (int jj = 0; jj < ny; ++jj) {
        const Point ref{sample.nodes[i], d == 1 ? 0.0 : sample.nodes[jj]};
        const Point x = cell.map(ref);
        const double u = exact.u(x);
        einf = std::max(einf, std::abs(u - sol.u(mesh, c, ref)));
        if (post) {
          es_inf = std::max(es_inf, std::abs(u - post->l2min.value(c, ref)));
          eh_inf = std::max(eh_inf, std::abs(u - post->resolve.value(c, ref)));
        }
      }
    }
  }
  out["J_L2"] = std::sqrt(ej);
  out["U_L2"] = std::sqrt(eu);
  out["U_Linf"] = einf;
  out["U_avg"] = avg;
  if (post) {
    out["Ustar_L2"] = std::sqrt(es);
    out["Ustar_Linf"] = es_inf;
    out["Uloc_L2"] = std::sqrt(eh);
    out["Uloc_Linf"] = eh_inf;
    out["Jdiv_L2"] = std::sqrt(ed);
    if (exact.div_j) out["divJdiv_L2"] = std::sqrt(edd);
  }
  return out;
}

/// rate_{j+1} = log(e_{j+1}/e_j) / log(h_{j+1}/h_j); undefined for the first
/// level and whenever an error is zero or not finite.
inline std::vector<std::optional<double>> compute_rates(const std::vector<double>& errors,
                                                        const std::vector<double>& h) {
  if (errors.size() != h.size()) throw std::invalid_argument("compute_rates: size mismatch");
  if (errors.size() < 2) throw std::invalid_argument("compute_rates: need at least two levels");
  std::vector<std::optional<double>> rates(errors.size());
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const double a = errors[i - 1], b = errors[i];
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) continue;
    rates[i] = std::log(b / a) / std::log(h[i] / h[i - 1]);
  }
  return rates;
}

enum class Method { WHDG, HDG };

inline const char* to_string(Method m) { return m == Method::WHDG ? "whdg" : "hdg"; }

inline Method parse_method(const std::string& s) {
  if (s == "whdg") return Method::WHDG;
  if (s == "hdg") return Method::HDG;
  throw std::invalid_argument("unknown method '" + s + "' (expected whdg or hdg)");
}

struct ConvergenceRow {
  int level = 0;
  int cells = 0;
  long dofs = 0;
  double h = 0.0;
  std::string metric;
  double error = 0.0;
  std::optional<double> rate;
};

struct ConvergenceReport {
  int degree = 0;
  Method method = Method::WHDG;
  Point beta{0.0, 0.0};
  double tau = 1.0;
  std::vector<ConvergenceRow> rows;
  std::vector<std::string> log;  // one diagnostics line per solve

  /// Rows of one metric, in level order.
  std::vector<ConvergenceRow> metric(const std::string& name) const {
    std::vector<ConvergenceRow> out;
    for (const auto& r : rows)
      if (r.metric == name) out.push_back(r);
    return out;
  }

  std::optional<double> final_rate(const std::string& name) const {
    const auto m = metric(name);
    if (m.empty()) return std::nullopt;
    return m.back().rate;
  }
};

/// Level j uses n = 2^{j+1} cells per axis on the unit square.
inline ConvergenceReport run_convergence(int degree, int levels, Point beta, double tau, Method method,
                                         int first_level = 1) {
  if (levels < 1 || first_level < 1 || first_level + levels - 1 > 6)
    throw std::invalid_argument("run_convergence: levels must stay within 1..6");
  ConvergenceReport report;
  report.degree = degree;
  report.method = method;
  report.beta = beta;
  report.tau = tau;
  const Manufactured m = manufactured_2d(beta);
  const ExactSolution exact{m.u, m.j, m.f};

  std::map<std::string, std::vector<double>> errors;
  std::vector<double> hs;
  std::vector<ConvergenceRow> base;
  for (int j = first_level; j < first_level + levels; ++j) {
    const int n = 1 << (j + 1);
    const Mesh mesh = build_uniform_cartesian(2, n);
    ProblemSpec spec = ProblemSpec::constant(mesh, m.alpha, beta);
    spec.source = m.f;
    SolverConfig config;
    config.degree = degree;
    config.tau = tau;
    config.weight_mode = method == Method::WHDG ? WeightMode::WeightedCentered : WeightMode::Unweighted;
    MetricSet metrics;
    try {
      const Solution sol = solve(mesh, spec, config);
      report.log.push_back(sol.diagnostics.log_line() + " level=" + std::to_string(j));
      const PostProcessed post = postprocess(mesh, spec, config, sol);
      metrics = compute_errors(mesh, sol, exact, &post);
    } catch (const std::exception& e) {
      throw std::runtime_error("run_convergence level " + std::to_string(j) + ": " + e.what());
    }
    const double h = std::sqrt(2.0) / n;
    hs.push_back(h);
    ConvergenceRow row;
    row.level = j;
    row.cells = mesh.num_cells();
    row.dofs = static_cast<long>(mesh.num_cells()) * 3 * (degree + 1) * (degree + 1);
    row.h = h;
    base.push_back(row);
    for (const auto& [name, value] : metrics) errors[name].push_back(value);
  }
  for (const auto& [name, errs] : errors) {
    const auto rates = levels >= 2 ? compute_rates(errs, hs) : std::vector<std::optional<double>>(errs.size());
    for (std::size_t i = 0; i < errs.size(); ++i) {
      ConvergenceRow row = base[i];
      row.metric = name;
      row.error = errs[i];
      row.rate = rates[i];
      report.rows.push_back(row);
    }
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ConvergenceRow& a, const ConvergenceRow& b) { return a.level < b.level; });
  return report;
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(16) << v;
  return os.str();
}

inline void write_convergence_csv(std::ostream& os, const ConvergenceReport& report) {
  os << "method,degree,level,cells,dofs,h,metric,error,rate\n";
  for (const auto& r : report.rows) {
    os << to_string(report.method) << ',' << report.degree << ',' << r.level << ',' << r.cells << ',' << r.dofs << ','
       << format_number(r.h) << ',' << r.metric << ',' << format_number(r.error) << ','
       << (r.rate ? format_number(*r.rate) : std::string("-")) << '\n';
  }
}

/// Largest entrywise relative difference between the SG matrix and the
/// negated trace matrix of W-HDG (k=0) on a uniform 1D grid. Entries that are
/// zero in the SG matrix are measured against its largest entry.
inline double sg_trace_difference(int cells, double alpha, double beta, double tau) {
  if (cells < 2) throw std::invalid_argument("sg_trace_difference: need at least two cells");
  const Mesh mesh = build_uniform_cartesian(1, cells);
  const ProblemSpec spec = ProblemSpec::constant(mesh, alpha, {beta, 0.0});
  SolverConfig config;
  config.degree = 0;
  config.tau = tau;
  const Eigen::MatrixXd A = Eigen::MatrixXd(condense(mesh, spec, config).matrix);
  const SGSystem sg = assemble_sg(mesh, spec);
  const int n = sg.size();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    M(i, i) = -sg.diag[i];
    if (i > 0) M(i, i - 1) = -sg.lower[i];
    if (i + 1 < n) M(i, i + 1) = -sg.upper[i];
  }
  if (A.rows() != n) throw std::logic_error("sg_trace_difference: trace and SG sizes differ");
  const double scale = M.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double ref = M(i, j) != 0.0 ? std::abs(M(i, j)) : scale;
      worst = std::max(worst, std::abs(A(i, j) - M(i, j)) / ref);
    }
  return worst;
}

struct QuadCheckRow {
  double b = 0.0;
  int n = 0;
  int m = 0;
  double error = 0.0;  // relative
};

/// Monomial moments x^m, m <= 2n-1, of the weighted Gauss rules against
/// analytic_moment.
inline std::vector<QuadCheckRow> quadrature_check(const std::vector<double>& bs, int max_points) {
  std::vector<QuadCheckRow> rows;
  for (double b : bs)
    for (int n = 1; n <= max_points; ++n) {
      const Rule1D rule = weighted_gauss(b, n);
      for (int m = 0; m <= 2 * n - 1; ++m) {
        double sum = 0.0;
        for (int q = 0; q < n; ++q) sum += rule.weights[q] * std::pow(rule.nodes[q], m);
        const double exact = analytic_moment(m, b);
        rows.push_back({b, n, m, std::abs(sum - exact) / std::abs(exact)});
      }
    }
  return rows;
}

inline void write_quadrature_csv(std::ostream& os, const std::vector<QuadCheckRow>& rows) {
  os << "b,n,m,relative_error\n";
  for (const auto& r : rows) os << format_number(r.b) << ',' << r.n << ',' << r.m << ',' << format_number(r.error) << '\n';
}

}  // namespace whdg
