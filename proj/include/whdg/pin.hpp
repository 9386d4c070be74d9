#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "whdg/harness.hpp"
#include "whdg/hdg.hpp"
#include "whdg/mesh.hpp"
#include "whdg/postproc.hpp"
#include "whdg/sgfv.hpp"

namespace whdg {

/// Device constants in SI units (energies in eV).
struct PinConfig {
  double length = 6e-6;
  double temperature = 300.0;
  double permittivity = 1.14219022847298e-10;
  double valence_density = 9.139615903601645e24;
  double valence_energy = 0.0;
  double conduction_density = 4.351959895879690e23;
  double conduction_energy = 1.424;
  double hole_mobility = 4e-2;
  double acceptor_density = 4.204223315656757e24;
  double donor_density = 4.351959895879690e23;
  double elementary_charge = 1.602176634e-19;
  double boltzmann = 1.380649e-23;

  double thermal_voltage() const { return boltzmann * temperature / elementary_charge; }

  /// N_D on [0, l/3), 0 on [l/3, 2l/3), -N_A on [2l/3, l].
  double doping(double x) const {
    if (x < length / 3.0) return donor_density;
    if (x < 2.0 * length / 3.0) return 0.0;
    return -acceptor_density;
  }

  void validate() const {
    for (double v : {length, temperature, permittivity, valence_density, conduction_density, hole_mobility,
                     acceptor_density, donor_density, elementary_charge, boltzmann})
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("PinConfig: constants must be positive");
  }
};

inline void to_json(nlohmann::json& j, const PinConfig& c) {
  j = nlohmann::json{{"length", c.length},
                     {"temperature", c.temperature},
                     {"permittivity", c.permittivity},
                     {"valence_density", c.valence_density},
                     {"valence_energy", c.valence_energy},
                     {"conduction_density", c.conduction_density},
                     {"conduction_energy", c.conduction_energy},
                     {"hole_mobility", c.hole_mobility},
                     {"acceptor_density", c.acceptor_density},
                     {"donor_density", c.donor_density},
                     {"elementary_charge", c.elementary_charge},
                     {"boltzmann", c.boltzmann}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, PinConfig& c) {
  const nlohmann::json defaults = c;
  for (const auto& [key, value] : j.items())
    if (!defaults.contains(key)) throw std::invalid_argument("PinConfig: unknown key '" + key + "'");
  c.length = j.value("length", c.length);
  c.temperature = j.value("temperature", c.temperature);
  c.permittivity = j.value("permittivity", c.permittivity);
  c.valence_density = j.value("valence_density", c.valence_density);
  c.valence_energy = j.value("valence_energy", c.valence_energy);
  c.conduction_density = j.value("conduction_density", c.conduction_density);
  c.conduction_energy = j.value("conduction_energy", c.conduction_energy);
  c.hole_mobility = j.value("hole_mobility", c.hole_mobility);
  c.acceptor_density = j.value("acceptor_density", c.acceptor_density);
  c.donor_density = j.value("donor_density", c.donor_density);
  c.elementary_charge = j.value("elementary_charge", c.elementary_charge);
  c.boltzmann = j.value("boltzmann", c.boltzmann);
}

inline PinConfig load_pin_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  PinConfig config = nlohmann::json::parse(in).get<PinConfig>();
  config.validate();
  return config;
}

/// Dimensionless form: x / l, psi / U_T, densities / N_c.
struct PinScaling {
  double length = 1.0;
  double voltage = 1.0;
  double density = 1.0;
  double valence = 1.0;       // N_v / N_c
  double valence_level = 0.0;    // E_v / U_T
  double conduction_level = 0.0; // E_c / U_T
  double debye2 = 1.0;        // eps U_T / (q N_c l^2)

  explicit PinScaling(const PinConfig& c) {
    length = c.length;
    voltage = c.thermal_voltage();
    density = c.conduction_density;
    valence = c.valence_density / c.conduction_density;
    valence_level = c.valence_energy / voltage;
    conduction_level = c.conduction_energy / voltage;
    debye2 = c.permittivity * voltage / (c.elementary_charge * c.conduction_density * c.length * c.length);
  }

  double to_potential(double psi) const { return psi / voltage; }
  double from_potential(double psi) const { return psi * voltage; }
  double to_density(double p) const { return p / density; }
  double from_density(double p) const { return p * density; }

  /// Scaled hole and electron densities at scaled potential psi.
  double holes(double psi) const { return valence * std::exp(valence_level - psi); }
  double electrons(double psi) const { return std::exp(psi - conduction_level); }
};

class NewtonError : public std::runtime_error {
 public:
  NewtonError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history(std::move(history)) {}
  std::vector<double> history;
};

/// Root of  p(psi) - n(psi) + c = 0  in scaled units by bisection with
/// Newton steps inside the bracket.
inline double neutral_potential(const PinScaling& s, double c) {
  const auto f = [&](double psi) { return s.holes(psi) - s.electrons(psi) + c; };
  const auto df = [&](double psi) { return -s.holes(psi) - s.electrons(psi); };
  double lo = std::min(s.valence_level, s.conduction_level) - 10.0;
  double hi = std::max(s.valence_level, s.conduction_level) + 10.0;
  while (f(lo) < 0.0) lo -= 10.0;
  while (f(hi) > 0.0) hi += 10.0;
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    const double fx = f(x);
    if (fx > 0.0) lo = x;
    else hi = x;
    double next = x - fx / df(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x)) || hi - lo <= 1e-14 * std::max(1.0, std::abs(x)))
      return next;
    x = next;
  }
  return x;
}

/// Box-method finite differences for  -lambda^2 psi'' = p - n + C  on scaled
/// nodes, doping constant per cell. Returns the residual and, optionally, the
/// tridiagonal Jacobian (sub, diag, super).
struct PoissonDiscretization {
  std::vector<double> nodes;        // scaled
  std::vector<double> cell_doping;  // scaled, per cell
  PinScaling scaling;
  double left = 0.0, right = 0.0;   // Dirichlet potentials (scaled)

  std::vector<double> residual(const std::vector<double>& psi, std::vector<double>* sub = nullptr,
                               std::vector<double>* diag = nullptr, std::vector<double>* sup = nullptr) const {
    const std::size_t n = nodes.size();
    std::vector<double> r(n, 0.0);
    if (sub) {
      sub->assign(n, 0.0);
      diag->assign(n, 0.0);
      sup->assign(n, 0.0);
    }
    const double l2 = scaling.debye2;
    r[0] = psi[0] - left;
    r[n - 1] = psi[n - 1] - right;
    if (sub) {
      (*diag)[0] = 1.0;
      (*diag)[n - 1] = 1.0;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double hl = nodes[i] - nodes[i - 1];
      const double hr = nodes[i + 1] - nodes[i];
      const double box = 0.5 * (hl + hr);
      const double p = scaling.holes(psi[i]);
      const double e = scaling.electrons(psi[i]);
      r[i] = -l2 * ((psi[i + 1] - psi[i]) / hr - (psi[i] - psi[i - 1]) / hl) - box * (p - e) -
             0.5 * (hl * cell_doping[i - 1] + hr * cell_doping[i]);
      if (sub) {
        (*sub)[i] = -l2 / hl;
        (*sup)[i] = -l2 / hr;
        (*diag)[i] = l2 / hl + l2 / hr + box * (p + e);
      }
    }
    return r;
  }
};

namespace detail {
inline std::vector<double> thomas(const std::vector<double>& a, const std::vector<double>& b,
                                  const std::vector<double>& c, const std::vector<double>& d) {
  const std::size_t n = b.size();
  std::vector<double> cp(n), dp(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = b[i] - (i > 0 ? a[i] * cp[i - 1] : 0.0);
    cp[i] = c[i] / m;
    dp[i] = (d[i] - (i > 0 ? a[i] * dp[i - 1] : 0.0)) / m;
  }
  for (std::size_t i = n; i-- > 0;) x[i] = dp[i] - (i + 1 < n ? cp[i] * x[i + 1] : 0.0);
  return x;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}
}  // namespace detail

inline PoissonDiscretization poisson_discretization(const std::vector<double>& nodes, const PinConfig& pin) {
  if (nodes.size() < 3) throw std::invalid_argument("solve_nonlinear_poisson: need at least two cells");
  PoissonDiscretization disc{{}, {}, PinScaling(pin), 0.0, 0.0};
  const PinScaling& s = disc.scaling;
  disc.nodes.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) disc.nodes[i] = nodes[i] / pin.length;
  disc.cell_doping.resize(nodes.size() - 1);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
    disc.cell_doping[i] = s.to_density(pin.doping(0.5 * (nodes[i] + nodes[i + 1])));
  disc.left = neutral_potential(s, s.to_density(pin.doping(nodes.front())));
  disc.right = neutral_potential(s, s.to_density(pin.doping(nodes.back())));
  return disc;
}

struct PoissonResult {
  std::vector<double> potential;  // volts, nodal
  std::vector<double> scaled;     // psi / U_T, nodal
  std::vector<double> history;    // residual max-norm per Newton step
  int iterations = 0;
};

/// Damped Newton for the equilibrium potential on physical nodes (metres).
inline PoissonResult solve_nonlinear_poisson(const std::vector<double>& nodes, const PinConfig& pin) {
  pin.validate();
  const PoissonDiscretization disc = poisson_discretization(nodes, pin);
  const PinScaling& s = disc.scaling;
  const std::size_t n = nodes.size();

  // Start from local charge neutrality with the box-averaged doping.
  std::vector<double> psi(n);
  psi[0] = disc.left;
  psi[n - 1] = disc.right;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hl = disc.nodes[i] - disc.nodes[i - 1], hr = disc.nodes[i + 1] - disc.nodes[i];
    psi[i] = neutral_potential(s, (hl * disc.cell_doping[i - 1] + hr * disc.cell_doping[i]) / (hl + hr));
  }

  PoissonResult result;
  std::vector<double> sub, diag, sup;
  std::vector<double> r = disc.residual(psi, &sub, &diag, &sup);
  const double r0 = detail::max_abs(r);
  double rn = r0;
  result.history.push_back(rn);
  int it = 0;
  while (rn > 1e-10 * r0 && rn > 0.0) {
    if (it == 100) {
      std::ostringstream os;
      os << "solve_nonlinear_poisson: no convergence after 100 damped steps, residual " << rn;
      throw NewtonError(os.str(), result.history);
    }
    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = -r[i];
    const std::vector<double> delta = detail::thomas(sub, diag, sup, rhs);
    // Halve the step until the residual decreases.
    double lambda = 1.0;
    std::vector<double> trial(n), rt;
    for (int k = 0; k < 40; ++k) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = psi[i] + lambda * delta[i];
      rt = disc.residual(trial);
      if (detail::max_abs(rt) < rn || k == 39) break;
      lambda *= 0.5;
    }
    psi = trial;
    r = disc.residual(psi, &sub, &diag, &sup);
    rn = detail::max_abs(r);
    result.history.push_back(rn);
    ++it;
    if (detail::max_abs(delta) * lambda < 1e-15) break;
  }
  result.iterations = it;
  result.scaled = psi;
  result.potential.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.potential[i] = s.from_potential(psi[i]);
  return result;
}

/// Reference grid: level-7 grid refined four times.
inline std::vector<double> pin_reference_breakpoints(double length) {
  return refine_breakpoints(pin_grid_breakpoints(7, length), 4);
}

struct PinRow {
  std::string method;
  int level = 0;
  int cells = 0;
  double h = 0.0;
  std::string metric;
  double value = 0.0;
  std::optional<double> rate;
};

struct PinReport {
  std::vector<PinRow> rows;
  int reference_cells = 0;
  int newton_iterations = 0;
  std::vector<std::string> log;

  std::vector<PinRow> series(const std::string& method, const std::string& metric) const {
    std::vector<PinRow> out;
    for (const auto& r : rows)
      if (r.method == method && r.metric == metric) out.push_back(r);
    return out;
  }
};

namespace detail {
/// L^2(0,1) distance between two fields on [0,1], integrated segment-wise on
/// the union of breakpoints with a 4-point Gauss rule.
template <class A, class B>
double l2_distance(const std::vector<double>& breaks, const A& a, const B& b) {
  static const Rule1D rule = gauss_legendre(4);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double x0 = breaks[i], h = breaks[i + 1] - breaks[i];
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double x = x0 + h * rule.nodes[q];
      const double d = a(x) - b(x);
      sum += h * rule.weights[q] * d * d;
    }
  }
  return std::sqrt(sum);
}

inline std::vector<double> merge_breaks(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  std::vector<double> out;
  for (double x : a)
    if (out.empty() || x - out.back() > 1e-14) out.push_back(x);
  return out;
}

/// Piecewise-constant field on sorted breakpoints.
struct CellwiseConstant {
  std::vector<double> breaks;
  std::vector<double> values;
  double operator()(double x) const {
    auto it = std::upper_bound(breaks.begin(), breaks.end(), x);
    std::size_t i = it == breaks.begin() ? 0 : static_cast<std::size_t>(it - breaks.begin()) - 1;
    return values[std::min(i, values.size() - 1)];
  }
};
}  // namespace detail

/// Hole density at equilibrium on levels 1..levels with FVM-SG, standard HDG
/// (k=0) and W-HDG (k=0), compared with a fine SG reference. All solves run
/// in scaled units; reported errors are in m^-3 m^{1/2}. `tau` is the HDG
/// stabilization in SI units (m/s after dividing the flux by the mobility);
/// the scaled value is tau * l / U_T.
inline PinReport run_pin_benchmark(int levels, const PinConfig& pin, double tau = 1.0) {
  if (levels < 2 || levels > 7) throw std::invalid_argument("run_pin_benchmark: levels must be in [2, 7]");
  if (!(tau > 0.0)) throw std::invalid_argument("run_pin_benchmark: tau must be positive");
  pin.validate();
  const PinScaling s(pin);
  PinReport report;

  // Reference potential and density.
  const std::vector<double> ref_nodes = pin_reference_breakpoints(pin.length);
  const PoissonResult poisson = solve_nonlinear_poisson(ref_nodes, pin);
  report.newton_iterations = poisson.iterations;
  std::vector<double> xr(ref_nodes.size());
  for (std::size_t i = 0; i < xr.size(); ++i) xr[i] = ref_nodes[i] / pin.length;
  const PiecewiseLinear psi_ref(xr, poisson.scaled);
  const auto boundary_density = [&](const Point& x) { return s.holes(psi_ref(x[0])); };

  const auto drift_on = [&](const std::vector<double>& pts) {
    std::vector<double> beta(pts.size() - 1);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      beta[i] = -(psi_ref(pts[i + 1]) - psi_ref(pts[i])) / (pts[i + 1] - pts[i]);
    return beta;
  };

  const Mesh ref_mesh = Mesh::tensor({xr});
  report.reference_cells = ref_mesh.num_cells();
  const FVSolution reference = solve_sg(assemble_sg(ref_mesh, 1.0, drift_on(xr), nullptr, boundary_density));
  const PiecewiseLinear p_ref(xr, reference.values);

  const double to_physical = s.density * std::sqrt(pin.length);
  std::vector<double> hs;
  std::map<std::string, std::vector<double>> series;
  std::vector<int> cells;
  for (int level = 1; level <= levels; ++level) {
    std::vector<double> xj = pin_grid_breakpoints(level, pin.length);
    for (double& x : xj) x /= pin.length;
    const Mesh mesh = Mesh::tensor({xj});
    const std::vector<double> breaks = detail::merge_breaks(xr, xj);
    double hmax = 0.0;
    for (std::size_t i = 0; i + 1 < xj.size(); ++i) hmax = std::max(hmax, xj[i + 1] - xj[i]);
    hs.push_back(hmax * pin.length);
    cells.push_back(mesh.num_cells());

    // Vertex-centred SG on the grid nodes: constant on the boxes around each
    // node, linear through the nodes when postprocessed.
    {
      const FVSolution fv = solve_sg(assemble_sg(mesh, 1.0, drift_on(xj), nullptr, boundary_density));
      std::vector<double> boxes{xj.front()};
      for (std::size_t i = 0; i + 1 < xj.size(); ++i) boxes.push_back(0.5 * (xj[i] + xj[i + 1]));
      const detail::CellwiseConstant pc{boxes, fv.values};
      const PiecewiseLinear linear(xj, fv.values);
      const std::vector<double> box_breaks = detail::merge_breaks(breaks, boxes);
      series["fvm/L2"].push_back(to_physical * detail::l2_distance(box_breaks, pc, p_ref));
      series["fvm/L2_linear"].push_back(to_physical * detail::l2_distance(breaks, linear, p_ref));
      series["fvm/min"].push_back(s.from_density(*std::min_element(fv.values.begin(), fv.values.end())));
    }

    for (const Method method : {Method::HDG, Method::WHDG}) {
      const std::vector<double> beta = drift_on(xj);
      ProblemSpec spec;
      spec.alpha = 1.0;
      for (double b : beta) spec.drift.push_back({b, 0.0});
      spec.dirichlet = boundary_density;
      SolverConfig config;
      config.degree = 0;
      config.tau = tau * pin.length / s.voltage;
      config.weight_mode = method == Method::WHDG ? WeightMode::WeightedCentered : WeightMode::Unweighted;
      Solution sol;
      try {
        sol = solve(mesh, spec, config);
      } catch (const std::exception& e) {
        throw std::runtime_error(std::string("pin benchmark, ") + to_string(method) + " level " +
                                 std::to_string(level) + ": " + e.what());
      }
      report.log.push_back(sol.diagnostics.log_line() + " level=" + std::to_string(level));
      std::vector<double> u(mesh.num_cells());
      double lowest = std::numeric_limits<double>::infinity();
      for (int c = 0; c < mesh.num_cells(); ++c) {
        u[c] = sol.scalar[c][0];
        lowest = std::min(lowest, u[c]);
      }
      for (const auto& t : sol.trace) lowest = std::min(lowest, t[0]);
      const detail::CellwiseConstant pc{xj, u};
      const PiecewiseLinear linear = trace_linear_faces(mesh, sol);
      const std::string name = to_string(method);
      series[name + "/L2"].push_back(to_physical * detail::l2_distance(breaks, pc, p_ref));
      series[name + "/L2_linear"].push_back(to_physical * detail::l2_distance(breaks, linear, p_ref));
      series[name + "/min"].push_back(s.from_density(lowest));
    }
  }

  for (const auto& [key, values] : series) {
    const std::string method = key.substr(0, key.find('/'));
    const std::string metric = key.substr(key.find('/') + 1);
    const auto rates = metric == "min" ? std::vector<std::optional<double>>(values.size()) : compute_rates(values, hs);
    for (std::size_t i = 0; i < values.size(); ++i)
      report.rows.push_back(
          PinRow{method, static_cast<int>(i) + 1, cells[i], hs[i], metric, values[i], rates[i]});
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const PinRow& a, const PinRow& b) {
    if (a.level != b.level) return a.level < b.level;
    return a.method < b.method;
  });
  return report;
}

inline void write_pin_csv(std::ostream& os, const PinReport& report) {
  os << "method,level,cells,h,metric,value,rate\n";
  for (const auto& r : report.rows)
    os << r.method << ',' << r.level << ',' << r.cells << ',' << format_number(r.h) << ',' << r.metric << ','
       << format_number(r.value) << ',' << (r.rate ? format_number(*r.rate) : std::string("-")) << '\n';
}

}  // namespace whdg
