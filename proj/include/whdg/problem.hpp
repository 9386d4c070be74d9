#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "whdg/mesh.hpp"
#include "whdg/quadrature.hpp"

namespace whdg {

using ScalarField = std::function<double(const Point&)>;
/// Boundary flux datum j.n, given the point and the outward unit normal.
using FluxDatum = std::function<double(const Point&, const Point& normal)>;

/// Data of  j + alpha grad u - beta u = 0,  div j = f  with u = g_D on
/// Dirichlet faces and j.n = g_N on Neumann faces. beta is constant per cell.
struct ProblemSpec {
  double alpha = 1.0;
  std::vector<Point> drift;  // one vector per cell
  ScalarField source;        // empty means f = 0
  ScalarField dirichlet;     // empty means g_D = 0
  FluxDatum neumann;         // empty means g_N = 0

  double f(const Point& x) const { return source ? source(x) : 0.0; }
  double g_dirichlet(const Point& x) const { return dirichlet ? dirichlet(x) : 0.0; }
  double g_neumann(const Point& x, const Point& n) const { return neumann ? neumann(x, n) : 0.0; }

  void validate(const Mesh& mesh) const {
    if (!(alpha > 0.0)) throw std::invalid_argument("ProblemSpec: alpha must be positive");
    if (static_cast<int>(drift.size()) != mesh.num_cells())
      throw std::invalid_argument("ProblemSpec: need one drift vector per cell");
    for (const auto& b : drift)
      if (!std::isfinite(b[0]) || !std::isfinite(b[1])) throw std::invalid_argument("ProblemSpec: drift not finite");
  }

  static ProblemSpec constant(const Mesh& mesh, double alpha, Point beta) {
    ProblemSpec spec;
    spec.alpha = alpha;
    if (mesh.dim() == 1) beta[1] = 0.0;
    spec.drift.assign(mesh.num_cells(), beta);
    return spec;
  }
};

enum class WeightMode {
  WeightedCentered,  // x_K at the cell center
  WeightedGlobal,    // x_K = 0 for every cell
  Unweighted,        // mu = 1: standard HDG
};

inline const char* to_string(WeightMode mode) {
  switch (mode) {
    case WeightMode::WeightedCentered: return "whdg-centered";
    case WeightMode::WeightedGlobal: return "whdg-global";
    case WeightMode::Unweighted: return "hdg";
  }
  return "?";
}

/// Whether the transmission condition tests the numerical flux with the
/// plain face measure (default) or with the cell weight. The weighted form
/// only makes sense when mu is continuous across faces.
enum class TransmissionWeighting { Plain, Weighted };

struct SolverConfig {
  int degree = 0;
  double tau = 1.0;
  std::vector<double> face_tau;  // optional per-face override, indexed by face id
  WeightMode weight_mode = WeightMode::WeightedCentered;
  bool chain_1d = false;      // make mu continuous across 1D nodes
  double chain_seed = 0.0;    // x_K of the first cell when chaining
  std::vector<Point> centers; // optional per-cell x_K override (weighted modes)
  TransmissionWeighting transmission = TransmissionWeighting::Plain;
  double linear_tolerance = 1e-12;
  double max_local_condition = 1e14;

  double tau_on(int face) const { return face_tau.empty() ? tau : face_tau.at(face); }

  void validate(const Mesh& mesh) const {
    if (degree < 0 || degree > 5) throw std::invalid_argument("SolverConfig: degree must be in [0, 5]");
    if (!face_tau.empty() && static_cast<int>(face_tau.size()) != mesh.num_faces())
      throw std::invalid_argument("SolverConfig: face_tau needs one entry per face");
    for (int f = 0; f < mesh.num_faces(); ++f)
      if (!(tau_on(f) > 0.0) || !std::isfinite(tau_on(f)))
        throw std::invalid_argument("SolverConfig: tau must be positive on every face");
    if (chain_1d && mesh.dim() != 1) throw std::invalid_argument("SolverConfig: chaining is 1D only");
    if (!centers.empty() && static_cast<int>(centers.size()) != mesh.num_cells())
      throw std::invalid_argument("SolverConfig: centers needs one entry per cell");
  }
};

/// Per-cell shifts x_K making mu continuous at every interior node of a 1D grid.
struct WeightChain {
  std::vector<double> shift;      // x_K; NaN on flat cells
  std::vector<double> log_value;  // log mu at the cell center
  std::vector<bool> flat;         // beta = 0: mu constant on the cell
};

/// Propagates beta_i (x_i - x_{K_i}) = beta_{i+1} (x_i - x_{K_{i+1}}) from
/// left to right, starting with x_{K_1} = seed. A cell with beta = 0 keeps the
/// incoming nodal value of mu as a constant and is flagged.
inline WeightChain chain_xk_1d(const std::vector<double>& nodes, const std::vector<double>& beta, double alpha,
                               double seed = 0.0) {
  const std::size_t n = beta.size();
  if (nodes.size() != n + 1 || n == 0) throw std::invalid_argument("chain_xk_1d: need nodes.size() == cells + 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("chain_xk_1d: alpha must be positive");
  WeightChain chain;
  chain.shift.assign(n, std::numeric_limits<double>::quiet_NaN());
  chain.log_value.assign(n, 0.0);
  chain.flat.assign(n, false);
  // log mu at the left node of the current cell
  double incoming = beta[0] != 0.0 ? -beta[0] * (nodes[0] - seed) / alpha : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xl = nodes[i];
    const double xc = 0.5 * (nodes[i] + nodes[i + 1]);
    if (beta[i] == 0.0) {
      chain.flat[i] = true;
      chain.log_value[i] = incoming;
      continue;
    }
    const double xk = i == 0 ? seed : xl + alpha * incoming / beta[i];
    chain.shift[i] = xk;
    chain.log_value[i] = -beta[i] * (xc - xk) / alpha;
    incoming = -beta[i] * (nodes[i + 1] - xk) / alpha;
  }
  return chain;
}

class WeightOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weights mu_K for every cell under the configured mode. In the unweighted
/// mode the weight drift is zero and mu = 1.
inline std::vector<CellWeight> cell_weights(const Mesh& mesh, const ProblemSpec& spec, const SolverConfig& config) {
  const int nc = mesh.num_cells();
  std::vector<CellWeight> weights(nc);
  std::vector<double> chain_log;
  if (config.chain_1d && config.weight_mode != WeightMode::Unweighted) {
    std::vector<double> beta(nc);
    for (int c = 0; c < nc; ++c) beta[c] = spec.drift[c][0];
    chain_log = chain_xk_1d(mesh.breakpoints()[0], beta, spec.alpha, config.chain_seed).log_value;
  }
  for (int c = 0; c < nc; ++c) {
    const Cell& cell = mesh.cell(c);
    CellWeight& w = weights[c];
    w.alpha = spec.alpha;
    w.center = cell.center();
    if (config.weight_mode == WeightMode::Unweighted) continue;
    w.drift = spec.drift[c];
    if (!chain_log.empty()) {
      w.log_scale = chain_log[c];
    } else if (!config.centers.empty()) {
      const Point& xk = config.centers[c];
      w.log_scale = -(w.drift[0] * (w.center[0] - xk[0]) + w.drift[1] * (w.center[1] - xk[1])) / spec.alpha;
    } else if (config.weight_mode == WeightMode::WeightedGlobal) {
      // x_K = 0: check the exponent at every corner before committing.
      const Point lo = cell.lower, hi = cell.upper();
      for (double x : {lo[0], hi[0]})
        for (double y : {lo[1], hi[1]}) {
          const double e = (w.drift[0] * x + w.drift[1] * (mesh.dim() == 2 ? y : 0.0)) / spec.alpha;
          if (std::abs(e) > 700.0)
            throw WeightOverflow("cell " + std::to_string(c) + ": |beta.x/alpha| = " + std::to_string(std::abs(e)) +
                                 " overflows the global weight; use the centered weight mode");
        }
      w.log_scale = -(w.drift[0] * w.center[0] + w.drift[1] * w.center[1]) / spec.alpha;
    }
  }
  return weights;
}

/// mu_K(x) for cell `c` under the configured mode.
inline double local_weight(const Mesh& mesh, int c, const Point& x, const ProblemSpec& spec,
                           const SolverConfig& config) {
  const Cell& cell = mesh.cell(c);
  constexpr double slack = 1e-12;
  for (int a = 0; a < mesh.dim(); ++a)
    if (x[a] < cell.lower[a] - slack * cell.extent[a] || x[a] > cell.upper()[a] + slack * cell.extent[a])
      throw std::domain_error("local_weight: point outside the cell");
  if (config.weight_mode == WeightMode::Unweighted) return 1.0;
  if (config.chain_1d) return cell_weights(mesh, spec, config)[c](x);
  const Point b = spec.drift[c];
  Point xk = config.weight_mode == WeightMode::WeightedGlobal ? Point{0.0, 0.0} : cell.center();
  if (!config.centers.empty()) xk = config.centers[c];
  const double e = -(b[0] * (x[0] - xk[0]) + b[1] * (x[1] - xk[1])) / spec.alpha;
  if (config.weight_mode == WeightMode::WeightedGlobal && std::abs(e) > 700.0)
    throw WeightOverflow("local_weight: exponent overflows the global weight; use the centered weight mode");
  return std::exp(e);
}

}  // namespace whdg
