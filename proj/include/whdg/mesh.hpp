#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace whdg {

/// Coordinates in one or two dimensions. Unused trailing entries are zero.
using Point = std::array<double, 2>;

enum class BoundaryLabel { Interior, Dirichlet, Neumann };

inline const char* to_string(BoundaryLabel label) {
  switch (label) {
    case BoundaryLabel::Interior: return "interior";
    case BoundaryLabel::Dirichlet: return "dirichlet";
    case BoundaryLabel::Neumann: return "neumann";
  }
  return "?";
}

/// Axis-aligned box. For one-dimensional meshes only index 0 is meaningful.
struct Cell {
  Point lower{0.0, 0.0};
  Point extent{1.0, 1.0};

  Point center() const { return {lower[0] + 0.5 * extent[0], lower[1] + 0.5 * extent[1]}; }
  Point upper() const { return {lower[0] + extent[0], lower[1] + extent[1]}; }
  double measure(int dim) const { return dim == 1 ? extent[0] : extent[0] * extent[1]; }
  double diameter(int dim) const {
    return dim == 1 ? extent[0] : std::hypot(extent[0], extent[1]);
  }
  /// Maps reference coordinates in [0,1]^d to physical coordinates.
  Point map(const Point& ref) const {
    return {lower[0] + extent[0] * ref[0], lower[1] + extent[1] * ref[1]};
  }
};

/// A face is normal to `axis`; its unit normal is +e_axis and points from
/// `cells[0]` to `cells[1]`. A missing neighbour is stored as -1.
struct Face {
  int axis = 0;
  double position = 0.0;
  double tangent_lower = 0.0;   // 2D only
  double tangent_extent = 1.0;  // 2D only; 1 in 1D so that |e| = 1
  std::array<int, 2> cells{-1, -1};
  BoundaryLabel label = BoundaryLabel::Interior;

  bool is_boundary() const { return cells[0] < 0 || cells[1] < 0; }
  int tangent_axis() const { return 1 - axis; }
  double measure() const { return tangent_extent; }

  Point center(int dim) const {
    if (dim == 1) return {position, 0.0};
    Point c{};
    c[axis] = position;
    c[tangent_axis()] = tangent_lower + 0.5 * tangent_extent;
    return c;
  }
};

/// Axis-aligned tensor-product mesh of intervals (d=1) or rectangles (d=2).
///
/// Faces are numbered lexicographically by their center coordinates, so the
/// numbering (and every assembled matrix) is reproducible. Local faces of a
/// cell are ordered (axis 0 low, axis 0 high, axis 1 low, axis 1 high);
/// low faces have outward normal -e_axis, high faces +e_axis.
class Mesh {
 public:
  /// Builds the tensor mesh from strictly increasing per-axis breakpoints.
  static Mesh tensor(const std::vector<std::vector<double>>& breakpoints) {
    const int dim = static_cast<int>(breakpoints.size());
    if (dim < 1 || dim > 2) throw std::invalid_argument("mesh: dimension must be 1 or 2");
    for (const auto& axis : breakpoints) {
      if (axis.size() < 2) throw std::invalid_argument("mesh: need at least two breakpoints per axis");
      for (std::size_t i = 1; i < axis.size(); ++i) {
        if (!(axis[i] > axis[i - 1]))
          throw std::invalid_argument("mesh: breakpoints must be strictly increasing");
      }
    }

    Mesh mesh;
    mesh.dim_ = dim;
    mesh.breakpoints_ = breakpoints;
    const int nx = static_cast<int>(breakpoints[0].size()) - 1;
    const int ny = dim == 2 ? static_cast<int>(breakpoints[1].size()) - 1 : 1;

    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        Cell c;
        c.lower[0] = breakpoints[0][i];
        c.extent[0] = breakpoints[0][i + 1] - breakpoints[0][i];
        if (dim == 2) {
          c.lower[1] = breakpoints[1][j];
          c.extent[1] = breakpoints[1][j + 1] - breakpoints[1][j];
        }
        mesh.cells_.push_back(c);
      }
    }
    auto cell_id = [&](int i, int j) { return j * nx + i; };

    struct Draft {
      Face face;
      std::array<int, 2> local;  // local face index in cells[0], cells[1]
    };
    std::vector<Draft> drafts;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i <= nx; ++i) {
        Draft d;
        d.face.axis = 0;
        d.face.position = breakpoints[0][i];
        if (dim == 2) {
          d.face.tangent_lower = breakpoints[1][j];
          d.face.tangent_extent = breakpoints[1][j + 1] - breakpoints[1][j];
        }
        d.face.cells = {i > 0 ? cell_id(i - 1, j) : -1, i < nx ? cell_id(i, j) : -1};
        d.local = {1, 0};
        drafts.push_back(d);
      }
    }
    if (dim == 2) {
      for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          Draft d;
          d.face.axis = 1;
          d.face.position = breakpoints[1][j];
          d.face.tangent_lower = breakpoints[0][i];
          d.face.tangent_extent = breakpoints[0][i + 1] - breakpoints[0][i];
          d.face.cells = {j > 0 ? cell_id(i, j - 1) : -1, j < ny ? cell_id(i, j) : -1};
          d.local = {3, 2};
          drafts.push_back(d);
        }
      }
    }
    for (auto& d : drafts) {
      d.face.label = d.face.is_boundary() ? BoundaryLabel::Dirichlet : BoundaryLabel::Interior;
    }
    std::stable_sort(drafts.begin(), drafts.end(), [dim](const Draft& a, const Draft& b) {
      const Point ca = a.face.center(dim);
      const Point cb = b.face.center(dim);
      return std::tie(ca[0], ca[1]) < std::tie(cb[0], cb[1]);
    });

    mesh.cell_faces_.assign(mesh.cells_.size(), {-1, -1, -1, -1});
    for (std::size_t f = 0; f < drafts.size(); ++f) {
      mesh.faces_.push_back(drafts[f].face);
      for (int side = 0; side < 2; ++side) {
        const int c = drafts[f].face.cells[side];
        if (c >= 0) mesh.cell_faces_[c][drafts[f].local[side]] = static_cast<int>(f);
      }
    }
    mesh.domain_measure_ = 1.0;
    for (const auto& axis : breakpoints) mesh.domain_measure_ *= axis.back() - axis.front();
    return mesh;
  }

  int dim() const { return dim_; }
  int faces_per_cell() const { return 2 * dim_; }
  std::span<const Cell> cells() const { return cells_; }
  std::span<const Face> faces() const { return faces_; }
  const Cell& cell(int c) const { return cells_.at(c); }
  const Face& face(int f) const { return faces_.at(f); }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  int num_faces() const { return static_cast<int>(faces_.size()); }
  double domain_measure() const { return domain_measure_; }
  const std::vector<std::vector<double>>& breakpoints() const { return breakpoints_; }

  /// Global face id of local face `local` (0..2d-1) of cell `c`.
  int cell_face(int c, int local) const { return cell_faces_.at(c)[local]; }

  static int local_face_axis(int local) { return local / 2; }
  /// Outward orientation sign of a local face relative to +e_axis.
  static double outward_sign(int local) { return local % 2 == 0 ? -1.0 : 1.0; }

  /// Returns a copy whose boundary faces are relabelled by `labeller`.
  /// Interior faces keep their label.
  Mesh relabel(const std::function<BoundaryLabel(const Face&, const Point& center)>& labeller) const {
    Mesh out = *this;
    for (auto& f : out.faces_) {
      if (!f.is_boundary()) continue;
      const BoundaryLabel label = labeller(f, f.center(dim_));
      if (label == BoundaryLabel::Interior)
        throw std::invalid_argument("mesh: boundary face cannot be labelled interior");
      f.label = label;
    }
    return out;
  }

 private:
  int dim_ = 1;
  std::vector<Cell> cells_;
  std::vector<Face> faces_;
  std::vector<std::array<int, 4>> cell_faces_;
  std::vector<std::vector<double>> breakpoints_;
  double domain_measure_ = 0.0;
};

struct Box {
  Point lower{0.0, 0.0};
  Point upper{1.0, 1.0};
};

inline std::vector<double> uniform_breakpoints(double a, double b, int n) {
  std::vector<double> pts(n + 1);
  for (int i = 0; i <= n; ++i) pts[i] = a + (b - a) * static_cast<double>(i) / n;
  pts[n] = b;
  return pts;
}

/// n^d congruent cells on `box`.
inline Mesh build_uniform_cartesian(int dim, int n, const Box& box = {}) {
  if (dim < 1 || dim > 2) throw std::invalid_argument("build_uniform_cartesian: dimension must be 1 or 2");
  if (n < 1) throw std::invalid_argument("build_uniform_cartesian: need at least one cell per axis");
  std::vector<std::vector<double>> bp;
  for (int a = 0; a < dim; ++a) {
    if (!(box.upper[a] > box.lower[a]) || !std::isfinite(box.upper[a] - box.lower[a]))
      throw std::invalid_argument("build_uniform_cartesian: degenerate box");
    bp.push_back(uniform_breakpoints(box.lower[a], box.upper[a], n));
  }
  return Mesh::tensor(bp);
}

/// Breakpoints of the graded p-i-n grid of the given level on [0, length].
///
/// The outer sixths are split uniformly into 2^(level-1) cells. Each inner
/// sixth is graded towards its junction (length/3 or 2 length/3) with
/// 2^(level+1) cells whose reference breakpoints are (k/2^(level+1))^2.
inline std::vector<double> pin_grid_breakpoints(int level, double length) {
  if (level < 1) throw std::invalid_argument("build_pin_grid: level must be >= 1");
  if (!(length > 0.0)) throw std::invalid_argument("build_pin_grid: length must be positive");
  const double ends[7] = {0.0,        length / 6.0, length / 3.0, length / 2.0,
                          2.0 * length / 3.0, 5.0 * length / 6.0, length};
  const int outer = 1 << (level - 1);
  const int graded = 1 << (level + 1);

  std::vector<double> pts{ends[0]};
  auto uniform = [&](double a, double b) {
    for (int k = 1; k <= outer; ++k) pts.push_back(k == outer ? b : a + (b - a) * k / outer);
  };
  // Segment between `junction` and `other`, clustered at the junction.
  auto towards = [&](double junction, double other, bool junction_first) {
    std::vector<double> seg(graded + 1);
    for (int k = 0; k <= graded; ++k) {
      const double s = static_cast<double>(k) / graded;
      seg[k] = k == 0 ? junction : (k == graded ? other : junction + (other - junction) * s * s);
    }
    if (!junction_first) std::reverse(seg.begin(), seg.end());
    pts.insert(pts.end(), seg.begin() + 1, seg.end());
  };
  uniform(ends[0], ends[1]);
  towards(ends[2], ends[1], false);
  towards(ends[2], ends[3], true);
  towards(ends[4], ends[3], false);
  towards(ends[4], ends[5], true);
  uniform(ends[5], ends[6]);
  return pts;
}

inline Mesh build_pin_grid(int level, double length) {
  return Mesh::tensor({pin_grid_breakpoints(level, length)});
}

/// Splits every 1D cell into 2^times equal pieces.
inline std::vector<double> refine_breakpoints(const std::vector<double>& pts, int times) {
  const int parts = 1 << times;
  std::vector<double> out{pts.front()};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    for (int k = 1; k <= parts; ++k)
      out.push_back(k == parts ? pts[i] : pts[i - 1] + (pts[i] - pts[i - 1]) * k / parts);
  }
  return out;
}

/// CSV dump: one row per cell, then one row per face.
inline void write_mesh_csv(std::ostream& os, const Mesh& mesh) {
  const auto old = os.precision(16);
  os << "kind,id,lower_x,lower_y,extent_x,extent_y,cell_minus,cell_plus,label\n";
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Cell& cell = mesh.cell(c);
    os << "cell," << c << ',' << cell.lower[0] << ',' << cell.lower[1] << ',' << cell.extent[0]
       << ',' << cell.extent[1] << ",,,\n";
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.face(f);
    Point lo{}, ext{};
    lo[face.axis] = face.position;
    if (mesh.dim() == 2) {
      lo[face.tangent_axis()] = face.tangent_lower;
      ext[face.tangent_axis()] = face.tangent_extent;
    }
    os << "face," << f << ',' << lo[0] << ',' << lo[1] << ',' << ext[0] << ',' << ext[1] << ','
       << face.cells[0] << ',' << face.cells[1] << ',' << to_string(face.label) << '\n';
  }
  os.precision(old);
}

}  // namespace whdg
