#pragma once

// Patch lattice and its interface-dependent subdivision into triangles/quads.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fsic/errors.hpp"

namespace fsic {

using Vec2 = Eigen::Vector2d;

struct Box {
  double x_lo = 0, y_lo = 0, x_hi = 1, y_hi = 1;
  double width() const { return x_hi - x_lo; }
  double height() const { return y_hi - y_lo; }
};

enum class Tag : std::uint8_t { fluid, solid, artificial };

inline bool is_fluid_like(Tag t) { return t != Tag::solid; }

inline const char* to_string(Tag t) {
  switch (t) {
    case Tag::fluid: return "fluid";
    case Tag::solid: return "solid";
    case Tag::artificial: return "artificial";
  }
  return "?";
}

/// Tensor lattice of rectangular patches. Columns are uniform, rows may be
/// piecewise uniform so that a wall line can coincide with a lattice row.
class PatchMesh {
 public:
  PatchMesh() = default;
  PatchMesh(std::vector<double> xs, std::vector<double> ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
    if (xs_.size() < 2 || ys_.size() < 2) throw ConfigError("patch mesh needs at least one patch per direction");
    for (std::size_t i = 1; i < xs_.size(); ++i)
      if (!(xs_[i] > xs_[i - 1])) throw ConfigError("patch abscissae must increase");
    for (std::size_t j = 1; j < ys_.size(); ++j)
      if (!(ys_[j] > ys_[j - 1])) throw ConfigError("patch ordinates must increase");
  }

  int nx() const { return static_cast<int>(xs_.size()) - 1; }
  int ny() const { return static_cast<int>(ys_.size()) - 1; }
  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }
  Box box() const { return {xs_.front(), ys_.front(), xs_.back(), ys_.back()}; }
  int patch_count() const { return nx() * ny(); }
  int element_count() const { return 4 * patch_count(); }

  /// Largest vertical patch spacing; the mesh size used in all h-scaled parameters.
  double h() const {
    double hmax = 0;
    for (int j = 0; j < ny(); ++j) hmax = std::max(hmax, ys_[j + 1] - ys_[j]);
    return hmax;
  }

  std::array<Vec2, 4> patch_corners(int i, int j) const {
    return {Vec2(xs_[i], ys_[j]), Vec2(xs_[i + 1], ys_[j]), Vec2(xs_[i + 1], ys_[j + 1]), Vec2(xs_[i], ys_[j + 1])};
  }

  int vertex_cols() const { return 2 * nx() + 1; }
  int vertex_rows() const { return 2 * ny() + 1; }
  int vertex_count() const { return vertex_cols() * vertex_rows(); }
  int vertex_index(int I, int J) const { return J * vertex_cols() + I; }

  double lattice_x(int I) const { return I % 2 == 0 ? xs_[I / 2] : 0.5 * (xs_[I / 2] + xs_[I / 2 + 1]); }
  double lattice_y(int J) const { return J % 2 == 0 ? ys_[J / 2] : 0.5 * (ys_[J / 2] + ys_[J / 2 + 1]); }

  /// Index of the lattice row at height y (within tol), if any.
  std::optional<int> lattice_row(double y, double tol) const {
    auto it = std::lower_bound(ys_.begin(), ys_.end(), y - tol);
    if (it != ys_.end() && std::abs(*it - y) <= tol) return static_cast<int>(it - ys_.begin());
    return std::nullopt;
  }

 private:
  std::vector<double> xs_, ys_;
};

inline std::vector<double> uniform_breaks(double lo, double hi, int n) {
  std::vector<double> v(n + 1);
  for (int k = 0; k <= n; ++k) v[k] = lo + (hi - lo) * k / n;
  v.back() = hi;
  return v;
}

inline PatchMesh build_patch_mesh(int nx, int ny, const Box& box) {
  if (nx <= 0 || ny <= 0) throw ConfigError("patch counts must be positive");
  if (!(box.width() > 0) || !(box.height() > 0)) throw ConfigError("degenerate box");
  return PatchMesh(uniform_breaks(box.x_lo, box.x_hi, nx), uniform_breaks(box.y_lo, box.y_hi, ny));
}

struct RowBand {
  double y_top;
  int rows;
};

/// Rows are uniform inside each band [previous top, y_top].
inline PatchMesh build_banded_patch_mesh(int nx, double x_lo, double x_hi, double y_lo,
                                         const std::vector<RowBand>& bands) {
  if (nx <= 0 || bands.empty()) throw ConfigError("patch counts must be positive");
  std::vector<double> ys{y_lo};
  for (const auto& b : bands) {
    if (b.rows <= 0 || !(b.y_top > ys.back())) throw ConfigError("invalid row band");
    auto seg = uniform_breaks(ys.back(), b.y_top, b.rows);
    ys.insert(ys.end(), seg.begin() + 1, seg.end());
  }
  return PatchMesh(uniform_breaks(x_lo, x_hi, nx), std::move(ys));
}

/// Piecewise-linear graph interface sampled at the patch-edge abscissae.
/// The solid lies above the graph.
struct InterfaceGraph {
  std::vector<double> xs;
  std::vector<double> heights;

  static InterfaceGraph flat(const PatchMesh& m, double y) {
    return {m.xs(), std::vector<double>(m.xs().size(), y)};
  }

  int segments() const { return static_cast<int>(xs.size()) - 1; }

  double height_at(double x) const {
    if (x <= xs.front()) return heights.front();
    if (x >= xs.back()) return heights.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    int i = static_cast<int>(it - xs.begin()) - 1;
    double s = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return (1 - s) * heights[i] + s * heights[i + 1];
  }

  Vec2 tangent(int seg) const {
    Vec2 t(xs[seg + 1] - xs[seg], heights[seg + 1] - heights[seg]);
    return t.normalized();
  }
  /// Outward normal of the solid.
  Vec2 normal(int seg) const {
    Vec2 t = tangent(seg);
    return {t.y(), -t.x()};
  }
  double length() const {
    double l = 0;
    for (int s = 0; s < segments(); ++s) l += std::hypot(xs[s + 1] - xs[s], heights[s + 1] - heights[s]);
    return l;
  }
  double min_height() const { return *std::min_element(heights.begin(), heights.end()); }

  static Vec2 wall_normal() { return {0.0, -1.0}; }
  static Vec2 wall_tangent() { return {1.0, 0.0}; }
};

enum class PatchCut : std::uint8_t { uncut_fluid, uncut_solid, uncut_artificial, cut };

struct SubCell {
  std::array<int, 4> v{-1, -1, -1, -1};  // counter-clockwise
  int nv = 0;
  Tag tag = Tag::fluid;
  int patch = -1;
};

struct InterfaceEdge {
  int a = -1, b = -1;   // left to right
  int solid_cell = -1;
  int fluid_cell = -1;  // -1 when the edge lies on the box boundary
  Vec2 normal;          // outward from the solid
};

struct SubdividedMesh {
  PatchMesh patches;
  InterfaceGraph iface;
  std::optional<double> wall;
  std::vector<Vec2> vertices;
  std::vector<SubCell> cells;
  std::vector<PatchCut> patch_cut;
  std::vector<InterfaceEdge> interface_edges;

  double h() const { return patches.h(); }
  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int cell_count() const { return static_cast<int>(cells.size()); }
  Vec2 cell_vertex(int c, int k) const { return vertices[cells[c].v[k]]; }
};

namespace geom {

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double signed_area(const std::array<Vec2, 3>& p) { return 0.5 * cross(p[1] - p[0], p[2] - p[0]); }

inline double polygon_area(const std::vector<Vec2>& p) {
  double a = 0;
  for (std::size_t k = 0; k < p.size(); ++k) a += cross(p[k], p[(k + 1) % p.size()]);
  return 0.5 * a;
}

/// Largest interior angle of a triangle in degrees.
inline double max_angle_deg(const Vec2& a, const Vec2& b, const Vec2& c) {
  auto ang = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    Vec2 u = q - p, w = r - p;
    return std::atan2(std::abs(cross(u, w)), u.dot(w));
  };
  double m = std::max({ang(a, b, c), ang(b, c, a), ang(c, a, b)});
  return m * 180.0 / std::numbers::pi;
}

inline Vec2 centroid(const std::vector<Vec2>& p) {
  Vec2 c = Vec2::Zero();
  for (const auto& q : p) c += q;
  return c / static_cast<double>(p.size());
}

}  // namespace geom

inline double cell_area(const SubdividedMesh& m, int c) {
  std::vector<Vec2> p;
  for (int k = 0; k < m.cells[c].nv; ++k) p.push_back(m.cell_vertex(c, k));
  return geom::polygon_area(p);
}

inline Vec2 cell_centroid(const SubdividedMesh& m, int c) {
  std::vector<Vec2> p;
  for (int k = 0; k < m.cells[c].nv; ++k) p.push_back(m.cell_vertex(c, k));
  return geom::centroid(p);
}

namespace detail {

// Ring order of the patch boundary nodes, counter-clockwise from the lower-left corner.
// 0 c00, 1 bottom mid, 2 c10, 3 right mid, 4 c11, 5 top mid, 6 c01, 7 left mid.
struct PatchNodes {
  std::array<int, 8> ring;
  int center;
};

inline PatchNodes patch_nodes(const PatchMesh& pm, int i, int j) {
  auto v = [&](int I, int J) { return pm.vertex_index(I, J); };
  int I = 2 * i, J = 2 * j;
  return {{v(I, J), v(I + 1, J), v(I + 2, J), v(I + 2, J + 1), v(I + 2, J + 2), v(I + 1, J + 2), v(I, J + 2),
           v(I, J + 1)},
          v(I + 1, J + 1)};
}

struct Triangulation {
  std::vector<std::array<int, 3>> tris;  // vertex ids
  std::vector<std::array<int, 2>> chord; // interface edges, vertex ids
  Vec2 center;
  double max_angle = std::numeric_limits<double>::infinity();
};

inline double triangulation_quality(const std::vector<Vec2>& pos, const std::vector<std::array<int, 3>>& tris,
                                    double area_floor) {
  double worst = 0;
  for (const auto& t : tris) {
    std::array<Vec2, 3> p{pos[t[0]], pos[t[1]], pos[t[2]]};
    if (!(geom::signed_area(p) > area_floor)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, geom::max_angle_deg(p[0], p[1], p[2]));
  }
  return worst;
}

// Local triangulation candidates for a patch cut from ring node a to ring node b.
// Local index 8 is the center node.
inline Triangulation triangulate_cut_patch(const std::array<Vec2, 8>& ring_pos, int a, int b, double area_floor) {
  Triangulation best;
  std::vector<Vec2> pos(ring_pos.begin(), ring_pos.end());
  pos.push_back(Vec2::Zero());

  auto consider = [&](const Vec2& c, std::vector<std::array<int, 3>> tris, std::vector<std::array<int, 2>> chord) {
    pos[8] = c;
    double q = triangulation_quality(pos, tris, area_floor);
    if (q < best.max_angle) best = {std::move(tris), std::move(chord), c, q};
  };

  // (i) center on the chord midpoint, fan around it
  {
    std::vector<std::array<int, 3>> tris;
    for (int k = 0; k < 8; ++k) tris.push_back({k, (k + 1) % 8, 8});
    consider(0.5 * (ring_pos[a] + ring_pos[b]), tris, {{a, 8}, {8, b}});
  }

  // (ii) center inside one side polygon, the other side fan-triangulated from one of its nodes
  std::array<std::vector<int>, 2> side;
  for (int k = a;; k = (k + 1) % 8) {
    side[0].push_back(k);
    if (k == b) break;
  }
  for (int k = b;; k = (k + 1) % 8) {
    side[1].push_back(k);
    if (k == a) break;
  }
  for (int s = 0; s < 2; ++s) {
    const auto& ps = side[s];
    const auto& pt = side[1 - s];
    std::vector<Vec2> poly;
    for (int k : ps) poly.push_back(ring_pos[k]);
    std::vector<Vec2> centers{geom::centroid(poly)};
    {
      // area centroid
      double A = 0;
      Vec2 c = Vec2::Zero();
      for (std::size_t k = 0; k < poly.size(); ++k) {
        const Vec2& p = poly[k];
        const Vec2& q = poly[(k + 1) % poly.size()];
        double w = geom::cross(p, q);
        A += w;
        c += w * (p + q);
      }
      if (std::abs(A) > 0) centers.push_back(c / (3.0 * A));
    }
    std::vector<std::array<int, 3>> fan_s;
    for (std::size_t k = 0; k < ps.size(); ++k) fan_s.push_back({ps[k], ps[(k + 1) % ps.size()], 8});
    const int n = static_cast<int>(pt.size());
    for (int root = 0; root < n; ++root) {
      std::vector<std::array<int, 3>> tris = fan_s;
      for (int k = 1; k + 1 < n; ++k) tris.push_back({pt[root], pt[(root + k) % n], pt[(root + k + 1) % n]});
      for (const auto& c : centers) consider(c, tris, {{a, b}});
    }
  }
  return best;
}

}  // namespace detail

/// Split every patch into four quads (uncut) or eight triangles (cut) so that
/// the interface is resolved by sub-cell edges.
inline SubdividedMesh subdivide(const PatchMesh& pm, const InterfaceGraph& iface_in,
                                std::optional<double> wall = std::nullopt) {
  const int nx = pm.nx(), ny = pm.ny();
  if (static_cast<int>(iface_in.xs.size()) != nx + 1 || iface_in.heights.size() != iface_in.xs.size())
    throw ConfigError("interface must be sampled at every patch-edge abscissa");
  for (int i = 0; i <= nx; ++i)
    if (std::abs(iface_in.xs[i] - pm.xs()[i]) > 1e-12 * pm.box().width())
      throw ConfigError("interface abscissae do not match the patch lattice");

  const Box box = pm.box();
  const double h = pm.h();
  const double tol = 1e-10 * h;

  SubdividedMesh out;
  out.patches = pm;
  out.iface = iface_in;
  out.iface.xs = pm.xs();
  auto& gam = out.iface.heights;
  for (double& g : gam) {
    if (!std::isfinite(g) || g < box.y_lo - tol || g > box.y_hi + tol)
      throw TopologyError("interface leaves the computational box");
    g = std::clamp(g, box.y_lo, box.y_hi);
    if (auto r = pm.lattice_row(g, tol)) g = pm.ys()[*r];
  }
  if (wall) {
    auto r = pm.lattice_row(*wall, tol);
    if (!r) throw ConfigError("wall height must coincide with a lattice row");
    out.wall = pm.ys()[*r];
  }

  out.vertices.resize(pm.vertex_count());
  for (int J = 0; J < pm.vertex_rows(); ++J)
    for (int I = 0; I < pm.vertex_cols(); ++I) out.vertices[pm.vertex_index(I, J)] = {pm.lattice_x(I), pm.lattice_y(J)};

  std::vector<char> on_iface(pm.vertex_count(), 0);
  const auto& xs = pm.xs();
  const auto& ys = pm.ys();

  // crossings with vertical lattice lines
  for (int i = 0; i <= nx; ++i) {
    const double g = gam[i];
    auto it = std::upper_bound(ys.begin(), ys.end(), g);
    int j = static_cast<int>(it - ys.begin()) - 1;
    if (j >= 0 && j < ny && ys[j] < g && g < ys[j + 1]) {
      int v = pm.vertex_index(2 * i, 2 * j + 1);
      out.vertices[v].y() = g;
      on_iface[v] = 1;
    }
    if (j >= 0 && j <= ny && ys[j] == g) on_iface[pm.vertex_index(2 * i, 2 * j)] = 1;
  }
  // crossings with horizontal lattice lines
  for (int i = 0; i < nx; ++i) {
    const double ya = gam[i], yb = gam[i + 1];
    const double lo = std::min(ya, yb), hi = std::max(ya, yb);
    for (int j = 0; j <= ny; ++j) {
      if (!(ys[j] > lo && ys[j] < hi)) continue;
      const double xc = xs[i] + (ys[j] - ya) / (yb - ya) * (xs[i + 1] - xs[i]);
      int v = pm.vertex_index(2 * i + 1, 2 * j);
      out.vertices[v].x() = xc;
      on_iface[v] = 1;
    }
  }

  out.patch_cut.resize(pm.patch_count());
  std::vector<std::array<int, 4>> patch_quads(pm.patch_count(), {-1, -1, -1, -1});

  auto fluid_tag = [&](double y) { return (out.wall && y < *out.wall) ? Tag::artificial : Tag::fluid; };
  auto side_of = [&](const Vec2& p) { return p.y() - out.iface.height_at(p.x()); };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int pid = j * nx + i;
      const auto nodes = detail::patch_nodes(pm, i, j);
      // corner classification against the exact samples
      const std::array<double, 4> corner_side{ys[j] - gam[i], ys[j] - gam[i + 1], ys[j + 1] - gam[i + 1],
                                              ys[j + 1] - gam[i]};
      bool above = false, below = false;
      for (double s : corner_side) {
        above |= s > 0;
        below |= s < 0;
      }
      std::vector<int> hits;
      for (int k = 0; k < 8; ++k)
        if (on_iface[nodes.ring[k]]) hits.push_back(k);
      // edge nodes on the interface imply the interior is cut only if both sides are present
      const bool cut = above && below;
      if (!cut) {
        const Vec2 c = out.vertices[nodes.center];
        const bool solid = above || (!below && side_of(c) > 0);
        const Tag tag = solid ? Tag::solid : fluid_tag(c.y());
        out.patch_cut[pid] = solid ? PatchCut::uncut_solid
                                   : (tag == Tag::artificial ? PatchCut::uncut_artificial : PatchCut::uncut_fluid);
        const auto& r = nodes.ring;
        const std::array<std::array<int, 4>, 4> quads{{{r[0], r[1], nodes.center, r[7]},
                                                       {r[1], r[2], r[3], nodes.center},
                                                       {nodes.center, r[3], r[4], r[5]},
                                                       {r[7], nodes.center, r[5], r[6]}}};
        for (int q = 0; q < 4; ++q) {
          patch_quads[pid][q] = out.cell_count();
          out.cells.push_back({quads[q], 4, tag, pid});
        }
        continue;
      }
      if (hits.size() != 2) throw TopologyError("interface crosses a patch in an unsupported pattern");
      out.patch_cut[pid] = PatchCut::cut;
      std::array<Vec2, 8> ring_pos;
      for (int k = 0; k < 8; ++k) ring_pos[k] = out.vertices[nodes.ring[k]];
      const double area_floor = 1e-14 * (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
      auto tri = detail::triangulate_cut_patch(ring_pos, hits[0], hits[1], area_floor);
      if (!std::isfinite(tri.max_angle)) throw TopologyError("no admissible triangulation of a cut patch");
      out.vertices[nodes.center] = tri.center;
      auto gid = [&](int k) { return k == 8 ? nodes.center : nodes.ring[k]; };
      const int first = out.cell_count();
      for (const auto& t : tri.tris) {
        SubCell c;
        c.v = {gid(t[0]), gid(t[1]), gid(t[2]), -1};
        c.nv = 3;
        c.patch = pid;
        const Vec2 ctr = (out.vertices[c.v[0]] + out.vertices[c.v[1]] + out.vertices[c.v[2]]) / 3.0;
        c.tag = side_of(ctr) > 0 ? Tag::solid : fluid_tag(ctr.y());
        out.cells.push_back(c);
      }
      for (const auto& e : tri.chord) {
        int ga = gid(e[0]), gb = gid(e[1]);
        InterfaceEdge ie;
        for (int c = first; c < out.cell_count(); ++c) {
          const auto& cv = out.cells[c].v;
          bool ha = cv[0] == ga || cv[1] == ga || cv[2] == ga;
          bool hb = cv[0] == gb || cv[1] == gb || cv[2] == gb;
          if (!(ha && hb)) continue;
          if (out.cells[c].tag == Tag::solid) ie.solid_cell = c;
          else ie.fluid_cell = c;
        }
        if (ie.solid_cell < 0 || ie.fluid_cell < 0) throw TopologyError("interface edge without two sides");
        if (out.vertices[ga].x() > out.vertices[gb].x()) std::swap(ga, gb);
        ie.a = ga;
        ie.b = gb;
        out.interface_edges.push_back(ie);
      }
    }
  }

  // interface edges along patch bottoms (fitted interface)
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int pid = j * nx + i;
      if (out.patch_cut[pid] != PatchCut::uncut_solid) continue;
      if (!(gam[i] == ys[j] && gam[i + 1] == ys[j])) continue;
      const auto nodes = detail::patch_nodes(pm, i, j);
      const int below = j > 0 ? (j - 1) * nx + i : -1;
      if (below >= 0 && out.patch_cut[below] == PatchCut::uncut_solid) continue;
      InterfaceEdge e0{nodes.ring[0], nodes.ring[1], patch_quads[pid][0], below >= 0 ? patch_quads[below][3] : -1, {}};
      InterfaceEdge e1{nodes.ring[1], nodes.ring[2], patch_quads[pid][1], below >= 0 ? patch_quads[below][2] : -1, {}};
      out.interface_edges.push_back(e0);
      out.interface_edges.push_back(e1);
    }
  }

  for (auto& e : out.interface_edges) {
    const Vec2 pa = out.vertices[e.a], pb = out.vertices[e.b];
    Vec2 t = (pb - pa).normalized();
    Vec2 n(t.y(), -t.x());
    if ((cell_centroid(out, e.solid_cell) - pa).dot(n) > 0) n = -n;
    e.normal = n;
  }
  std::sort(out.interface_edges.begin(), out.interface_edges.end(), [&](const auto& p, const auto& q) {
    return out.vertices[p.a].x() + out.vertices[p.b].x() < out.vertices[q.a].x() + out.vertices[q.b].x();
  });
  return out;
}

/// Plain-text dump of sub-cells and interface edges.
inline void write_mesh_dump(std::ostream& os, const SubdividedMesh& m) {
  os.precision(12);
  os << "# cells " << m.cell_count() << " interface_edges " << m.interface_edges.size() << '\n';
  for (int c = 0; c < m.cell_count(); ++c) {
    os << "cell " << to_string(m.cells[c].tag) << ' ' << m.cells[c].nv;
    for (int k = 0; k < m.cells[c].nv; ++k) os << ' ' << m.cell_vertex(c, k).x() << ' ' << m.cell_vertex(c, k).y();
    os << '\n';
  }
  for (const auto& e : m.interface_edges) {
    os << "iface " << m.vertices[e.a].x() << ' ' << m.vertices[e.a].y() << ' ' << m.vertices[e.b].x() << ' '
       << m.vertices[e.b].y() << ' ' << e.normal.x() << ' ' << e.normal.y() << '\n';
  }
}

}  // namespace fsic
