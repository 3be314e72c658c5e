#pragma once

#include "dislo/types.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>
#include <vector>

namespace dislo {

/// Triangle mesh in Cartesian chart coordinates, counter-clockwise triangles.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> core;      // per triangle: 1 if inside a filled core disc
  std::vector<int> site;      // per triangle: owning site (atom cell) or -1
  std::vector<std::vector<int>> hole_loops;  // ccw vertex loops around holes
  std::vector<Vec2> hole_centers;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  Mat2 edge_matrix(std::size_t t) const;
  double area(std::size_t t) const;
  Vec2 centroid(std::size_t t) const;
  /// P1 basis gradients, column a is grad(lambda_a).
  Eigen::Matrix<double, 2, 3> basis_gradients(std::size_t t) const;
};

struct Edges {
  std::vector<std::array<int, 2>> vertices;   // (lo, hi)
  std::vector<std::array<int, 3>> of_triangle;  // edges (v0v1, v1v2, v2v0)
  std::vector<std::array<int, 3>> sign;       // +1 when the triangle runs lo -> hi
  std::vector<std::array<int, 2>> triangles;  // adjacent triangles, -1 on the boundary
  bool is_boundary(int e) const { return triangles[e][1] < 0; }
};

Edges build_edges(const Mesh& m);

/// Log-graded annulus around `center`; hole_loops[0] is the inner ring.
Mesh annulus_mesh(const Vec2& center, double r_in, double r_out, int cells_per_decade, int n_theta,
                 double angle0 = 0.0);

struct SiteSpec {
  Vec2 center = Vec2::Zero();
  double hole_radius = 0.0;
  bool fill_core = false;
};

/**
 * @brief Rectangle split into nx x ny square cells; a cell either holds one site at its
 * centre (polar rings around a hole, blended to the square) or is a structured grid.
 */
struct CellGridSpec {
  Vec2 origin = Vec2::Zero();
  double cell = 1.0;
  int nx = 1, ny = 1;
  int per_side = 16;          // boundary points per cell side; rings carry 4 per_side points
  int cells_per_decade = 16;  // radial grading of the polar rings
  double ring_fraction = 0.35;  // outer polar ring radius / cell size
  int core_rings = 3;
  std::vector<int> cell_site;  // nx * ny entries (row-major in y), -1 for empty cells
  std::vector<SiteSpec> sites;
  /// extra radii (absolute) inserted into every polar ring ladder
  std::vector<double> extra_radii;
};

Mesh cell_grid_mesh(const CellGridSpec& spec);

/// Sub-mesh of the triangles with keep(t) true; vertices re-indexed, loops remapped.
Mesh extract_triangles(const Mesh& m, const std::function<bool(std::size_t)>& keep);

/// Boundary loop of a mesh hole given by its centre (sorted by angle).
std::vector<int> ring_vertices(const Mesh& m, const Vec2& center, double radius, double tol);

}  // namespace dislo
