#ifndef EMM_MESH_HPP
#define EMM_MESH_HPP

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace emm {

enum class BoundaryTag { Dirichlet, Neumann };
enum class Side { Left, Right, Bottom, Top };

Side parse_side(const std::string &name);
std::string side_name(Side side);

struct BoundaryEdge {
  // Ordered so that the owning triangle lies to the left (counter-clockwise
  // traversal); the outward normal is then (dy, -dx) / length.
  std::array<int, 2> nodes{};
  BoundaryTag tag = BoundaryTag::Neumann;
  int triangle = -1;
};

/// Triangulated polygonal domain with the boundary split into a displacement
/// part (Dirichlet) and a traction part (Neumann).
struct Mesh {
  Eigen::Matrix<double, Eigen::Dynamic, 2> nodes;
  std::vector<std::array<int, 3>> triangles; // counter-clockwise
  std::vector<BoundaryEdge> boundary_edges;

  int num_nodes() const { return static_cast<int>(nodes.rows()); }
  int num_elements() const { return static_cast<int>(triangles.size()); }

  double area(int element) const;
  Eigen::Vector2d outward_normal(const BoundaryEdge &edge) const;
  double length(const BoundaryEdge &edge) const;
  Eigen::Vector2d centroid(int element) const;
};

/// Uniform criss-cross triangulation of [0,1]^2 with m cells per side. Cell
/// (i,j) is cut along the rising diagonal when i+j is even, the falling one
/// otherwise. The chosen side is tagged Dirichlet, everything else Neumann.
Mesh build_unit_square_mesh(int m, Side dirichlet_side = Side::Left);

/// Throws ValidationError if any structural invariant fails: positive
/// areas, boundary edges owned by exactly one triangle and covering the
/// whole boundary, nonempty and edge-connected Dirichlet/Neumann parts,
/// outward normals pointing away from the owning triangle.
void validate_mesh(const Mesh &mesh);

/// Number of distinct undirected edges.
int count_unique_edges(const Mesh &mesh);

/// Plain-text block listing of nodes, elements and tagged boundary edges.
void write_mesh_dump(std::ostream &out, const Mesh &mesh);

} // namespace emm

#endif // EMM_MESH_HPP
