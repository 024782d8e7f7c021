#include "emm/mesh.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "emm/error.hpp"

namespace emm {

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

// Edge-connectivity of a subset of boundary edges (shared endpoints).
bool edges_connected(const std::vector<BoundaryEdge> &edges) {
  if (edges.empty())
    return true;
  std::vector<int> parent(edges.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int i) {
    return parent[i] == i ? i : parent[i] = find(parent[i]);
  };
  std::map<int, int> first_owner;
  for (std::size_t i = 0; i < edges.size(); ++i)
    for (int node : edges[i].nodes) {
      auto [it, inserted] = first_owner.emplace(node, static_cast<int>(i));
      if (!inserted)
        parent[find(static_cast<int>(i))] = find(it->second);
    }
  const int root = find(0);
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (find(static_cast<int>(i)) != root)
      return false;
  return true;
}

bool on_side(const Eigen::Vector2d &a, const Eigen::Vector2d &b, Side side) {
  constexpr double eps = 1e-12;
  switch (side) {
  case Side::Left:
    return std::abs(a.x()) < eps && std::abs(b.x()) < eps;
  case Side::Right:
    return std::abs(a.x() - 1) < eps && std::abs(b.x() - 1) < eps;
  case Side::Bottom:
    return std::abs(a.y()) < eps && std::abs(b.y()) < eps;
  case Side::Top:
    return std::abs(a.y() - 1) < eps && std::abs(b.y() - 1) < eps;
  }
  return false;
}

} // namespace

Side parse_side(const std::string &name) {
  if (name == "left")
    return Side::Left;
  if (name == "right")
    return Side::Right;
  if (name == "bottom")
    return Side::Bottom;
  if (name == "top")
    return Side::Top;
  throw ValidationError("unknown side '" + name +
                        "' (expected left/right/bottom/top)");
}

std::string side_name(Side side) {
  switch (side) {
  case Side::Left:
    return "left";
  case Side::Right:
    return "right";
  case Side::Bottom:
    return "bottom";
  case Side::Top:
    return "top";
  }
  return "?";
}

double Mesh::area(int element) const {
  const auto &t = triangles[element];
  const Eigen::Vector2d a = nodes.row(t[0]);
  const Eigen::Vector2d b = nodes.row(t[1]);
  const Eigen::Vector2d c = nodes.row(t[2]);
  return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

Eigen::Vector2d Mesh::outward_normal(const BoundaryEdge &edge) const {
  const Eigen::Vector2d d =
      nodes.row(edge.nodes[1]) - nodes.row(edge.nodes[0]);
  return Eigen::Vector2d(d.y(), -d.x()).normalized();
}

double Mesh::length(const BoundaryEdge &edge) const {
  return (nodes.row(edge.nodes[1]) - nodes.row(edge.nodes[0])).norm();
}

Eigen::Vector2d Mesh::centroid(int element) const {
  const auto &t = triangles[element];
  return (nodes.row(t[0]) + nodes.row(t[1]) + nodes.row(t[2])).transpose() /
         3.0;
}

Mesh build_unit_square_mesh(int m, Side dirichlet_side) {
  if (m < 1)
    throw ValidationError("mesh subdivisions m must be >= 1");
  Mesh mesh;
  const int side = m + 1;
  mesh.nodes.resize(side * side, 2);
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i)
      mesh.nodes.row(j * side + i) << static_cast<double>(i) / m,
          static_cast<double>(j) / m;

  auto id = [side](int i, int j) { return j * side + i; };
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const int sw = id(i, j), se = id(i + 1, j);
      const int nw = id(i, j + 1), ne = id(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        mesh.triangles.push_back({sw, se, ne});
        mesh.triangles.push_back({sw, ne, nw});
      } else {
        mesh.triangles.push_back({sw, se, nw});
        mesh.triangles.push_back({se, ne, nw});
      }
    }

  // Boundary edges: triangle edges that appear exactly once.
  std::map<EdgeKey, int> count;
  for (const auto &t : mesh.triangles)
    for (int k = 0; k < 3; ++k)
      ++count[key(t[k], t[(k + 1) % 3])];
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto &t = mesh.triangles[e];
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if (count[key(a, b)] != 1)
        continue;
      BoundaryEdge edge;
      edge.nodes = {a, b};
      edge.triangle = e;
      edge.tag = on_side(mesh.nodes.row(a), mesh.nodes.row(b), dirichlet_side)
                     ? BoundaryTag::Dirichlet
                     : BoundaryTag::Neumann;
      mesh.boundary_edges.push_back(edge);
    }
  }
  return mesh;
}

int count_unique_edges(const Mesh &mesh) {
  std::set<EdgeKey> edges;
  for (const auto &t : mesh.triangles)
    for (int k = 0; k < 3; ++k)
      edges.insert(key(t[k], t[(k + 1) % 3]));
  return static_cast<int>(edges.size());
}

void validate_mesh(const Mesh &mesh) {
  for (int e = 0; e < mesh.num_elements(); ++e)
    if (!(mesh.area(e) > 0.0))
      throw ValidationError("mesh element " + std::to_string(e) +
                            " has non-positive area");

  std::map<EdgeKey, std::vector<int>> owners;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto &t = mesh.triangles[e];
    for (int k = 0; k < 3; ++k)
      owners[key(t[k], t[(k + 1) % 3])].push_back(e);
  }
  std::set<EdgeKey> tagged;
  std::vector<BoundaryEdge> dirichlet, neumann;
  for (const auto &edge : mesh.boundary_edges) {
    const EdgeKey k = key(edge.nodes[0], edge.nodes[1]);
    auto it = owners.find(k);
    if (it == owners.end() || it->second.size() != 1 ||
        it->second.front() != edge.triangle)
      throw ValidationError("boundary edge (" + std::to_string(k.first) + "," +
                            std::to_string(k.second) +
                            ") is not owned by exactly one triangle");
    if (!tagged.insert(k).second)
      throw ValidationError("boundary edge (" + std::to_string(k.first) + "," +
                            std::to_string(k.second) + ") tagged twice");
    const Eigen::Vector2d mid =
        0.5 * (mesh.nodes.row(edge.nodes[0]) + mesh.nodes.row(edge.nodes[1]))
                  .transpose();
    if (mesh.outward_normal(edge).dot(mesh.centroid(edge.triangle) - mid) >= 0)
      throw ValidationError("boundary edge normal points into its triangle");
    (edge.tag == BoundaryTag::Dirichlet ? dirichlet : neumann).push_back(edge);
  }
  for (const auto &[k, tris] : owners) {
    if (tris.size() > 2)
      throw ValidationError("edge shared by more than two triangles");
    if (tris.size() == 1 && !tagged.count(k))
      throw ValidationError("boundary edge missing a tag");
  }
  if (dirichlet.empty())
    throw ValidationError("Dirichlet boundary part is empty");
  if (neumann.empty())
    throw ValidationError("Neumann boundary part is empty");
  if (!edges_connected(dirichlet))
    throw ValidationError("Dirichlet boundary part is not connected");
  if (!edges_connected(neumann))
    throw ValidationError("Neumann boundary part is not connected");
}

void write_mesh_dump(std::ostream &out, const Mesh &mesh) {
  out.precision(17);
  out << "NODES " << mesh.num_nodes() << "\n";
  for (int i = 0; i < mesh.num_nodes(); ++i)
    out << i << " " << mesh.nodes(i, 0) << " " << mesh.nodes(i, 1) << "\n";
  out << "ELEMENTS " << mesh.num_elements() << "\n";
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto &t = mesh.triangles[e];
    out << e << " " << t[0] << " " << t[1] << " " << t[2] << "\n";
  }
  out << "BOUNDARY_EDGES " << mesh.boundary_edges.size() << "\n";
  for (const auto &edge : mesh.boundary_edges)
    out << edge.nodes[0] << " " << edge.nodes[1] << " "
        << (edge.tag == BoundaryTag::Dirichlet ? "DIRICHLET" : "NEUMANN") << "\n";
}

} // namespace emm
