#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bwr/error.hpp"
#include "bwr/vec3.hpp"

namespace bwr {

using Index = std::uint32_t;
using Face = std::array<Index, 3>;

inline constexpr Index kNoIndex = std::numeric_limits<Index>::max();

/// Undirected edge with `a < b`.
struct Edge {
  Index a = 0;
  Index b = 0;
  friend constexpr auto operator<=>(const Edge&, const Edge&) = default;
};

struct BBox {
  Vec3 min{};
  Vec3 max{};
  double diagonal() const { return distance(min, max); }
};

/// Connectivity of a triangle mesh. Edges are enumerated canonically: each
/// edge's endpoints sorted ascending, the edge list sorted lexicographically.
/// Validated on construction and immutable afterwards, so one instance can be
/// shared by every mesh with the same face list.
class Topology {
 public:
  Topology(std::size_t vertex_count, std::vector<Face> faces)
      : vertex_count_(vertex_count), faces_(std::move(faces)) {
    validate_faces();
    build_edges();
    build_vertex_faces();
  }

  std::size_t vertex_count() const { return vertex_count_; }
  std::size_t face_count() const { return faces_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::vector<Face>& faces() const { return faces_; }
  const Face& face(std::size_t f) const { return faces_[f]; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }

  /// Faces adjacent to edge `e`, ascending by face index; second is kNoIndex
  /// on a boundary edge.
  const std::array<Index, 2>& edge_faces(std::size_t e) const { return edge_faces_[e]; }

  /// Edge indices of face `f`: edges (v0,v1), (v1,v2), (v2,v0).
  const std::array<Index, 3>& face_edges(std::size_t f) const { return face_edges_[f]; }

  /// Faces incident on vertex `v`, ascending.
  std::span<const Index> vertex_faces(std::size_t v) const {
    return {vertex_faces_.data() + vertex_face_offsets_[v],
            vertex_faces_.data() + vertex_face_offsets_[v + 1]};
  }

  std::optional<Index> find_edge(Index u, Index v) const {
    if (u == v || u >= vertex_count_ || v >= vertex_count_) return std::nullopt;
    if (u > v) std::swap(u, v);
    auto first = edges_.begin() + edge_offsets_[u];
    auto last = edges_.begin() + edge_offsets_[u + 1];
    auto it = std::lower_bound(first, last, Edge{u, v});
    if (it == last || it->b != v) return std::nullopt;
    return static_cast<Index>(it - edges_.begin());
  }

  bool is_closed() const { return boundary_edges_ == 0; }
  std::size_t boundary_edge_count() const { return boundary_edges_; }

  /// True when every interior edge is traversed in opposite directions by its
  /// two faces.
  bool is_consistently_oriented() const { return misoriented_edges_ == 0; }

  /// Vertices referenced by at least one face.
  std::size_t used_vertex_count() const {
    std::size_t n = 0;
    for (std::size_t v = 0; v < vertex_count_; ++v) n += vertex_face_offsets_[v + 1] > vertex_face_offsets_[v];
    return n;
  }

  /// Connected components of the face graph.
  std::size_t component_count() const {
    std::vector<Index> parent(faces_.size());
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index x) {
      while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
      }
      return x;
    };
    for (const auto& ef : edge_faces_) {
      if (ef[1] == kNoIndex) continue;
      Index r0 = find(ef[0]), r1 = find(ef[1]);
      if (r0 != r1) parent[std::max(r0, r1)] = std::min(r0, r1);
    }
    std::size_t n = 0;
    for (Index f = 0; f < parent.size(); ++f) n += find(f) == f;
    return n;
  }

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.vertex_count_ == b.vertex_count_ && a.faces_ == b.faces_;
  }

 private:
  void validate_faces() const {
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const Face& t = faces_[f];
      for (Index i : t) {
        if (i >= vertex_count_) {
          throw ValidationError("face " + std::to_string(f) + " references vertex " + std::to_string(i) +
                                " but the mesh has " + std::to_string(vertex_count_) + " vertices");
        }
      }
      if (t[0] == t[1] || t[1] == t[2] || t[2] == t[0]) {
        throw ValidationError("face " + std::to_string(f) + " is degenerate (repeated vertex index)");
      }
    }
  }

  void build_edges() {
    std::vector<Edge> all;
    all.reserve(faces_.size() * 3);
    for (const Face& t : faces_) {
      for (int k = 0; k < 3; ++k) {
        Index u = t[k], v = t[(k + 1) % 3];
        all.push_back(u < v ? Edge{u, v} : Edge{v, u});
      }
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    edges_ = std::move(all);

    edge_offsets_.assign(vertex_count_ + 1, 0);
    for (const Edge& e : edges_) ++edge_offsets_[e.a + 1];
    for (std::size_t v = 0; v < vertex_count_; ++v) edge_offsets_[v + 1] += edge_offsets_[v];

    edge_faces_.assign(edges_.size(), {kNoIndex, kNoIndex});
    face_edges_.resize(faces_.size());
    // +1 for each traversal u->v with u<v, -1 for v->u.
    std::vector<int> direction_balance(edges_.size(), 0);
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const Face& t = faces_[f];
      for (int k = 0; k < 3; ++k) {
        const Index u = t[k], v = t[(k + 1) % 3];
        const Index e = *find_edge(u, v);
        face_edges_[f][k] = e;
        auto& slots = edge_faces_[e];
        if (slots[0] == kNoIndex) {
          slots[0] = static_cast<Index>(f);
        } else if (slots[1] == kNoIndex) {
          slots[1] = static_cast<Index>(f);
        } else {
          throw ValidationError("edge (" + std::to_string(edges_[e].a) + "," + std::to_string(edges_[e].b) +
                                ") is shared by more than two faces");
        }
        direction_balance[e] += u < v ? 1 : -1;
      }
    }
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (edge_faces_[e][1] == kNoIndex) {
        ++boundary_edges_;
      } else if (edge_faces_[e][0] == edge_faces_[e][1]) {
        throw ValidationError("face " + std::to_string(edge_faces_[e][0]) + " uses an edge twice");
      } else if (direction_balance[e] != 0) {
        ++misoriented_edges_;
      }
    }
  }

  void build_vertex_faces() {
    vertex_face_offsets_.assign(vertex_count_ + 1, 0);
    for (const Face& t : faces_)
      for (Index i : t) ++vertex_face_offsets_[i + 1];
    for (std::size_t v = 0; v < vertex_count_; ++v) vertex_face_offsets_[v + 1] += vertex_face_offsets_[v];
    vertex_faces_.resize(faces_.size() * 3);
    std::vector<std::size_t> cursor(vertex_face_offsets_.begin(), vertex_face_offsets_.end() - 1);
    for (std::size_t f = 0; f < faces_.size(); ++f)
      for (Index i : faces_[f]) vertex_faces_[cursor[i]++] = static_cast<Index>(f);
  }

  std::size_t vertex_count_;
  std::vector<Face> faces_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> edge_offsets_;
  std::vector<std::array<Index, 2>> edge_faces_;
  std::vector<std::array<Index, 3>> face_edges_;
  std::vector<std::size_t> vertex_face_offsets_;
  std::vector<Index> vertex_faces_;
  std::size_t boundary_edges_ = 0;
  std::size_t misoriented_edges_ = 0;
};

/// Indexed triangle mesh: vertex positions plus shared, validated connectivity.
class TriangleMesh {
 public:
  TriangleMesh() : topology_(std::make_shared<const Topology>(0, std::vector<Face>{})) {}

  TriangleMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
      : vertices_(std::move(vertices)),
        topology_(std::make_shared<const Topology>(vertices_.size(), std::move(faces))) {}

  TriangleMesh(std::vector<Vec3> vertices, std::shared_ptr<const Topology> topology)
      : vertices_(std::move(vertices)), topology_(std::move(topology)) {
    if (vertices_.size() != topology_->vertex_count()) {
      throw ValidationError("vertex array size does not match connectivity");
    }
  }

  /// Same connectivity, new positions.
  TriangleMesh with_vertices(std::vector<Vec3> vertices) const { return {std::move(vertices), topology_}; }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t face_count() const { return topology_->face_count(); }
  std::size_t edge_count() const { return topology_->edge_count(); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const Vec3& vertex(std::size_t v) const { return vertices_[v]; }
  const std::vector<Face>& faces() const { return topology_->faces(); }
  const Face& face(std::size_t f) const { return topology_->face(f); }
  const std::vector<Edge>& edges() const { return topology_->edges(); }
  const Edge& edge(std::size_t e) const { return topology_->edge(e); }
  const Topology& topology() const { return *topology_; }
  const std::shared_ptr<const Topology>& shared_topology() const { return topology_; }

  bool is_closed() const { return topology_->is_closed(); }

  std::array<Vec3, 3> triangle(std::size_t f) const {
    const Face& t = face(f);
    return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
  }

  /// Unnormalized face normal (v1-v0) x (v2-v0); length is twice the area.
  Vec3 face_normal_raw(std::size_t f) const {
    const auto [a, b, c] = triangle(f);
    return cross(b - a, c - a);
  }

  Vec3 face_normal(std::size_t f) const { return normalized(face_normal_raw(f)); }
  double face_area(std::size_t f) const { return 0.5 * norm(face_normal_raw(f)); }

  BBox bbox() const {
    if (vertices_.empty()) return {};
    BBox box{vertices_.front(), vertices_.front()};
    for (const Vec3& p : vertices_) {
      box.min = bwr::min(box.min, p);
      box.max = bwr::max(box.max, p);
    }
    return box;
  }

  /// Same connectivity (vertex count and identical face list).
  bool same_connectivity(const TriangleMesh& o) const {
    return topology_ == o.topology_ || *topology_ == *o.topology_;
  }

 private:
  std::vector<Vec3> vertices_;
  std::shared_ptr<const Topology> topology_;
};

/// Angle-weighted vertex normal: incident unit face normals weighted by the
/// interior angle at the vertex, summed in face-index order.
inline Vec3 vertex_normal(const TriangleMesh& mesh, std::size_t v) {
  if (v >= mesh.vertex_count()) throw ValidationError("vertex index out of range");
  const auto incident = mesh.topology().vertex_faces(v);
  if (incident.empty()) throw ValidationError("vertex " + std::to_string(v) + " has no incident face");
  Vec3 sum{};
  Vec3 plain{};
  for (Index f : incident) {
    const Face& t = mesh.face(f);
    const int k = t[0] == v ? 0 : (t[1] == v ? 1 : 2);
    const Vec3& p = mesh.vertex(t[k]);
    const Vec3 e1 = mesh.vertex(t[(k + 1) % 3]) - p;
    const Vec3 e2 = mesh.vertex(t[(k + 2) % 3]) - p;
    const Vec3 n = cross(e1, e2);
    plain += n;
    const double len = norm(n);
    if (len > 0.0) sum += (angle_between(e1, e2) / len) * n;
  }
  if (norm2(sum) == 0.0) sum = plain;
  if (norm2(sum) == 0.0) throw ValidationError("vertex " + std::to_string(v) + " has a degenerate neighbourhood");
  return normalized(sum);
}

inline std::vector<Vec3> vertex_normals(const TriangleMesh& mesh) {
  std::vector<Vec3> out(mesh.vertex_count());
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (!mesh.topology().vertex_faces(v).empty()) out[v] = vertex_normal(mesh, v);
  }
  return out;
}

/// Normalized average of the two endpoint vertex normals of edge (u, v).
inline Vec3 midpoint_normal(const TriangleMesh& mesh, Index u, Index v) {
  if (!mesh.topology().find_edge(u, v)) {
    throw ValidationError("(" + std::to_string(u) + "," + std::to_string(v) + ") is not an edge of the mesh");
  }
  if (u > v) std::swap(u, v);
  return normalized(vertex_normal(mesh, u) + vertex_normal(mesh, v));
}

inline Vec3 midpoint_normal(const TriangleMesh& mesh, const Edge& e) { return midpoint_normal(mesh, e.a, e.b); }

/// Euler characteristic over the vertices actually used by faces.
inline long long euler_characteristic(const TriangleMesh& mesh) {
  const auto& t = mesh.topology();
  return static_cast<long long>(t.used_vertex_count()) - static_cast<long long>(t.edge_count()) +
         static_cast<long long>(t.face_count());
}

/// Total genus of a closed, consistently oriented mesh.
inline int genus(const TriangleMesh& mesh) {
  const auto& t = mesh.topology();
  if (t.face_count() == 0) throw ValidationError("empty mesh has no genus");
  if (!t.is_closed()) {
    throw OpenMeshError("open mesh: " + std::to_string(t.boundary_edge_count()) + " boundary edges");
  }
  if (!t.is_consistently_oriented()) throw ValidationError("non-orientable or inconsistently oriented mesh");
  const long long chi = euler_characteristic(mesh);
  const long long twice = 2 * static_cast<long long>(t.component_count()) - chi;
  return static_cast<int>(twice / 2);
}

inline bool genus_check(const TriangleMesh& a, const TriangleMesh& b) { return genus(a) == genus(b); }

}  // namespace bwr
