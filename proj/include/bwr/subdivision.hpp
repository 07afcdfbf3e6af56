#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bwr/error.hpp"
#include "bwr/mesh.hpp"
#include "bwr/parallel.hpp"

namespace bwr {

/// Thresholds deciding when the butterfly direction is replaced by the
/// midpoint normal. Stored with every hierarchy so a decoder recomputes the
/// same directions.
struct DirectionConfig {
  /// Raw butterfly vector shorter than this fraction of the mean stencil edge
  /// length counts as degenerate.
  double flat_epsilon = 1e-3;
  /// Maximum angle (degrees) between any stencil face normal and the midpoint
  /// normal before the neighbourhood counts as a crease.
  double crease_angle_deg = 50.0;
  /// Maximum acute angle (degrees) between the butterfly line and the
  /// midpoint normal.
  double tilt_angle_deg = 70.0;

  friend bool operator==(const DirectionConfig&, const DirectionConfig&) = default;
};

/// Where a refinement direction came from. The first two are recomputed by
/// the decoder; the retry values record a piercing retry and must be stored.
enum class DirectionSource : std::uint8_t {
  Butterfly = 0,
  NormalFallback = 1,
  RetryMidpointNormal = 2,
  RetryEndpointA = 3,
  RetryEndpointB = 4,
};

inline const char* to_string(DirectionSource s) {
  switch (s) {
    case DirectionSource::Butterfly: return "butterfly";
    case DirectionSource::NormalFallback: return "normal-fallback";
    case DirectionSource::RetryMidpointNormal: return "retry-midpoint-normal";
    case DirectionSource::RetryEndpointA: return "retry-endpoint-a";
    case DirectionSource::RetryEndpointB: return "retry-endpoint-b";
  }
  return "unknown";
}

inline bool is_retry(DirectionSource s) { return static_cast<std::uint8_t>(s) >= 2; }

/// Eight-point butterfly neighbourhood of a parent edge (p1, p2):
/// p3/p4 are opposite the edge in its two faces (lower face index first),
/// p5/p6 are the wings across (p1,p3)/(p2,p3), p7/p8 across (p1,p4)/(p2,p4).
struct ButterflyStencil {
  std::array<Index, 8> points{};
  /// Faces (p1,p2,p3), (p1,p2,p4) and the four wing faces.
  std::array<Index, 6> faces{};
  /// False when the eight points are not pairwise distinct, as happens next
  /// to valence-3 and valence-4 vertices.
  bool complete = false;
};

struct DirectionResult {
  /// 2(p3+p4) - (p5+p6+p7+p8); zero when the stencil is incomplete.
  Vec3 raw{};
  /// Unit direction actually used.
  Vec3 direction{};
  DirectionSource source = DirectionSource::NormalFallback;
};

inline Vec3 butterfly_vector(std::span<const Vec3, 8> p) {
  return 2.0 * (p[2] + p[3]) - (p[4] + p[5] + p[6] + p[7]);
}

/// Applies the fallback tests to a raw butterfly vector.
inline DirectionResult select_direction(const Vec3& raw, const Vec3& midpoint_normal,
                                        std::span<const Vec3> stencil_face_normals, double mean_edge_length,
                                        bool stencil_complete, const DirectionConfig& config) {
  DirectionResult out{raw, midpoint_normal, DirectionSource::NormalFallback};
  if (!stencil_complete) return out;
  const double len = norm(raw);
  if (!(len >= config.flat_epsilon * mean_edge_length) || len == 0.0) return out;
  const double crease = deg_to_rad(config.crease_angle_deg);
  for (const Vec3& n : stencil_face_normals) {
    if (angle_between(n, midpoint_normal) > crease) return out;
  }
  const Vec3 dir = raw / len;
  const double tilt = angle_between(dir, midpoint_normal);
  if (std::min(tilt, kPi - tilt) > deg_to_rad(config.tilt_angle_deg)) return out;
  out.direction = dir;
  out.source = DirectionSource::Butterfly;
  return out;
}

/// One level of 1-to-4 midpoint refinement with the bookkeeping needed to
/// place and code the new vertices. New vertex for parent edge i has child
/// index parent.vertex_count() + i.
class SubdivisionStep {
 public:
  SubdivisionStep(TriangleMesh parent, TriangleMesh child, std::vector<std::array<Index, 4>> child_edges,
                  std::vector<ButterflyStencil> stencils)
      : parent_(std::move(parent)),
        child_(std::move(child)),
        child_edges_(std::move(child_edges)),
        stencils_(std::move(stencils)) {}

  const TriangleMesh& parent() const { return parent_; }
  /// Child connectivity with new vertices at edge midpoints.
  const TriangleMesh& child() const { return child_; }

  std::size_t new_vertex_count() const { return parent_.edge_count(); }
  Index new_vertex_id(std::size_t parent_edge) const {
    return static_cast<Index>(parent_.vertex_count() + parent_edge);
  }
  std::size_t parent_edge_of(Index new_vertex) const {
    if (new_vertex < parent_.vertex_count() || new_vertex >= child_.vertex_count()) {
      throw ValidationError("vertex " + std::to_string(new_vertex) + " is not a new vertex of this step");
    }
    return new_vertex - parent_.vertex_count();
  }

  /// Child edge indices of parent edge i, in slot order: (p1,mid), (mid,p2),
  /// interior edge of the lower-indexed adjacent face, interior edge of the
  /// higher-indexed one.
  const std::array<Index, 4>& child_edges(std::size_t parent_edge) const { return child_edges_[parent_edge]; }
  const std::vector<std::array<Index, 4>>& child_edge_map() const { return child_edges_; }

  const ButterflyStencil& stencil(std::size_t parent_edge) const { return stencils_[parent_edge]; }

 private:
  TriangleMesh parent_;
  TriangleMesh child_;
  std::vector<std::array<Index, 4>> child_edges_;
  std::vector<ButterflyStencil> stencils_;
};

namespace detail {

inline Index opposite_vertex(const Face& t, Index u, Index v) {
  for (Index i : t)
    if (i != u && i != v) return i;
  return kNoIndex;
}

inline Index other_face(const Topology& topo, Index u, Index v, Index face) {
  const auto e = topo.find_edge(u, v);
  const auto& ef = topo.edge_faces(*e);
  return ef[0] == face ? ef[1] : ef[0];
}

inline ButterflyStencil gather_stencil(const Topology& topo, std::size_t e) {
  ButterflyStencil s;
  const Edge& edge = topo.edge(e);
  const auto& ef = topo.edge_faces(e);
  const Index p1 = edge.a, p2 = edge.b;
  const Index f0 = ef[0], f1 = ef[1];
  const Index p3 = opposite_vertex(topo.face(f0), p1, p2);
  const Index p4 = opposite_vertex(topo.face(f1), p1, p2);
  const Index w5 = other_face(topo, p1, p3, f0);
  const Index w6 = other_face(topo, p2, p3, f0);
  const Index w7 = other_face(topo, p1, p4, f1);
  const Index w8 = other_face(topo, p2, p4, f1);
  s.points = {p1, p2, p3, p4, opposite_vertex(topo.face(w5), p1, p3), opposite_vertex(topo.face(w6), p2, p3),
              opposite_vertex(topo.face(w7), p1, p4), opposite_vertex(topo.face(w8), p2, p4)};
  s.faces = {f0, f1, w5, w6, w7, w8};
  s.complete = true;
  for (int i = 0; i < 8 && s.complete; ++i)
    for (int k = i + 1; k < 8; ++k)
      if (s.points[i] == s.points[k]) {
        s.complete = false;
        break;
      }
  return s;
}

}  // namespace detail

/// Midpoint subdivision of a closed mesh.
inline SubdivisionStep midpoint_subdivide(const TriangleMesh& parent) {
  const Topology& topo = parent.topology();
  if (!topo.is_closed()) {
    throw OpenMeshError("midpoint subdivision requires a closed mesh (" + std::to_string(topo.boundary_edge_count()) +
                        " boundary edges)");
  }
  const auto n = static_cast<Index>(parent.vertex_count());
  std::vector<Vec3> v = parent.vertices();
  v.reserve(parent.vertex_count() + parent.edge_count());
  for (const Edge& e : parent.edges()) v.push_back(0.5 * (parent.vertex(e.a) + parent.vertex(e.b)));

  std::vector<Face> f;
  f.reserve(parent.face_count() * 4);
  for (std::size_t i = 0; i < parent.face_count(); ++i) {
    const Face& t = parent.face(i);
    const auto& fe = topo.face_edges(i);
    const Index m01 = n + fe[0], m12 = n + fe[1], m20 = n + fe[2];
    f.push_back({t[0], m01, m20});
    f.push_back({m01, t[1], m12});
    f.push_back({m20, m12, t[2]});
    f.push_back({m01, m12, m20});
  }
  TriangleMesh child(std::move(v), std::move(f));
  const Topology& ctopo = child.topology();

  std::vector<std::array<Index, 4>> child_edges(parent.edge_count());
  for (std::size_t e = 0; e < parent.edge_count(); ++e) {
    const Edge& pe = parent.edge(e);
    const Index mid = n + static_cast<Index>(e);
    child_edges[e][0] = *ctopo.find_edge(pe.a, mid);
    child_edges[e][1] = *ctopo.find_edge(mid, pe.b);
  }
  // Within a face, edge (v_k, v_k+1) claims the interior edge joining its
  // midpoint to the midpoint of the next edge in face order.
  for (std::size_t i = 0; i < parent.face_count(); ++i) {
    const auto& fe = topo.face_edges(i);
    for (int k = 0; k < 3; ++k) {
      const Index e = fe[k];
      const Index interior = *ctopo.find_edge(n + e, n + fe[(k + 1) % 3]);
      const int slot = topo.edge_faces(e)[0] == i ? 2 : 3;
      child_edges[e][slot] = interior;
    }
  }

  std::vector<ButterflyStencil> stencils(parent.edge_count());
  for (std::size_t e = 0; e < parent.edge_count(); ++e) stencils[e] = detail::gather_stencil(topo, e);

  return {parent, std::move(child), std::move(child_edges), std::move(stencils)};
}

/// Stencil of a new vertex, addressed by its child-mesh index.
inline const ButterflyStencil& butterfly_stencil(const SubdivisionStep& step, Index new_vertex) {
  return step.stencil(step.parent_edge_of(new_vertex));
}

/// Direction for parent edge `e` given precomputed parent vertex normals.
inline DirectionResult direction_for_edge(const SubdivisionStep& step, std::size_t e, std::span<const Vec3> normals,
                                          const DirectionConfig& config) {
  const TriangleMesh& mesh = step.parent();
  const ButterflyStencil& st = step.stencil(e);
  const Vec3 nm = normalized(normals[st.points[0]] + normals[st.points[1]]);
  if (!st.complete) return select_direction({}, nm, {}, 0.0, false, config);

  std::array<Vec3, 8> p;
  for (int i = 0; i < 8; ++i) p[i] = mesh.vertex(st.points[i]);
  std::array<Vec3, 6> face_normals;
  for (int i = 0; i < 6; ++i) face_normals[i] = mesh.face_normal(st.faces[i]);
  static constexpr std::array<std::array<int, 2>, 13> kStencilEdges = {{{0, 1},
                                                                        {0, 2},
                                                                        {1, 2},
                                                                        {0, 3},
                                                                        {1, 3},
                                                                        {0, 4},
                                                                        {2, 4},
                                                                        {1, 5},
                                                                        {2, 5},
                                                                        {0, 6},
                                                                        {3, 6},
                                                                        {1, 7},
                                                                        {3, 7}}};
  double total = 0.0;
  for (const auto& [i, k] : kStencilEdges) total += distance(p[i], p[k]);
  return select_direction(butterfly_vector(p), nm, face_normals, total / kStencilEdges.size(), true, config);
}

/// Direction of a new vertex, addressed by its child-mesh index.
inline DirectionResult direction_vector(const SubdivisionStep& step, Index new_vertex, const DirectionConfig& config) {
  const std::size_t e = step.parent_edge_of(new_vertex);
  const ButterflyStencil& st = step.stencil(e);
  // Only the normals the stencil touches are needed.
  std::vector<Vec3> normals(step.parent().vertex_count());
  normals[st.points[0]] = vertex_normal(step.parent(), st.points[0]);
  normals[st.points[1]] = vertex_normal(step.parent(), st.points[1]);
  return direction_for_edge(step, e, normals, config);
}

/// Directions for every new vertex of a step, indexed by parent edge.
inline std::vector<DirectionResult> compute_directions(const SubdivisionStep& step, const DirectionConfig& config,
                                                       unsigned threads = 0) {
  const std::vector<Vec3> normals = vertex_normals(step.parent());
  std::vector<DirectionResult> out(step.new_vertex_count());
  parallel_for(out.size(), threads, [&](std::size_t e) { out[e] = direction_for_edge(step, e, normals, config); });
  return out;
}

}  // namespace bwr
