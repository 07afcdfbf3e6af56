#pragma once

// Procedural closed meshes used as base domains and as test references.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "bwr/mesh.hpp"

namespace bwr::shapes {

/// Unit octahedron, vertices ordered top, right, front, left, back, bottom.
inline TriangleMesh octahedron() {
  std::vector<Vec3> v = {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
  std::vector<Face> f = {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}, {5, 2, 1}, {5, 3, 2}, {5, 4, 3}, {5, 1, 4}};
  return {std::move(v), std::move(f)};
}

inline TriangleMesh tetrahedron() {
  std::vector<Vec3> v = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  std::vector<Face> f = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return {std::move(v), std::move(f)};
}

/// Axis-aligned cube [lo, hi]^3, two triangles per side, outward oriented.
inline TriangleMesh cube(double lo = 0.0, double hi = 1.0) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) v.push_back({(i & 1) ? hi : lo, (i & 2) ? hi : lo, (i & 4) ? hi : lo});
  std::vector<Face> f = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                         {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return {std::move(v), std::move(f)};
}

inline TriangleMesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p = normalized(p);
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                         {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                         {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return {std::move(v), std::move(f)};
}

/// 1-to-4 split with new vertices at edge midpoints, optionally projected to
/// the unit sphere. Independent of the subdivision module on purpose: test
/// references must not share code with the code under test.
inline TriangleMesh split_faces(const TriangleMesh& mesh, bool project_to_sphere) {
  std::vector<Vec3> v = mesh.vertices();
  const auto n = static_cast<Index>(v.size());
  for (const Edge& e : mesh.edges()) {
    Vec3 m = 0.5 * (mesh.vertex(e.a) + mesh.vertex(e.b));
    v.push_back(project_to_sphere ? normalized(m) : m);
  }
  std::vector<Face> f;
  f.reserve(mesh.face_count() * 4);
  for (std::size_t i = 0; i < mesh.face_count(); ++i) {
    const Face& t = mesh.face(i);
    const auto& fe = mesh.topology().face_edges(i);
    const Index m01 = n + fe[0], m12 = n + fe[1], m20 = n + fe[2];
    f.push_back({t[0], m01, m20});
    f.push_back({m01, t[1], m12});
    f.push_back({m20, m12, t[2]});
    f.push_back({m01, m12, m20});
  }
  return {std::move(v), std::move(f)};
}

/// Unit icosphere with 20 * 4^levels faces.
inline TriangleMesh icosphere(int levels) {
  TriangleMesh m = icosahedron();
  for (int i = 0; i < levels; ++i) m = split_faces(m, true);
  return m;
}

/// Unit sphere refined from the octahedron: 8 * 4^levels faces.
inline TriangleMesh octasphere(int levels) {
  TriangleMesh m = octahedron();
  for (int i = 0; i < levels; ++i) m = split_faces(m, true);
  return m;
}

/// Latitude/longitude unit sphere: poles at +-z, `stacks` latitude bands,
/// `slices` longitude segments. The six octahedron directions are vertices
/// whenever `stacks` is even and `slices` is a multiple of 4.
inline TriangleMesh uv_sphere(int stacks, int slices) {
  std::vector<Vec3> v;
  v.push_back({0, 0, 1});
  for (int i = 1; i < stacks; ++i) {
    const double theta = kPi * i / stacks;
    for (int k = 0; k < slices; ++k) {
      const double phi = 2.0 * kPi * k / slices;
      v.push_back({std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)});
    }
  }
  v.push_back({0, 0, -1});
  const auto south = static_cast<Index>(v.size() - 1);
  auto ring = [slices](int i, int k) { return static_cast<Index>(1 + (i - 1) * slices + (k % slices)); };
  std::vector<Face> f;
  for (int k = 0; k < slices; ++k) f.push_back({0, ring(1, k), ring(1, k + 1)});
  for (int i = 1; i + 1 < stacks; ++i) {
    for (int k = 0; k < slices; ++k) {
      f.push_back({ring(i, k), ring(i + 1, k), ring(i + 1, k + 1)});
      f.push_back({ring(i, k), ring(i + 1, k + 1), ring(i, k + 1)});
    }
  }
  for (int k = 0; k < slices; ++k) f.push_back({south, ring(stacks - 1, k + 1), ring(stacks - 1, k)});
  return {std::move(v), std::move(f)};
}

/// Torus around the z axis with `nu` segments around the axis and `nv` around
/// the tube.
inline TriangleMesh torus(double major, double minor, int nu, int nv) {
  std::vector<Vec3> v;
  for (int i = 0; i < nu; ++i) {
    const double u = 2.0 * kPi * i / nu;
    for (int k = 0; k < nv; ++k) {
      const double t = 2.0 * kPi * k / nv;
      const double r = major + minor * std::cos(t);
      v.push_back({r * std::cos(u), r * std::sin(u), minor * std::sin(t)});
    }
  }
  auto id = [nu, nv](int i, int k) { return static_cast<Index>((i % nu) * nv + (k % nv)); };
  std::vector<Face> f;
  for (int i = 0; i < nu; ++i) {
    for (int k = 0; k < nv; ++k) {
      f.push_back({id(i, k), id(i + 1, k), id(i + 1, k + 1)});
      f.push_back({id(i, k), id(i + 1, k + 1), id(i, k + 1)});
    }
  }
  return {std::move(v), std::move(f)};
}

/// Copy of `mesh` with every vertex mapped through `fn`.
template <typename Fn>
TriangleMesh deform(const TriangleMesh& mesh, Fn&& fn) {
  std::vector<Vec3> v;
  v.reserve(mesh.vertex_count());
  for (const Vec3& p : mesh.vertices()) v.push_back(fn(p));
  return mesh.with_vertices(std::move(v));
}

/// Star-shaped sphere with a smooth radial bump pattern.
inline TriangleMesh bumpy_sphere(int levels, double amplitude, double frequency) {
  return deform(icosphere(levels), [=](const Vec3& p) {
    const double r = 1.0 + amplitude * std::sin(frequency * p.x) * std::sin(frequency * p.y) * std::sin(frequency * p.z);
    return r * p;
  });
}

/// Octahedron whose vertices are the extreme reference vertices picked in the
/// order top (+z), right (+x), front (+y), left (-x), back (-y), bottom (-z).
/// Ties resolve to the lowest vertex index.
inline TriangleMesh octahedron_base(const TriangleMesh& reference) {
  if (reference.vertex_count() == 0) throw ValidationError("empty reference mesh");
  struct Pick {
    int axis;
    double sign;
  };
  const Pick picks[6] = {{2, 1}, {0, 1}, {1, 1}, {0, -1}, {1, -1}, {2, -1}};
  std::vector<Vec3> v;
  for (const Pick& p : picks) {
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < reference.vertex_count(); ++i) {
      const double val = p.sign * reference.vertex(i)[p.axis];
      if (val > best_val) {
        best_val = val;
        best = i;
      }
    }
    v.push_back(reference.vertex(best));
  }
  return octahedron().with_vertices(std::move(v));
}

}  // namespace bwr::shapes
