#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "bwr/mesh.hpp"

namespace bwr {

struct Aabb {
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};

  void grow(const Vec3& p) {
    lo = bwr::min(lo, p);
    hi = bwr::max(hi, p);
  }
  void grow(const Aabb& b) {
    lo = bwr::min(lo, b.lo);
    hi = bwr::max(hi, b.hi);
  }
  void pad(double d) {
    lo -= Vec3{d, d, d};
    hi += Vec3{d, d, d};
  }
  Vec3 extent() const { return hi - lo; }
  int longest_axis() const {
    const Vec3 e = extent();
    return e.x >= e.y ? (e.x >= e.z ? 0 : 2) : (e.y >= e.z ? 1 : 2);
  }

  /// Does the infinite line origin + t*dir touch the box?
  bool hits_line(const Vec3& origin, const Vec3& dir) const {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (dir[a] == 0.0) {
        if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
        continue;
      }
      double ta = (lo[a] - origin[a]) / dir[a];
      double tb = (hi[a] - origin[a]) / dir[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }

  double distance2(const Vec3& p) const {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double v = p[a] < lo[a] ? lo[a] - p[a] : (p[a] > hi[a] ? p[a] - hi[a] : 0.0);
      d += v * v;
    }
    return d;
  }
};

/// Closest point to p on triangle (a, b, c) by Voronoi-region classification.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + (vb * denom) * ab + (vc * denom) * ac;
}

struct ClosestHit {
  Index face = kNoIndex;
  Vec3 point{};
  double distance2 = std::numeric_limits<double>::infinity();
};

/// Bounding-volume hierarchy over the faces of a mesh: median split on the
/// longest centroid axis, leaves of at most kLeafSize faces. Boxes are padded
/// so tolerance-accepted hits just outside a triangle are never culled.
class FaceBvh {
 public:
  static constexpr std::size_t kLeafSize = 8;

  explicit FaceBvh(const TriangleMesh& mesh) : mesh_(&mesh) {
    const std::size_t nf = mesh.face_count();
    order_.resize(nf);
    std::iota(order_.begin(), order_.end(), Index{0});
    if (nf == 0) return;
    face_boxes_.resize(nf);
    centroids_.resize(nf);
    const double pad = 1e-8 * std::max(mesh.bbox().diagonal(), 1e-300);
    for (std::size_t f = 0; f < nf; ++f) {
      const auto tri = mesh.triangle(f);
      Aabb box;
      for (const Vec3& p : tri) box.grow(p);
      box.pad(pad);
      face_boxes_[f] = box;
      centroids_[f] = (tri[0] + tri[1] + tri[2]) / 3.0;
    }
    nodes_.reserve(2 * nf / kLeafSize + 1);
    build(0, nf);
  }

  const TriangleMesh& mesh() const { return *mesh_; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Calls fn(face) for every face whose padded box meets the line.
  template <typename Fn>
  void for_each_line_candidate(const Vec3& origin, const Vec3& dir, Fn&& fn) const {
    if (nodes_.empty()) return;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
      const Node& node = nodes_[stack.back()];
      stack.pop_back();
      if (!node.box.hits_line(origin, dir)) continue;
      if (node.count > 0) {
        for (std::size_t i = node.first; i < node.first + node.count; ++i) {
          if (face_boxes_[order_[i]].hits_line(origin, dir)) fn(order_[i]);
        }
      } else {
        stack.push_back(node.left);
        stack.push_back(node.right);
      }
    }
  }

  /// Nearest surface point to p; ties resolve to the lowest face index.
  ClosestHit closest_point(const Vec3& p) const {
    ClosestHit best;
    if (nodes_.empty()) return best;
    std::vector<std::pair<double, std::size_t>> stack{{nodes_[0].box.distance2(p), 0}};
    while (!stack.empty()) {
      const auto [d2, idx] = stack.back();
      stack.pop_back();
      if (d2 > best.distance2) continue;
      const Node& node = nodes_[idx];
      if (node.count > 0) {
        for (std::size_t i = node.first; i < node.first + node.count; ++i) {
          const Index f = order_[i];
          const auto tri = mesh_->triangle(f);
          const Vec3 q = closest_point_on_triangle(p, tri[0], tri[1], tri[2]);
          const double dq = norm2(q - p);
          if (dq < best.distance2 || (dq == best.distance2 && f < best.face)) best = {f, q, dq};
        }
      } else {
        const double dl = nodes_[node.left].box.distance2(p);
        const double dr = nodes_[node.right].box.distance2(p);
        // Visit the nearer child first.
        if (dl < dr) {
          stack.push_back({dr, node.right});
          stack.push_back({dl, node.left});
        } else {
          stack.push_back({dl, node.left});
          stack.push_back({dr, node.right});
        }
      }
    }
    return best;
  }

 private:
  struct Node {
    Aabb box;
    std::size_t left = 0;
    std::size_t right = 0;
    std::size_t first = 0;
    std::size_t count = 0;  // > 0 for leaves
  };

  std::size_t build(std::size_t first, std::size_t last) {
    const std::size_t idx = nodes_.size();
    nodes_.emplace_back();
    Aabb box, cbox;
    for (std::size_t i = first; i < last; ++i) {
      box.grow(face_boxes_[order_[i]]);
      cbox.grow(centroids_[order_[i]]);
    }
    nodes_[idx].box = box;
    if (last - first <= kLeafSize) {
      nodes_[idx].first = first;
      nodes_[idx].count = last - first;
      return idx;
    }
    const int axis = cbox.longest_axis();
    const std::size_t mid = first + (last - first) / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + last, [&](Index a, Index b) {
      const double ca = centroids_[a][axis], cb = centroids_[b][axis];
      return ca < cb || (ca == cb && a < b);
    });
    const std::size_t left = build(first, mid);
    const std::size_t right = build(mid, last);
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
  }

  const TriangleMesh* mesh_;
  std::vector<Index> order_;
  std::vector<Aabb> face_boxes_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

}  // namespace bwr
