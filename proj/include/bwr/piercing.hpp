#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bwr/bvh.hpp"
#include "bwr/error.hpp"
#include "bwr/mesh.hpp"
#include "bwr/parallel.hpp"

namespace bwr {

struct PierceConfig {
  /// Line counts as parallel to a plane when |n.d| < parallel_epsilon * |n|.
  double parallel_epsilon = 1e-12;
  /// Slack on barycentric coordinates for the inside test.
  double barycentric_epsilon = 1e-10;
};

enum class PierceMode { FullSearch, Accelerated };

/// Which of the two nearest candidates was taken.
enum class CandidateChoice : std::uint8_t { Unique = 0, ChosePositive = 1, ChoseNegative = 2 };

struct PierceResult {
  /// Signed distance along the unit direction.
  double w = 0.0;
  Index face = kNoIndex;
  std::array<double, 3> barycentric{};
  Vec3 point{};
  CandidateChoice choice = CandidateChoice::Unique;
};

using Triangle = std::array<Vec3, 3>;

/// Parameter w with n.(origin + w*dir - v1) = 0, n = (v2-v1) x (v3-v1);
/// nullopt when the line is parallel to the plane.
inline std::optional<double> ray_plane_intersect(const Vec3& origin, const Vec3& dir, const Triangle& tri,
                                                 double parallel_epsilon = PierceConfig{}.parallel_epsilon) {
  const Vec3 n = cross(tri[1] - tri[0], tri[2] - tri[0]);
  const double nlen = norm(n);
  if (nlen == 0.0) throw ValidationError("degenerate triangle has no plane");
  const double denom = dot(n, dir);
  if (std::abs(denom) < parallel_epsilon * nlen) return std::nullopt;
  return dot(n, tri[0] - origin) / denom;
}

struct Barycentric {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  bool inside = false;
};

/// Affine coordinates of `p` (projected onto the triangle plane) with
/// p = alpha*v1 + beta*v2 + gamma*v3.
inline Barycentric barycentric(const Vec3& p, const Triangle& tri,
                               double epsilon = PierceConfig{}.barycentric_epsilon) {
  const Vec3 e1 = tri[1] - tri[0], e2 = tri[2] - tri[0], r = p - tri[0];
  const double d11 = dot(e1, e1), d12 = dot(e1, e2), d22 = dot(e2, e2);
  const double d1r = dot(e1, r), d2r = dot(e2, r);
  const double det = d11 * d22 - d12 * d12;
  if (!(det > 0.0)) throw ValidationError("degenerate triangle has no barycentric frame");
  Barycentric b;
  b.beta = (d22 * d1r - d12 * d2r) / det;
  b.gamma = (d11 * d2r - d12 * d1r) / det;
  b.alpha = 1.0 - b.beta - b.gamma;
  b.inside = b.alpha >= -epsilon && b.beta >= -epsilon && b.gamma >= -epsilon;
  return b;
}

namespace detail {

struct LineHit {
  double w = 0.0;
  Index face = kNoIndex;
  std::array<double, 3> bary{};
};

// Zero-area reference faces cannot be hit and are skipped.
inline std::optional<LineHit> intersect_face(const TriangleMesh& mesh, Index f, const Vec3& origin, const Vec3& dir,
                                             const PierceConfig& cfg) {
  const Triangle tri = mesh.triangle(f);
  const Vec3 n = cross(tri[1] - tri[0], tri[2] - tri[0]);
  const double nlen = norm(n);
  if (nlen == 0.0) return std::nullopt;
  const double denom = dot(n, dir);
  if (std::abs(denom) < cfg.parallel_epsilon * nlen) return std::nullopt;
  const double w = dot(n, tri[0] - origin) / denom;
  const Barycentric b = barycentric(origin + w * dir, tri, cfg.barycentric_epsilon);
  if (!b.inside) return std::nullopt;
  return LineHit{w, f, {b.alpha, b.beta, b.gamma}};
}

// Keeps the smallest w >= 0 and the largest w < 0, lowest face on ties.
struct NearestPair {
  std::optional<LineHit> pos;
  std::optional<LineHit> neg;

  void offer(const LineHit& h) {
    if (h.w >= 0.0) {
      if (!pos || h.w < pos->w || (h.w == pos->w && h.face < pos->face)) pos = h;
    } else {
      if (!neg || h.w > neg->w || (h.w == neg->w && h.face < neg->face)) neg = h;
    }
  }
};

inline PierceResult make_result(const LineHit& h, const Vec3& origin, const Vec3& dir, CandidateChoice c) {
  return {h.w, h.face, h.bary, origin + h.w * dir, c};
}

inline std::optional<PierceResult> resolve(const NearestPair& pair, const TriangleMesh& mesh, const Vec3& origin,
                                           const Vec3& dir, const Vec3& midpoint_normal) {
  if (!pair.pos && !pair.neg) return std::nullopt;
  if (!pair.neg) return make_result(*pair.pos, origin, dir, CandidateChoice::Unique);
  if (!pair.pos) return make_result(*pair.neg, origin, dir, CandidateChoice::Unique);
  const double dp = dot(mesh.face_normal(pair.pos->face), midpoint_normal);
  const double dn = dot(mesh.face_normal(pair.neg->face), midpoint_normal);
  bool take_pos;
  if (dp != dn) {
    take_pos = dp > dn;
  } else if (std::abs(pair.pos->w) != std::abs(pair.neg->w)) {
    take_pos = std::abs(pair.pos->w) < std::abs(pair.neg->w);
  } else {
    take_pos = true;
  }
  return take_pos ? make_result(*pair.pos, origin, dir, CandidateChoice::ChosePositive)
                  : make_result(*pair.neg, origin, dir, CandidateChoice::ChoseNegative);
}

}  // namespace detail

/// Intersects direction lines with a reference surface. The accelerated mode
/// only prunes faces whose padded box misses the line, then runs the same
/// per-face test and selection as the full search, so both modes agree
/// exactly.
class Piercer {
 public:
  explicit Piercer(const TriangleMesh& reference, PierceConfig config = {})
      : reference_(&reference), bvh_(reference), config_(config) {}

  const TriangleMesh& reference() const { return *reference_; }
  const PierceConfig& config() const { return config_; }

  std::optional<PierceResult> try_pierce(const Vec3& origin, const Vec3& dir, const Vec3& midpoint_normal,
                                         PierceMode mode = PierceMode::Accelerated) const {
    detail::NearestPair pair;
    auto visit = [&](Index f) {
      if (auto h = detail::intersect_face(*reference_, f, origin, dir, config_)) pair.offer(*h);
    };
    if (mode == PierceMode::FullSearch) {
      for (std::size_t f = 0; f < reference_->face_count(); ++f) visit(static_cast<Index>(f));
    } else {
      bvh_.for_each_line_candidate(origin, dir, visit);
    }
    return detail::resolve(pair, *reference_, origin, dir, midpoint_normal);
  }

  PierceResult pierce(const Vec3& origin, const Vec3& dir, const Vec3& midpoint_normal,
                      PierceMode mode = PierceMode::Accelerated) const {
    if (auto r = try_pierce(origin, dir, midpoint_normal, mode)) return *r;
    throw PierceMissError("direction line misses the reference surface");
  }

 private:
  const TriangleMesh* reference_;
  FaceBvh bvh_;
  PierceConfig config_;
};

/// Full-search pierce of a single line against the reference.
inline PierceResult pierce(const Vec3& origin, const Vec3& dir, const TriangleMesh& reference,
                           const Vec3& midpoint_normal, const PierceConfig& config = {}) {
  detail::NearestPair pair;
  for (std::size_t f = 0; f < reference.face_count(); ++f) {
    if (auto h = detail::intersect_face(reference, static_cast<Index>(f), origin, dir, config)) pair.offer(*h);
  }
  if (auto r = detail::resolve(pair, reference, origin, dir, midpoint_normal)) return *r;
  throw PierceMissError("direction line misses the reference surface");
}

struct PierceQuery {
  Vec3 origin;
  Vec3 direction;
  Vec3 midpoint_normal;
};

struct PierceBatch {
  std::vector<std::optional<PierceResult>> results;
  /// Input indices with no intersection, ascending.
  std::vector<std::size_t> misses;
};

inline PierceBatch pierce_all(std::span<const PierceQuery> queries, const Piercer& piercer, PierceMode mode,
                              unsigned threads = 0) {
  PierceBatch out;
  out.results.resize(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    const PierceQuery& q = queries[i];
    out.results[i] = piercer.try_pierce(q.origin, q.direction, q.midpoint_normal, mode);
  });
  for (std::size_t i = 0; i < out.results.size(); ++i)
    if (!out.results[i]) out.misses.push_back(i);
  return out;
}

}  // namespace bwr
