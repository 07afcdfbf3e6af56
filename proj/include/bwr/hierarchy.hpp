#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bwr/error.hpp"
#include "bwr/mesh.hpp"
#include "bwr/parallel.hpp"
#include "bwr/piercing.hpp"
#include "bwr/subdivision.hpp"

namespace bwr {

/// Optional 3-vector correction added to one new vertex.
struct Residual {
  Index index = 0;  // parent-edge index within the level
  Vec3 d{};
  friend bool operator==(const Residual&, const Residual&) = default;
};

/// Refinement data of one level: one scalar per edge of the coarser mesh, in
/// canonical edge order.
struct LevelCoefficients {
  std::vector<double> w;
  /// Per coefficient; empty means "recompute every direction".
  std::vector<DirectionSource> source;
  /// Sparse, ascending by index; absent entries are zero.
  std::vector<Residual> residuals;
};

/// Base mesh plus per-level scalar coefficients. Directions are never stored:
/// they are recomputed from the coarser mesh and the stored configuration.
struct MultiresHierarchy {
  TriangleMesh base;
  DirectionConfig config;
  double reference_diagonal = 0.0;
  std::vector<LevelCoefficients> levels;

  std::size_t level_count() const { return levels.size(); }
  std::size_t base_edge_count() const { return base.edge_count(); }
  /// Coefficients at level j: E0 * 4^j.
  std::size_t coefficient_count(std::size_t j) const { return base_edge_count() << (2 * j); }
};

/// Vertex count after j refinements of a closed base: V0 + E0 (4^j - 1) / 3.
inline std::size_t refined_vertex_count(std::size_t v0, std::size_t e0, std::size_t j) {
  return v0 + e0 * (((std::size_t{1} << (2 * j)) - 1) / 3);
}
inline std::size_t refined_face_count(std::size_t f0, std::size_t j) { return f0 << (2 * j); }
inline std::size_t refined_edge_count(std::size_t e0, std::size_t j) { return e0 << (2 * j); }

struct FoldReport {
  std::vector<Index> zero_area_faces;
  /// Edges whose interior dihedral angle is below the floor.
  std::vector<Index> sharp_edges;
  double min_dihedral_deg = 180.0;
  bool ok() const { return zero_area_faces.empty() && sharp_edges.empty(); }
};

/// Reports degenerate faces and edges folded tighter than `floor_deg`
/// (interior dihedral; 180 is flat, 0 is folded flat onto itself).
inline FoldReport check_folds(const TriangleMesh& mesh, double floor_deg = 5.0) {
  FoldReport r;
  std::vector<Vec3> normals(mesh.face_count());
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const Vec3 n = mesh.face_normal_raw(f);
    if (!(norm(n) > 0.0)) r.zero_area_faces.push_back(static_cast<Index>(f));
    normals[f] = normalized(n);
  }
  const auto& topo = mesh.topology();
  for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
    const auto& ef = topo.edge_faces(e);
    if (ef[1] == kNoIndex) continue;
    const double dihedral = 180.0 - angle_between(normals[ef[0]], normals[ef[1]]) * 180.0 / kPi;
    r.min_dihedral_deg = std::min(r.min_dihedral_deg, dihedral);
    if (dihedral < floor_deg) r.sharp_edges.push_back(static_cast<Index>(e));
  }
  return r;
}

namespace detail {

inline Vec3 retry_direction(DirectionSource s, const Vec3& na, const Vec3& nb) {
  switch (s) {
    case DirectionSource::RetryEndpointA: return na;
    case DirectionSource::RetryEndpointB: return nb;
    default: return normalized(na + nb);
  }
}

// Unit direction for parent edge e: recomputed unless a retry was recorded.
inline Vec3 level_direction(const DirectionResult& computed, DirectionSource stored, const Vec3& na, const Vec3& nb) {
  return is_retry(stored) ? retry_direction(stored, na, nb) : computed.direction;
}

}  // namespace detail

/// One synthesis step: midpoint-subdivide `coarse`, then move new vertex i to
/// midpoint + w[i] * s_i (+ d_i).
inline TriangleMesh refine_level(const TriangleMesh& coarse, const LevelCoefficients& level,
                                 const DirectionConfig& config, unsigned threads = 0) {
  const SubdivisionStep step = midpoint_subdivide(coarse);
  const std::size_t m = step.new_vertex_count();
  if (level.w.size() != m) {
    throw IncompatibleError("level has " + std::to_string(level.w.size()) + " coefficients but the mesh has " +
                            std::to_string(m) + " edges");
  }
  if (!level.source.empty() && level.source.size() != m) throw IncompatibleError("direction source array size mismatch");
  const std::vector<DirectionResult> dirs = compute_directions(step, config, threads);
  const std::vector<Vec3> normals = vertex_normals(coarse);
  std::vector<Vec3> v = step.child().vertices();
  const std::size_t n = coarse.vertex_count();
  parallel_for(m, threads, [&](std::size_t e) {
    const Edge& pe = coarse.edge(e);
    const DirectionSource src = level.source.empty() ? dirs[e].source : level.source[e];
    const Vec3 s = detail::level_direction(dirs[e], src, normals[pe.a], normals[pe.b]);
    v[n + e] = v[n + e] + level.w[e] * s;
  });
  for (const Residual& r : level.residuals) {
    if (r.index >= m) throw IncompatibleError("residual index out of range");
    v[n + r.index] += r.d;
  }
  return step.child().with_vertices(std::move(v));
}

/// Optional per-level replacement coefficients for synthesis.
using CoefficientOverrides = std::vector<std::optional<LevelCoefficients>>;

/// Rebuilds M^level from the base. overrides[j], when present, replaces the
/// stored coefficients of level j.
inline TriangleMesh synthesize(const MultiresHierarchy& h, std::size_t level, const CoefficientOverrides& overrides = {},
                               unsigned threads = 0) {
  if (level > h.level_count()) {
    throw IncompatibleError("requested level " + std::to_string(level) + " but the hierarchy has " +
                            std::to_string(h.level_count()));
  }
  TriangleMesh mesh = h.base;
  for (std::size_t j = 0; j < level; ++j) {
    const bool replaced = j < overrides.size() && overrides[j].has_value();
    const LevelCoefficients& coeffs = replaced ? *overrides[j] : h.levels[j];
    if (coeffs.w.size() != h.coefficient_count(j)) {
      throw IncompatibleError("override for level " + std::to_string(j) + " has " + std::to_string(coeffs.w.size()) +
                              " coefficients, expected " + std::to_string(h.coefficient_count(j)));
    }
    mesh = refine_level(mesh, coeffs, h.config, threads);
  }
  return mesh;
}

inline bool same_base_connectivity(const MultiresHierarchy& a, const MultiresHierarchy& b) {
  return a.base.same_connectivity(b.base);
}

/// Coarse levels [0, from_level) from `host`, finer levels from `donor`.
inline TriangleMesh synthesize_mixed(const MultiresHierarchy& host, const MultiresHierarchy& donor, std::size_t level,
                                     std::size_t from_level = 0, unsigned threads = 0) {
  if (!same_base_connectivity(host, donor)) throw IncompatibleError("hierarchies do not share base connectivity");
  if (level > donor.level_count()) throw IncompatibleError("donor hierarchy has too few levels");
  CoefficientOverrides ov(level);
  for (std::size_t j = from_level; j < level; ++j) ov[j] = donor.levels[j];
  MultiresHierarchy h = host;
  // Host may be shallower than the requested level when every level is donated.
  while (h.levels.size() < level) h.levels.push_back(donor.levels[h.levels.size()]);
  return synthesize(h, level, ov, threads);
}

/// Weighted vertex blend of topology-identical remeshes at a common level.
inline TriangleMesh blend(std::span<const TriangleMesh> meshes, std::span<const double> weights) {
  if (meshes.empty() || meshes.size() != weights.size()) throw ValidationError("need one weight per mesh");
  double sum = 0.0;
  for (double a : weights) {
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("morph weights must lie in [0, 1]");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("morph weights must sum to 1");
  for (const TriangleMesh& m : meshes) {
    if (!m.same_connectivity(meshes[0])) throw IncompatibleError("morph inputs do not share connectivity");
  }
  std::vector<Vec3> v(meshes[0].vertex_count());
  for (std::size_t k = 0; k < meshes.size(); ++k) {
    const auto& src = meshes[k].vertices();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += weights[k] * src[i];
  }
  return meshes[0].with_vertices(std::move(v));
}

inline TriangleMesh morph(std::span<const MultiresHierarchy> hierarchies, std::span<const double> weights,
                          std::size_t level, unsigned threads = 0) {
  if (hierarchies.empty()) throw ValidationError("morph needs at least one hierarchy");
  for (const auto& h : hierarchies) {
    if (!same_base_connectivity(h, hierarchies[0])) {
      throw IncompatibleError("morph inputs do not share base connectivity");
    }
  }
  std::vector<TriangleMesh> meshes;
  meshes.reserve(hierarchies.size());
  for (const auto& h : hierarchies) meshes.push_back(synthesize(h, level, {}, threads));
  return blend(meshes, weights);
}

/// Replaces each base vertex by its nearest reference vertex (lowest index on
/// ties).
inline TriangleMesh snap_base(const TriangleMesh& base, const TriangleMesh& reference) {
  const int gb = genus(base), gr = genus(reference);
  if (gb != gr) {
    throw GenusMismatchError("base genus " + std::to_string(gb) + " differs from reference genus " + std::to_string(gr));
  }
  std::vector<Vec3> v(base.vertex_count());
  std::vector<long long> owner(reference.vertex_count(), -1);
  for (std::size_t i = 0; i < base.vertex_count(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < reference.vertex_count(); ++r) {
      const double d = norm2(reference.vertex(r) - base.vertex(i));
      if (d < best_d) {
        best_d = d;
        best = r;
      }
    }
    if (owner[best] >= 0) {
      throw ValidationError("base vertices " + std::to_string(owner[best]) + " and " + std::to_string(i) +
                            " both snap to reference vertex " + std::to_string(best));
    }
    owner[best] = static_cast<long long>(i);
    v[i] = reference.vertex(best);
  }
  return base.with_vertices(std::move(v));
}

struct RemeshConfig {
  DirectionConfig direction;
  PierceConfig pierce;
  PierceMode mode = PierceMode::Accelerated;
  double fold_floor_deg = 5.0;
  bool fail_on_fold = false;
  unsigned threads = 0;
};

struct LevelStats {
  std::size_t level = 0;
  std::size_t vertices = 0;  // of the refined mesh
  std::size_t faces = 0;
  std::size_t new_vertices = 0;
  std::size_t butterfly = 0;
  std::size_t normal_fallback = 0;
  std::size_t retries = 0;
  std::size_t chose_positive = 0;
  std::size_t chose_negative = 0;
  double seconds = 0.0;
  FoldReport folds;
};

struct RemeshResult {
  MultiresHierarchy hierarchy;
  TriangleMesh mesh;  // M^J
  std::vector<LevelStats> stats;
};

/// Coarse-to-fine remeshing: each level midpoint-subdivides the current mesh
/// and slides every new vertex along its direction onto the reference.
/// Existing vertices never move.
inline RemeshResult bwr_remesh(const TriangleMesh& base, const TriangleMesh& reference, std::size_t levels,
                               const RemeshConfig& config = {}) {
  const int gb = genus(base), gr = genus(reference);
  if (gb != gr) {
    throw GenusMismatchError("base genus " + std::to_string(gb) + " differs from reference genus " + std::to_string(gr));
  }
  const Piercer piercer(reference, config.pierce);
  RemeshResult out;
  out.hierarchy.base = base;
  out.hierarchy.config = config.direction;
  out.hierarchy.reference_diagonal = reference.bbox().diagonal();
  TriangleMesh mesh = base;

  for (std::size_t j = 0; j < levels; ++j) {
    const auto t0 = std::chrono::steady_clock::now();
    const SubdivisionStep step = midpoint_subdivide(mesh);
    const std::vector<DirectionResult> dirs = compute_directions(step, config.direction, config.threads);
    const std::vector<Vec3> normals = vertex_normals(mesh);
    const std::size_t m = step.new_vertex_count();
    const std::size_t n = mesh.vertex_count();

    LevelCoefficients level;
    level.w.resize(m);
    level.source.resize(m);
    std::vector<CandidateChoice> choices(m, CandidateChoice::Unique);
    std::vector<char> missed(m, 0);

    parallel_for(m, config.threads, [&](std::size_t e) {
      const Edge& pe = mesh.edge(e);
      const Vec3 origin = step.child().vertex(n + e);
      const Vec3& na = normals[pe.a];
      const Vec3& nb = normals[pe.b];
      const Vec3 nm = normalized(na + nb);
      // Retry ladder: computed direction, midpoint normal, each endpoint normal.
      std::vector<DirectionSource> ladder{dirs[e].source};
      if (dirs[e].source == DirectionSource::Butterfly) ladder.push_back(DirectionSource::RetryMidpointNormal);
      ladder.push_back(DirectionSource::RetryEndpointA);
      ladder.push_back(DirectionSource::RetryEndpointB);
      for (DirectionSource src : ladder) {
        const Vec3 s = detail::level_direction(dirs[e], src, na, nb);
        if (auto hit = piercer.try_pierce(origin, s, nm, config.mode)) {
          level.w[e] = hit->w;
          level.source[e] = src;
          choices[e] = hit->choice;
          return;
        }
      }
      missed[e] = 1;
    });
    for (std::size_t e = 0; e < m; ++e) {
      if (missed[e]) {
        throw PierceMissError("level " + std::to_string(j) + ": new vertex " + std::to_string(n + e) + " on edge (" +
                                  std::to_string(mesh.edge(e).a) + "," + std::to_string(mesh.edge(e).b) +
                                  ") misses the reference along every retry direction",
                              static_cast<int>(j), static_cast<long long>(n + e));
      }
    }

    mesh = refine_level(mesh, level, config.direction, config.threads);

    LevelStats st;
    st.level = j;
    st.vertices = mesh.vertex_count();
    st.faces = mesh.face_count();
    st.new_vertices = m;
    for (std::size_t e = 0; e < m; ++e) {
      st.butterfly += level.source[e] == DirectionSource::Butterfly;
      st.normal_fallback += level.source[e] == DirectionSource::NormalFallback;
      st.retries += is_retry(level.source[e]);
      st.chose_positive += choices[e] == CandidateChoice::ChosePositive;
      st.chose_negative += choices[e] == CandidateChoice::ChoseNegative;
    }
    st.folds = check_folds(mesh, config.fold_floor_deg);
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (config.fail_on_fold && !st.folds.ok()) {
      throw ValidationError("level " + std::to_string(j) + ": " + std::to_string(st.folds.zero_area_faces.size()) +
                            " zero-area faces, " + std::to_string(st.folds.sharp_edges.size()) +
                            " edges below the dihedral floor");
    }
    out.hierarchy.levels.push_back(std::move(level));
    out.stats.push_back(std::move(st));
  }
  out.mesh = std::move(mesh);
  return out;
}

}  // namespace bwr
