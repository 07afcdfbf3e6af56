#include <gtest/gtest.h>

#include <filesystem>

#include "bwr/hierarchy.hpp"
#include "bwr/hierarchy_io.hpp"
#include "bwr/metrics.hpp"
#include "bwr/shapes.hpp"
#include "corpus.hpp"

using namespace bwr;

namespace {

MultiresHierarchy zero_hierarchy(const TriangleMesh& base, std::size_t levels) {
  MultiresHierarchy h;
  h.base = base;
  for (std::size_t j = 0; j < levels; ++j) h.levels.push_back({std::vector<double>(base.edge_count() << (2 * j), 0.0), {}, {}});
  return h;
}

// Distance from p to the plane of the nearest face of `ref` containing it
// within barycentric slack; returns +inf when no face contains p.
double incidence_residual(const TriangleMesh& ref, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < ref.face_count(); ++f) {
    const auto t = ref.triangle(f);
    const Vec3 n = ref.face_normal(f);
    const double d = std::abs(dot(n, p - t[0]));
    if (d >= best) continue;
    const Barycentric b = barycentric(p, t);
    if (b.inside) best = d;
  }
  return best;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("bwr_test_hier_" + name);
}

}  // namespace

TEST(Remesh, SelfReferenceGivesZeroCoefficients) {
  const TriangleMesh oct = shapes::octahedron();
  const RemeshResult r = bwr_remesh(oct, oct, 3);
  for (const auto& lv : r.hierarchy.levels)
    for (double w : lv.w) EXPECT_EQ(w, 0.0);
  for (const Vec3& p : r.mesh.vertices()) EXPECT_NEAR(std::abs(p.x) + std::abs(p.y) + std::abs(p.z), 1.0, 1e-15);
}

TEST(Remesh, SphereLevelOneMatchesFullSearch) {
  const TriangleMesh ref = shapes::icosphere(5);
  const TriangleMesh base = shapes::octahedron();
  const RemeshResult r = bwr_remesh(base, ref, 1);
  ASSERT_EQ(r.mesh.vertex_count(), 18u);
  double deepest = 0.0;  // largest gap between a face and the sphere
  for (std::size_t f = 0; f < ref.face_count(); ++f) {
    const auto t = ref.triangle(f);
    deepest = std::max(deepest, 1.0 - norm((t[0] + t[1] + t[2]) / 3.0));
  }
  const SubdivisionStep step = midpoint_subdivide(base);
  const auto dirs = compute_directions(step, {});
  for (std::size_t e = 0; e < base.edge_count(); ++e) {
    const Vec3 origin = step.child().vertex(step.new_vertex_id(e));
    const PierceResult oracle = pierce(origin, dirs[e].direction, ref, midpoint_normal(base, base.edge(e)));
    EXPECT_EQ(r.hierarchy.levels[0].w[e], oracle.w);
    const Vec3 p = r.mesh.vertex(step.new_vertex_id(e));
    EXPECT_LE(std::abs(norm(p) - 1.0), deepest);
  }
  // The (1,0,0)-(0,1,0) edge lands near (1,1,0)/sqrt(2).
  const Index v = step.new_vertex_id(*base.topology().find_edge(1, 2));
  EXPECT_LE(std::abs(norm(r.mesh.vertex(v)) - 1.0), deepest);
}

TEST(Remesh, CountsAtLevelEight) {
  const TriangleMesh m = synthesize(zero_hierarchy(shapes::octahedron(), 8), 8);
  EXPECT_EQ(m.vertex_count(), 262146u);
  EXPECT_EQ(m.face_count(), 524288u);
  EXPECT_EQ(refined_vertex_count(6, 12, 8), 262146u);
}

TEST(Remesh, ZeroLevelsKeepsBase) {
  const TriangleMesh ref = shapes::icosphere(2);
  const TriangleMesh base = shapes::octahedron_base(ref);
  const RemeshResult r = bwr_remesh(base, ref, 0);
  EXPECT_EQ(r.hierarchy.level_count(), 0u);
  EXPECT_EQ(r.mesh.vertices(), base.vertices());
}

TEST(Remesh, GenusMismatch) {
  EXPECT_THROW(bwr_remesh(shapes::octahedron(), shapes::torus(1, 0.3, 12, 8), 1), GenusMismatchError);
}

TEST(Remesh, OpenReferenceRejected) {
  const TriangleMesh open({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  EXPECT_THROW(bwr_remesh(shapes::octahedron(), open, 1), OpenMeshError);
}

TEST(Remesh, MissReportsLevelAndVertex) {
  // Reference far away from every direction line.
  const TriangleMesh far = shapes::deform(shapes::icosphere(1), [](const Vec3& p) { return 0.1 * p + Vec3{5, 7, 9}; });
  try {
    bwr_remesh(shapes::octahedron(), far, 1);
    FAIL() << "expected a pierce miss";
  } catch (const PierceMissError& e) {
    EXPECT_EQ(e.level(), 0);
    EXPECT_GE(e.vertex(), 6);
    EXPECT_NE(std::string(e.what()).find("vertex"), std::string::npos);
  }
}

TEST(Remesh, DeterministicAcrossThreadCounts) {
  const auto c = corpus_data::corpus()[2];
  RemeshConfig one, many;
  one.threads = 1;
  many.threads = 4;
  const RemeshResult a = bwr_remesh(c.base, c.reference, 3, one);
  const RemeshResult b = bwr_remesh(c.base, c.reference, 3, many);
  EXPECT_EQ(a.mesh.vertices(), b.mesh.vertices());
  EXPECT_EQ(serialize_hierarchy(a.hierarchy), serialize_hierarchy(b.hierarchy));
}

TEST(Remesh, AcceleratedEqualsFullSearch) {
  const auto c = corpus_data::corpus()[3];
  RemeshConfig full;
  full.mode = PierceMode::FullSearch;
  const RemeshResult a = bwr_remesh(c.base, c.reference, 2, full);
  const RemeshResult b = bwr_remesh(c.base, c.reference, 2);
  EXPECT_EQ(a.mesh.vertices(), b.mesh.vertices());
}

TEST(Remesh, IncidenceInterpolationAndNoFolds) {
  for (const auto& c : corpus_data::corpus()) {
    const RemeshResult r = bwr_remesh(c.base, c.reference, 3);
    const double tol = 1e-9 * c.reference.bbox().diagonal();
    for (std::size_t v = c.base.vertex_count(); v < r.mesh.vertex_count(); ++v) {
      EXPECT_LT(incidence_residual(c.reference, r.mesh.vertex(v)), tol) << c.name << " vertex " << v;
    }
    for (std::size_t j = 0; j < 3; ++j) {
      const TriangleMesh mj = synthesize(r.hierarchy, j);
      for (std::size_t v = 0; v < mj.vertex_count(); ++v) EXPECT_EQ(mj.vertex(v), r.mesh.vertex(v));
      EXPECT_TRUE(r.stats[j].folds.ok()) << c.name << " level " << j;
    }
  }
}

TEST(Remesh, ApproximationImprovesWithLevel) {
  for (const auto& c : corpus_data::corpus()) {
    const RemeshResult r = bwr_remesh(c.base, c.reference, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= 4; ++j) {
      const double l2 = surface_distance(synthesize(r.hierarchy, j), c.reference).l2_error;
      EXPECT_LE(l2, prev) << c.name << " level " << j;
      prev = l2;
    }
  }
}

TEST(Remesh, StatsAccountForEveryVertex) {
  const auto c = corpus_data::corpus()[0];
  const RemeshResult r = bwr_remesh(c.base, c.reference, 3);
  for (std::size_t j = 0; j < 3; ++j) {
    const LevelStats& s = r.stats[j];
    EXPECT_EQ(s.new_vertices, c.base.edge_count() << (2 * j));
    EXPECT_EQ(s.butterfly + s.normal_fallback + s.retries, s.new_vertices);
    EXPECT_EQ(s.vertices, refined_vertex_count(6, 12, j + 1));
  }
}

TEST(FoldCheck, DetectsFoldAndZeroArea) {
  // Two triangles folded back onto each other across edge (0,1).
  const TriangleMesh folded({{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, 1, 1e-3}}, {{0, 1, 2}, {1, 0, 3}});
  EXPECT_FALSE(check_folds(folded).sharp_edges.empty());
  const TriangleMesh flat({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2}});
  EXPECT_EQ(check_folds(flat).zero_area_faces.size(), 1u);
  EXPECT_TRUE(check_folds(shapes::icosphere(2)).ok());
}

TEST(Synthesize, ReproducesRemesh) {
  const auto c = corpus_data::corpus()[1];
  const RemeshResult r = bwr_remesh(c.base, c.reference, 3);
  EXPECT_EQ(synthesize(r.hierarchy, 3).vertices(), r.mesh.vertices());
  EXPECT_THROW(synthesize(r.hierarchy, 4), IncompatibleError);
}

TEST(Synthesize, ZeroOverrideIsMidpointSubdivision) {
  const auto c = corpus_data::corpus()[0];
  const RemeshResult r = bwr_remesh(c.base, c.reference, 3);
  CoefficientOverrides ov;
  for (std::size_t j = 0; j < 3; ++j) ov.push_back(LevelCoefficients{std::vector<double>(r.hierarchy.coefficient_count(j), 0.0), {}, {}});
  TriangleMesh oracle = c.base;
  for (int j = 0; j < 3; ++j) oracle = shapes::split_faces(oracle, false);
  EXPECT_EQ(synthesize(r.hierarchy, 3, ov).vertices(), oracle.vertices());
  ov[1]->w.pop_back();
  EXPECT_THROW(synthesize(r.hierarchy, 3, ov), IncompatibleError);
}

TEST(Synthesize, StoredConfigAndRetrySourcesAreUsed) {
  const TriangleMesh base = shapes::octahedron();
  MultiresHierarchy h = zero_hierarchy(base, 1);
  h.levels[0].w.assign(12, 0.25);
  h.levels[0].source.assign(12, DirectionSource::Butterfly);
  h.levels[0].source[3] = DirectionSource::RetryEndpointA;
  h.levels[0].source[4] = DirectionSource::RetryEndpointB;
  const TriangleMesh m = synthesize(h, 1);
  for (std::size_t e : {3u, 4u}) {
    const Edge ed = base.edge(e);
    const Vec3 n = vertex_normal(base, e == 3 ? ed.a : ed.b);
    const Vec3 expect = 0.5 * (base.vertex(ed.a) + base.vertex(ed.b)) + 0.25 * n;
    EXPECT_EQ(m.vertex(6 + e), expect);
  }
  // Octahedron stencils are incomplete: every other vertex uses the
  // midpoint normal.
  const Edge e0 = base.edge(0);
  EXPECT_EQ(m.vertex(6), 0.5 * (base.vertex(e0.a) + base.vertex(e0.b)) + 0.25 * midpoint_normal(base, e0));
}

TEST(Synthesize, ResidualsAreAdded) {
  MultiresHierarchy h = zero_hierarchy(shapes::octahedron(), 1);
  h.levels[0].residuals.push_back({5, {0.1, -0.2, 0.3}});
  const TriangleMesh m = synthesize(h, 1);
  const Edge e = h.base.edge(5);
  EXPECT_EQ(m.vertex(11), (0.5 * (h.base.vertex(e.a) + h.base.vertex(e.b)) + Vec3{0.1, -0.2, 0.3}));
}

TEST(Synthesize, CrossModelMixing) {
  const auto corpus = corpus_data::corpus();
  const RemeshResult a = bwr_remesh(corpus[0].base, corpus[0].reference, 3);
  const RemeshResult b = bwr_remesh(corpus[2].base, corpus[2].reference, 3);
  const TriangleMesh mixed = synthesize_mixed(a.hierarchy, b.hierarchy, 3, 1);
  EXPECT_TRUE(mixed.same_connectivity(a.mesh));
  EXPECT_EQ(mixed.vertex_count(), a.mesh.vertex_count());
  // Levels below from_level come from the host.
  const TriangleMesh a1 = synthesize(a.hierarchy, 1);
  for (std::size_t v = 0; v < a1.vertex_count(); ++v) EXPECT_EQ(mixed.vertex(v), a1.vertex(v));
  // Connectivity mismatch is rejected.
  const RemeshResult t = bwr_remesh(corpus[4].base, corpus[4].reference, 1);
  EXPECT_THROW(synthesize_mixed(a.hierarchy, t.hierarchy, 1), IncompatibleError);
}

TEST(Morph, EndpointsMidpointAndThirds) {
  const auto corpus = corpus_data::corpus();
  std::vector<MultiresHierarchy> hs;
  std::vector<TriangleMesh> ms;
  for (int i : {0, 2, 3}) {
    const RemeshResult r = bwr_remesh(corpus[i].base, corpus[i].reference, 3);
    hs.push_back(r.hierarchy);
    ms.push_back(r.mesh);
  }
  const std::vector<double> e0 = {1, 0, 0};
  EXPECT_EQ(morph(hs, e0, 3).vertices(), ms[0].vertices());
  const std::vector<double> half = {0.5, 0.5};
  const TriangleMesh mid = morph(std::span(hs).first(2), half, 3);
  for (std::size_t v = 0; v < mid.vertex_count(); ++v) {
    const Vec3 o = 0.5 * ms[0].vertex(v) + 0.5 * ms[1].vertex(v);
    EXPECT_LT(norm(mid.vertex(v) - o), 1e-15);
  }
  const std::vector<double> third = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  const TriangleMesh avg = morph(hs, third, 3);
  EXPECT_TRUE(avg.same_connectivity(ms[0]));
  for (std::size_t v = 0; v < avg.vertex_count(); ++v) {
    const Vec3 o = (ms[0].vertex(v) + ms[1].vertex(v) + ms[2].vertex(v)) / 3.0;
    EXPECT_LT(norm(avg.vertex(v) - o), 1e-14);
  }
}

TEST(Morph, Validation) {
  const auto corpus = corpus_data::corpus();
  const RemeshResult a = bwr_remesh(corpus[0].base, corpus[0].reference, 1);
  const RemeshResult t = bwr_remesh(corpus[4].base, corpus[4].reference, 1);
  std::vector<MultiresHierarchy> two = {a.hierarchy, a.hierarchy};
  EXPECT_THROW(morph(two, std::vector<double>{0.6, 0.6}, 1), ValidationError);
  EXPECT_THROW(morph(two, std::vector<double>{1.5, -0.5}, 1), ValidationError);
  EXPECT_THROW(morph(two, std::vector<double>{1.0}, 1), ValidationError);
  EXPECT_NO_THROW(morph(two, std::vector<double>{0.5, 0.5 + 5e-10}, 1));
  std::vector<MultiresHierarchy> mixed = {a.hierarchy, t.hierarchy};
  EXPECT_THROW(morph(mixed, std::vector<double>{0.5, 0.5}, 1), IncompatibleError);
}

TEST(SnapBase, Cases) {
  const TriangleMesh ref = shapes::icosphere(2);
  const TriangleMesh base = shapes::octahedron_base(ref);
  EXPECT_EQ(snap_base(base, ref).vertices(), base.vertices());

  std::vector<Vec3> v = base.vertices();
  v[0] += Vec3{0.01, 0, 0};
  const TriangleMesh moved = snap_base(base.with_vertices(v), ref);
  EXPECT_EQ(moved.vertex(0), base.vertex(0));

  std::vector<Vec3> dup = base.vertices();
  dup[1] = dup[0] + Vec3{0, 0, 1e-3};
  EXPECT_THROW(snap_base(base.with_vertices(dup), ref), ValidationError);
  EXPECT_THROW(snap_base(base, shapes::torus(1, 0.3, 10, 6)), GenusMismatchError);
}

TEST(HierarchyIo, RoundTripIsBitIdentical) {
  const auto c = corpus_data::corpus()[4];
  RemeshResult r = bwr_remesh(c.base, c.reference, 3);
  r.hierarchy.levels[1].residuals.push_back({7, {1e-3, 2e-3, -3e-3}});
  const auto path = temp_path("rt.bwr");
  save_hierarchy(r.hierarchy, path);
  const MultiresHierarchy back = load_hierarchy(path);
  std::filesystem::remove(path);
  EXPECT_EQ(synthesize(back, 3).vertices(), synthesize(r.hierarchy, 3).vertices());
  EXPECT_EQ(serialize_hierarchy(back), serialize_hierarchy(r.hierarchy));
  EXPECT_EQ(back.reference_diagonal, r.hierarchy.reference_diagonal);
}

TEST(HierarchyIo, CorruptionDetected) {
  const auto c = corpus_data::corpus()[0];
  const RemeshResult r = bwr_remesh(c.base, c.reference, 2);
  io::Bytes bytes = serialize_hierarchy(r.hierarchy);
  io::Bytes truncated(bytes.begin(), bytes.end() - 9);
  EXPECT_THROW(deserialize_hierarchy(truncated), FormatError);
  io::Bytes flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(deserialize_hierarchy(flipped), FormatError);
  EXPECT_THROW(deserialize_hierarchy(io::Bytes{}), FormatError);
}

TEST(HierarchyIo, StoredConfigDrivesSynthesis) {
  const auto c = corpus_data::corpus()[2];
  RemeshConfig cfg;
  cfg.direction.tilt_angle_deg = 30;
  cfg.direction.crease_angle_deg = 20;
  const RemeshResult r = bwr_remesh(c.base, c.reference, 3, cfg);
  const MultiresHierarchy back = deserialize_hierarchy(serialize_hierarchy(r.hierarchy));
  EXPECT_EQ(back.config, cfg.direction);
  EXPECT_EQ(synthesize(back, 3).vertices(), r.mesh.vertices());
  // Under the default config the same scalars give a different mesh.
  MultiresHierarchy other = back;
  other.config = DirectionConfig{};
  EXPECT_NE(synthesize(other, 3).vertices(), r.mesh.vertices());
}
