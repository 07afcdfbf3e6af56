#include <gtest/gtest.h>

#include "bwr/metrics.hpp"
#include "bwr/shapes.hpp"

using namespace bwr;

namespace {

// Closest point on a triangle by region tests (Ericson, RTCD 5.1.5).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + (vb * denom) * ab + (vc * denom) * ac;
}

double brute_distance(const Vec3& p, const TriangleMesh& m) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    const auto [a, b, c] = m.triangle(f);
    best = std::min(best, norm(p - closest_on_triangle(p, a, b, c)));
  }
  return best;
}

TriangleMesh square(double z) {
  return TriangleMesh({{0, 0, z}, {1, 0, z}, {1, 1, z}, {0, 1, z}}, {{0, 1, 2}, {0, 2, 3}});
}

TriangleMesh scaled(const TriangleMesh& m, double s) {
  std::vector<Vec3> v = m.vertices();
  for (Vec3& x : v) x = s * x;
  return {v, m.faces()};
}

}  // namespace

TEST(Psnr, PublishedValues) {
  EXPECT_NEAR(psnr(55.08, 0.002883), 85.62, 0.01);
  EXPECT_NEAR(psnr(36.47, 0.001435), 88.10, 0.01);
  EXPECT_DOUBLE_EQ(psnr(2.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(psnr(10.0, 0.1), 40.0);
  EXPECT_THROW(psnr(1.0, 0.0), ValidationError);
  EXPECT_THROW(psnr(0.0, 1.0), ValidationError);
  EXPECT_THROW(psnr(1.0, -1.0), ValidationError);
}

TEST(SurfaceDistance, IdenticalMeshesAreZero) {
  const TriangleMesh m = shapes::bumpy_sphere(2, 0.1, 3.0);
  const DistanceReport r = surface_distance(m, m);
  EXPECT_EQ(r.forward.max, 0.0);
  EXPECT_EQ(r.backward.max, 0.0);
  EXPECT_EQ(r.l2_error, 0.0);
  EXPECT_TRUE(std::isinf(r.psnr_db));
  EXPECT_GT(r.forward.samples, m.vertex_count());
}

TEST(SurfaceDistance, ParallelPlanesGiveExactOffset) {
  const DistanceReport r = surface_distance(square(0.0), square(0.3), {.samples_per_area = 500});
  for (const DirectionalDistance& d : {r.forward, r.backward}) {
    EXPECT_NEAR(d.mean, 0.3, 1e-12);
    EXPECT_NEAR(d.rms, 0.3, 1e-12);
    EXPECT_NEAR(d.max, 0.3, 1e-12);
  }
  EXPECT_NEAR(r.l2_error, 0.3, 1e-12);
  EXPECT_NEAR(r.psnr_db, 20 * std::log10(std::sqrt(2.0) / 0.3), 1e-9);
}

TEST(SurfaceDistance, ConcentricSpheres) {
  const TriangleMesh a = shapes::icosphere(4);
  const TriangleMesh b = scaled(a, 1.1);
  const DistanceReport r = surface_distance(a, b);
  // Inscribed-polyhedron sag of icosphere(4) is below 2e-3 of the radius.
  EXPECT_NEAR(r.forward.mean, 0.1, 3e-3);
  EXPECT_NEAR(r.backward.mean, 0.1, 3e-3);
  EXPECT_NEAR(r.l2_error, 0.1, 3e-3);
  EXPECT_EQ(r.bbox_diagonal, b.bbox().diagonal());
}

TEST(SurfaceDistance, MatchesBruteForceOracle) {
  const TriangleMesh a = shapes::bumpy_sphere(2, 0.15, 3.0);
  const TriangleMesh b = shapes::icosphere(2);
  const SamplingConfig cfg{.samples_per_area = 200};
  const DistanceReport r = surface_distance(a, b, cfg);
  const auto pa = sample_surface(a, cfg);
  const auto pb = sample_surface(b, cfg);
  ASSERT_EQ(pa.size(), r.forward.samples);
  ASSERT_EQ(pb.size(), r.backward.samples);
  double fmax = 0, fsum = 0, fsq = 0, bsq = 0;
  for (const Vec3& p : pa) {
    const double d = brute_distance(p, b);
    fmax = std::max(fmax, d), fsum += d, fsq += d * d;
  }
  for (const Vec3& p : pb) {
    const double d = brute_distance(p, a);
    bsq += d * d;
  }
  EXPECT_NEAR(r.forward.max, fmax, 1e-12);
  EXPECT_NEAR(r.forward.mean, fsum / pa.size(), 1e-12);
  EXPECT_NEAR(r.forward.rms, std::sqrt(fsq / pa.size()), 1e-12);
  EXPECT_NEAR(r.backward.rms, std::sqrt(bsq / pb.size()), 1e-12);
  EXPECT_NEAR(r.l2_error, std::sqrt((fsq + bsq) / (pa.size() + pb.size())), 1e-12);
}

TEST(SurfaceDistance, SwappingArgumentsSwapsDirections) {
  const TriangleMesh a = shapes::bumpy_sphere(3, 0.1, 3.0);
  const TriangleMesh b = shapes::icosphere(3);
  const SamplingConfig cfg{.samples_per_area = 300};
  const DistanceReport ab = surface_distance(a, b, cfg), ba = surface_distance(b, a, cfg);
  EXPECT_EQ(ab.forward.mean, ba.backward.mean);
  EXPECT_EQ(ab.forward.max, ba.backward.max);
  EXPECT_EQ(ab.backward.rms, ba.forward.rms);
  EXPECT_EQ(ab.hausdorff, ba.hausdorff);
  EXPECT_EQ(ab.l2_error, ba.l2_error);
}

TEST(SurfaceDistance, DirectionalOrderingInvariants) {
  const DistanceReport r = surface_distance(shapes::bumpy_sphere(3, 0.2, 5.0), shapes::icosphere(2));
  for (const DirectionalDistance& d : {r.forward, r.backward}) {
    EXPECT_GE(d.mean, 0.0);
    EXPECT_GE(d.rms, d.mean);
    EXPECT_GE(d.max, d.rms);
  }
  EXPECT_EQ(r.hausdorff, std::max(r.forward.max, r.backward.max));
}

TEST(SurfaceDistance, MaxDirectionalSwitch) {
  const TriangleMesh a = shapes::bumpy_sphere(3, 0.2, 5.0), b = shapes::icosphere(2);
  SamplingConfig cfg;
  cfg.l2_from_max_directional = true;
  const DistanceReport r = surface_distance(a, b, cfg);
  EXPECT_EQ(r.l2_error, std::max(r.forward.rms, r.backward.rms));
}

TEST(SurfaceDistance, ConvergesWithDensity) {
  const TriangleMesh a = shapes::bumpy_sphere(3, 0.1, 4.0), b = shapes::icosphere(3);
  const double lo = surface_distance(a, b, {.samples_per_area = 4000}).l2_error;
  const double hi = surface_distance(a, b, {.samples_per_area = 8000}).l2_error;
  EXPECT_LT(std::abs(hi - lo) / hi, 0.02);
}

TEST(SurfaceDistance, DeterministicAcrossThreads) {
  const TriangleMesh a = shapes::bumpy_sphere(3, 0.1, 4.0), b = shapes::icosphere(3);
  SamplingConfig one, many;
  one.threads = 1;
  many.threads = 4;
  const DistanceReport x = surface_distance(a, b, one), y = surface_distance(a, b, many);
  EXPECT_EQ(x.l2_error, y.l2_error);
  EXPECT_EQ(x.forward.max, y.forward.max);
  EXPECT_EQ(x.backward.mean, y.backward.mean);
}

TEST(SurfaceDistance, SampleCapIsRespected) {
  SamplingConfig cfg;
  cfg.max_samples = 1000;
  const TriangleMesh m = shapes::icosphere(3);
  EXPECT_LE(sample_surface(m, cfg).size(), m.vertex_count() + 1000 + m.face_count());
  EXPECT_THROW(surface_distance(TriangleMesh{}, m), ValidationError);
}
